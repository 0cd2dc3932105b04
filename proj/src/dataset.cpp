#include "isearch/dataset.hpp"

#include <cmath>
#include <string>

#include "isearch/error.hpp"

namespace isearch {

Dataset Dataset::from_rows(const std::vector<std::vector<double>>& rows) {
    Dataset d;
    for (const auto& r : rows) d.add_row(r);
    return d;
}

void Dataset::add_row(std::span<const double> row) {
    if (dim_ == 0) {
        if (row.empty())
            throw DataError("data points must have at least one dimension");
        dim_ = row.size();
    }
    if (row.size() != dim_)
        throw DataError("data point has dimension " + std::to_string(row.size()) +
                        ", expected " + std::to_string(dim_));
    for (double v : row)
        if (!std::isfinite(v))
            throw DataError("non-finite coordinate in data point");
    data_.insert(data_.end(), row.begin(), row.end());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

double distance(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_distance(a, b));
}

std::vector<double> NormalizationMap::apply(std::span<const double> p) const {
    if (p.size() != dims.size())
        throw DataError("point dimension does not match the normalization map");
    std::vector<double> out(p.size());
    for (std::size_t d = 0; d < p.size(); ++d)
        out[d] = degenerate(d) ? 0.0 : (p[d] - dims[d].min) / (dims[d].max - dims[d].min);
    return out;
}

std::vector<double> NormalizationMap::invert(std::span<const double> p) const {
    if (p.size() != dims.size())
        throw DataError("point dimension does not match the normalization map");
    std::vector<double> out(p.size());
    for (std::size_t d = 0; d < p.size(); ++d)
        out[d] = degenerate(d) ? dims[d].min : dims[d].min + p[d] * (dims[d].max - dims[d].min);
    return out;
}

Dataset NormalizationMap::apply(const Dataset& data) const {
    Dataset out(data.dim());
    for (std::size_t i = 0; i < data.size(); ++i) out.add_row(apply(data.row(i)));
    return out;
}

Dataset NormalizationMap::invert(const Dataset& data) const {
    Dataset out(data.dim());
    for (std::size_t i = 0; i < data.size(); ++i) out.add_row(invert(data.row(i)));
    return out;
}

NormalizationMap fit_normalization(const Dataset& data) {
    if (data.empty()) throw DataError("cannot normalize an empty dataset");
    NormalizationMap map;
    map.dims.resize(data.dim());
    for (std::size_t d = 0; d < data.dim(); ++d)
        map.dims[d] = {data(0, d), data(0, d)};
    for (std::size_t i = 1; i < data.size(); ++i)
        for (std::size_t d = 0; d < data.dim(); ++d) {
            const double v = data(i, d);
            if (v < map.dims[d].min) map.dims[d].min = v;
            if (v > map.dims[d].max) map.dims[d].max = v;
        }
    return map;
}

std::pair<Dataset, NormalizationMap> normalize(const Dataset& data) {
    NormalizationMap map = fit_normalization(data);
    return {map.apply(data), std::move(map)};
}

}
