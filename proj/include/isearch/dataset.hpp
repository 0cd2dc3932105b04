#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace isearch {

/// Dense row-major collection of d-dimensional points. All coordinates are
/// finite; every row has the same dimension (fixed by the first row added).
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::size_t dim) : dim_(dim) {}

    static Dataset from_rows(const std::vector<std::vector<double>>& rows);

    /// Appends one point. Throws DataError on dimension mismatch or
    /// non-finite coordinates.
    void add_row(std::span<const double> row);

    std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
    std::size_t dim() const { return dim_; }
    bool empty() const { return data_.empty(); }

    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * dim_, dim_};
    }
    double operator()(std::size_t i, std::size_t j) const {
        return data_[i * dim_ + j];
    }

private:
    std::size_t dim_ = 0;
    std::vector<double> data_;
};

double squared_distance(std::span<const double> a, std::span<const double> b);
double distance(std::span<const double> a, std::span<const double> b);

/// Per-dimension affine map between original units and the unit interval.
/// A degenerate dimension (min == max) maps to 0 and inverts back to min.
struct NormalizationMap {
    struct Range {
        double min = 0.0;
        double max = 0.0;
    };
    std::vector<Range> dims;

    bool degenerate(std::size_t d) const { return dims[d].min == dims[d].max; }

    std::vector<double> apply(std::span<const double> p) const;
    std::vector<double> invert(std::span<const double> p) const;
    Dataset apply(const Dataset& data) const;
    Dataset invert(const Dataset& data) const;
};

/// Fits per-dimension min/max. Throws DataError on an empty dataset.
NormalizationMap fit_normalization(const Dataset& data);

/// Maps a dataset onto the unit hypercube together with the fitted map.
std::pair<Dataset, NormalizationMap> normalize(const Dataset& data);

}
