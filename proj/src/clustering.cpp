#include "isearch/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "isearch/error.hpp"

namespace isearch {

void ClusterParams::validate() const {
    if (!(cluster_radius > 0.0) || !std::isfinite(cluster_radius))
        throw ConfigError("cluster_radius must be a positive number");
    if (!(quash_factor > 0.0) || !std::isfinite(quash_factor))
        throw ConfigError("quash_factor must be a positive number");
    if (!(accept_ratio > 0.0 && accept_ratio < 1.0))
        throw ConfigError("accept_ratio must lie in (0, 1)");
    if (!(reject_ratio > 0.0 && reject_ratio < 1.0))
        throw ConfigError("reject_ratio must lie in (0, 1)");
    if (!(reject_ratio < accept_ratio))
        throw ConfigError("reject_ratio must be smaller than accept_ratio");
}

std::vector<std::size_t> ClusterModel::cluster_sizes() const {
    std::vector<std::size_t> sizes(cluster_count(), 0);
    for (std::size_t c : assignment) ++sizes[c];
    return sizes;
}

namespace {

// Ties keep the lowest index.
std::size_t argmax(const std::vector<double>& p) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i)
        if (p[i] > p[best]) best = i;
    return best;
}

}

PotentialState initial_potentials(const Dataset& normalized,
                                  const ClusterParams& params,
                                  unsigned threads) {
    params.validate();
    if (normalized.empty())
        throw DataError("initial_potentials: empty dataset");
    const std::size_t n = normalized.size();
    const double half = params.cluster_radius / 2.0;
    const double denom = half * half;

    PotentialState state;
    state.potentials.assign(n, 0.0);
    state.iteration = 1;

    auto rows = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const auto xi = normalized.row(i);
            double p = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                p += std::exp(-squared_distance(xi, normalized.row(j)) / denom);
            state.potentials[i] = p;
        }
    };

    // Each potential is an independent sum over all points in index order,
    // so splitting the rows across threads cannot change any result.
    if (threads <= 1 || n < 2 * static_cast<std::size_t>(threads)) {
        rows(0, n);
    } else {
        const std::size_t workers = std::min<std::size_t>(threads, n);
        const std::size_t chunk = (n + workers - 1) / workers;
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < workers; ++t) {
            const std::size_t lo = t * chunk;
            const std::size_t hi = std::min(n, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(rows, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    return state;
}

void subtract_center(PotentialState& state, std::size_t center_index,
                     const Dataset& normalized, const ClusterParams& params) {
    if (state.potentials.size() != normalized.size())
        throw Error("subtract_center: potential/point count mismatch");
    if (center_index >= state.potentials.size())
        throw std::out_of_range("subtract_center: center index out of range");

    const double pc = state.potentials[center_index];
    const double half = params.cluster_radius * params.quash_factor / 2.0;
    const double denom = half * half;
    const auto c = normalized.row(center_index);
    // At the center itself the subtracted term is exactly pc, leaving 0.
    for (std::size_t i = 0; i < state.potentials.size(); ++i)
        state.potentials[i] -= pc * std::exp(-squared_distance(normalized.row(i), c) / denom);
    ++state.iteration;
}

SelectionResult select_centers_from(PotentialState state,
                                    const Dataset& normalized,
                                    const ClusterParams& params) {
    params.validate();
    if (normalized.empty())
        throw DataError("select_centers: empty dataset");
    if (state.potentials.size() != normalized.size())
        throw Error("select_centers: potential/point count mismatch");

    const std::size_t n = normalized.size();
    const std::size_t cap = params.max_centers == 0 ? n : params.max_centers;

    SelectionResult result;
    if (cap == 0) return result;

    // The first center is unconditional: the global potential peak.
    const std::size_t first = argmax(state.potentials);
    state.first_center_potential = state.potentials[first];
    const double p_ref = state.first_center_potential;
    result.center_indices.push_back(first);
    result.center_potentials.push_back(p_ref);
    subtract_center(state, first, normalized, params);

    while (result.center_indices.size() < cap) {
        std::size_t cand = argmax(state.potentials);
        double p = state.potentials[cand];
        bool accepted = false;
        for (;;) {
            if (p <= 0.0) break; // no positive potential left anywhere
            if (p > params.accept_ratio * p_ref) { // clear peak: accept outright
                accepted = true;
                break;
            }
            if (p < params.reject_ratio * p_ref) break; // too faint: stop the search
            // Ambiguous band: trade distance to the accepted centers against
            // potential. Passing accepts; failing removes the candidate and
            // retests the next-highest point within this same iteration.
            double dmin = std::numeric_limits<double>::infinity();
            for (std::size_t ci : result.center_indices)
                dmin = std::min(dmin, distance(normalized.row(cand), normalized.row(ci)));
            if (dmin / params.cluster_radius + p / p_ref >= 1.0) {
                accepted = true;
                break;
            }
            state.potentials[cand] = 0.0;
            cand = argmax(state.potentials);
            p = state.potentials[cand];
        }
        if (!accepted) break;
        result.center_indices.push_back(cand);
        result.center_potentials.push_back(p);
        subtract_center(state, cand, normalized, params);
    }
    return result;
}

SelectionResult select_centers(const Dataset& normalized,
                               const ClusterParams& params,
                               unsigned threads) {
    return select_centers_from(initial_potentials(normalized, params, threads),
                               normalized, params);
}

std::vector<std::size_t> assign(const Dataset& normalized, const Dataset& centers) {
    if (centers.empty()) throw Error("assign: no centers");
    if (!normalized.empty() && centers.dim() != normalized.dim())
        throw Error("assign: dimension mismatch between points and centers");
    std::vector<std::size_t> out(normalized.size());
    for (std::size_t i = 0; i < normalized.size(); ++i) {
        std::size_t best = 0;
        double best_d = squared_distance(normalized.row(i), centers.row(0));
        for (std::size_t c = 1; c < centers.size(); ++c) {
            const double d = squared_distance(normalized.row(i), centers.row(c));
            if (d < best_d) { // strict: ties keep the lowest center index
                best_d = d;
                best = c;
            }
        }
        out[i] = best;
    }
    return out;
}

Dataset denormalize_centers(const Dataset& centers, const NormalizationMap& map) {
    if (centers.dim() != map.dims.size())
        throw DataError("center dimension does not match the normalization map");
    return map.invert(centers);
}

ClusterModel cluster(const Dataset& data, const ClusterParams& params,
                     unsigned threads) {
    auto [norm, map] = normalize(data);
    const SelectionResult sel = select_centers(norm, params, threads);

    ClusterModel model;
    model.map = map;
    model.params = params;
    model.center_indices = sel.center_indices;
    model.centers_normalized = Dataset(norm.dim());
    for (std::size_t i : sel.center_indices)
        model.centers_normalized.add_row(norm.row(i));
    model.centers = denormalize_centers(model.centers_normalized, map);
    model.assignment = assign(norm, model.centers_normalized);
    return model;
}

}
