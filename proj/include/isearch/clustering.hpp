#pragma once

#include <cstddef>
#include <vector>

#include "isearch/dataset.hpp"

namespace isearch {

/// Parameters of a subtractive clustering run. The radius is expressed in
/// normalized (unit hypercube) units and is the only knob without a
/// conventional default; 0.5 works well for census-style cohorts.
struct ClusterParams {
    double cluster_radius = 0.5;
    double quash_factor = 1.25;  // widens the kernel used when a center is removed
    double accept_ratio = 0.5;   // fraction of the first peak that accepts outright
    double reject_ratio = 0.15;  // fraction of the first peak that stops the search
    std::size_t max_centers = 0; // safety cap; 0 means "number of points"

    /// Throws ConfigError unless radius/quash > 0, ratios in (0,1) and
    /// reject_ratio < accept_ratio.
    void validate() const;
};

/// Mountain-function potentials for every point, updated as centers are
/// removed. `iteration` counts potential revisions (1 = initial).
struct PotentialState {
    std::vector<double> potentials;
    int iteration = 1;
    double first_center_potential = 0.0;
};

/// Accepted centers in acceptance order, as indices into the dataset.
struct SelectionResult {
    std::vector<std::size_t> center_indices;
    std::vector<double> center_potentials; // potential at the moment of acceptance
};

struct ClusterModel {
    Dataset centers_normalized;
    Dataset centers; // original units
    std::vector<std::size_t> center_indices;
    std::vector<std::size_t> assignment; // per input point, 0-based cluster
    NormalizationMap map;
    ClusterParams params;

    std::size_t cluster_count() const { return centers_normalized.size(); }
    std::vector<std::size_t> cluster_sizes() const;
};

/// Sum of unit-variance Gauss kernels between every pair of points, kernel
/// width cluster_radius/2. Each point's own contribution is 1, so every
/// potential is >= 1. Rows may be evaluated on several threads; each
/// potential is summed in a fixed order, so the split never changes the
/// result.
PotentialState initial_potentials(const Dataset& normalized,
                                  const ClusterParams& params,
                                  unsigned threads = 1);

/// Removes an accepted center's influence: subtracts its potential, spread
/// by a kernel widened by quash_factor, from every point. The center's own
/// potential becomes exactly 0. Potentials may go negative; they are never
/// clamped. Throws std::out_of_range on a bad index.
void subtract_center(PotentialState& state, std::size_t center_index,
                     const Dataset& normalized, const ClusterParams& params);

/// Center selection starting from a precomputed potential state. The first
/// center is the global potential peak; every later candidate (current peak)
/// is accepted outright above accept_ratio of the first peak, terminates the
/// search below reject_ratio of it, and otherwise must pass the distance/
/// potential trade-off test d_min/radius + P/P_first >= 1. A candidate that
/// fails the trade-off has its potential zeroed and the next-highest point is
/// retested within the same iteration. Scaling all potentials by a positive
/// constant leaves the accepted sequence unchanged.
SelectionResult select_centers_from(PotentialState state,
                                    const Dataset& normalized,
                                    const ClusterParams& params);

SelectionResult select_centers(const Dataset& normalized,
                               const ClusterParams& params,
                               unsigned threads = 1);

/// Nearest-center assignment by Euclidean distance; ties go to the lowest
/// center index.
std::vector<std::size_t> assign(const Dataset& normalized, const Dataset& centers);

/// Centers back in original units. Degenerate dimensions recover their
/// constant value.
Dataset denormalize_centers(const Dataset& centers, const NormalizationMap& map);

/// normalize -> select_centers -> assign -> denormalize in one call.
ClusterModel cluster(const Dataset& data, const ClusterParams& params,
                     unsigned threads = 1);

}
