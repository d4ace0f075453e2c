#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pgkm/core.hpp"

namespace pgkm {

struct ConsolidationConfig {
    /// Initial epsilon; derived from the data when unset (see default_epsilon).
    std::optional<double> epsilon;
    /// Shrink factor applied when too few consolidated weights remain.
    double c_sd = 0.8;
    /// Consolidated weights must number at least c_mc * k.
    double c_mc = 2.0;
    /// Seeds the anchor choice and the epsilon sample.
    std::uint64_t seed = 0;

    void validate() const;
};

/// Consolidated matrix plus, for each representative row, the original blocks it stands for.
struct DenseClusterMap {
    WeightMatrix representatives;
    std::vector<std::vector<std::size_t>> origin;

    std::size_t original_size() const;
    bool is_identity() const;
};

DenseClusterMap identity_map(const WeightMatrix& w);

struct PotentialClusters {
    std::vector<std::vector<std::size_t>> potential;
    std::vector<std::size_t> independent;
};

/**
 * Sorts `subset` by distance to its first block and cuts the sorted list into
 * runs whose distances stay within eps of the run's first entry. Runs of two
 * or more blocks are potential dense clusters; single blocks are independent.
 */
PotentialClusters identify_potential(const WeightMatrix& w, std::span<const std::size_t> subset,
                                     double eps);

struct DenseCluster {
    /// The confirming candidate block; every member lies within eps of it.
    std::size_t candidate;
    std::vector<std::size_t> members;
};

struct DenseClusters {
    std::vector<DenseCluster> confirmed;
    std::vector<std::size_t> independent;
    /// Groups dissolved because the recursion depth cap was hit.
    std::size_t dissolved = 0;
};

inline constexpr std::size_t kMaxDenseDepth = 64;

/**
 * Recursive refinement of potential clusters. The first potential cluster is
 * confirmed when it holds the anchor (its members within eps of the anchor).
 * Every other potential cluster is re-anchored on its own first block and
 * re-partitioned, until each block is confirmed or independent.
 */
void generate_dense(const WeightMatrix& w, double eps, std::size_t anchor,
                    const std::vector<std::vector<std::size_t>>& potentials, DenseClusters& out,
                    std::size_t depth = 0);

/// One identification pass over `order`, anchored at order[0].
DenseClusters identify_dense(const WeightMatrix& w, double eps, std::span<const std::size_t> order);

/// Epsilon update rule: shrink by c_sd while n_cw < n_c * c_mc, else keep.
double epsilon_update(double eps, std::size_t n_c, std::size_t n_cw, double c_sd, double c_mc);

struct EpsilonSchedule {
    double epsilon = 0.0;
    std::size_t shrinks = 0;
    bool hit_floor = false;
    /// n_cw observed at each evaluated epsilon.
    std::vector<std::size_t> counts;
};

/// Drives the epsilon loop; `count(eps)` returns the consolidated weight count.
/// Stops once the count is large enough or epsilon would fall below 2^-24 * eps0.
EpsilonSchedule run_epsilon_schedule(double eps0, std::size_t k, double c_sd, double c_mc,
                                     const std::function<std::size_t(double)>& count);

/// 0.25 x mean nearest-neighbour distance within a seeded sample of min(n, 1024) blocks.
double default_epsilon(const WeightMatrix& w, std::uint64_t seed);

struct ConsolidationResult {
    DenseClusterMap map;
    double initial_epsilon = 0.0;
    double epsilon = 0.0;
    std::size_t shrinks = 0;
    std::size_t dense_clusters = 0;
    /// Set when no epsilon could satisfy the count requirement and the identity map was used.
    bool identity_fallback = false;
};

ConsolidationResult consolidate(const WeightMatrix& w, std::size_t k,
                                const ConsolidationConfig& cfg = {});

/// Gives every original block the centroid index of its representative.
Assignment expand(const DenseClusterMap& map, const Assignment& consolidated);

}  // namespace pgkm
