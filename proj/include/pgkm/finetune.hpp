#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "pgkm/core.hpp"

namespace pgkm {

struct FinetuneConfig {
    std::size_t max_resolution_iters = 15;
    /// Consecutive iterations without a drop in the empty count before giving up.
    std::size_t patience = 3;

    void validate() const;
};

/// Clusters chosen for splitting in one resolution iteration.
struct SplitPlan {
    /// (centroid index, cluster size), largest first.
    std::vector<std::pair<std::size_t, std::size_t>> donor_clusters;
    /// Empty slots followed by donor slots; the order in which they are refilled.
    std::vector<std::size_t> slots;
    std::size_t n_reassigned = 0;
    double s_avg_reassigned = 1.0;
};

/// Sub-cluster target size when splitting a cluster of n_ne blocks:
/// max(n_ne / sqrt(n_ne / s_avg), s_avg).
double scaled_target(std::size_t n_ne, double s_avg);

/// Donors are clusters strictly larger than `threshold` (the layer-wide n/k).
SplitPlan plan_split(const Assignment& a, double threshold);

/**
 * Partitioning-guided empty-cluster resolution. Each iteration frees the empty
 * slots and the slots of every oversized cluster, re-partitions the oversized
 * clusters (largest first) into the freed slots with a size-scaled target,
 * pools whatever was not covered into the last freed slot, and reassigns.
 * Returns the state with the fewest empty clusters seen.
 */
Resolution resolve_empty_clusters(const Assigner& assigner, Codebook cb, Assignment a,
                                  const FinetuneConfig& cfg = {});
Resolution resolve_empty_clusters(const WeightMatrix& w, Codebook cb, Assignment a,
                                  const FinetuneConfig& cfg = {});

Resolver finetune_resolver(const FinetuneConfig& cfg = {});

}  // namespace pgkm
