#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include "pgkm/core.hpp"

namespace pgkm {

struct BaselineConfig {
    std::size_t max_resolution_iters = 100;
    /// Perturbation magnitude relative to the donor centroid's norm.
    double perturb_scale = 1e-6;

    void validate() const;
};

/// k centroids copied from k distinct, uniformly sampled blocks.
Codebook random_init(const WeightMatrix& w, std::size_t k, std::uint64_t seed);

/**
 * Mixed greedy/random empty-cluster heuristic. Each iteration takes the
 * lowest-index empty cluster, clones the most populous cluster's centroid into
 * it, pushes the pair apart by a small random vector e (donor − e, clone + e)
 * and reassigns. Returns the state with the fewest empty clusters seen.
 */
Resolution greedy_random_resolve(const Assigner& assigner, Codebook cb, Assignment a,
                                 const BaselineConfig& cfg, std::mt19937_64& rng);
Resolution greedy_random_resolve(const WeightMatrix& w, Codebook cb, Assignment a,
                                 const BaselineConfig& cfg, std::uint64_t seed);

/// Resolver owning its own generator seeded with `seed`.
Resolver baseline_resolver(const BaselineConfig& cfg, std::uint64_t seed);

}  // namespace pgkm
