#include "pgkm/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pgkm {

void BaselineConfig::validate() const {
    if (max_resolution_iters == 0) {
        throw UsageError("max_resolution_iters must be at least 1");
    }
    if (!(perturb_scale > 0.0)) {
        throw UsageError("perturb_scale must be positive");
    }
}

Codebook random_init(const WeightMatrix& w, std::size_t k, std::uint64_t seed) {
    const std::size_t n = w.rows();
    if (k == 0) {
        throw UsageError("number of centroids must be at least 1");
    }
    if (n < k) {
        throw UsageError("more centroids than blocks: k=" + std::to_string(k) +
                         ", n=" + std::to_string(n));
    }
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Partial Fisher-Yates: the first k entries are a uniform sample without replacement.
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(order[i], order[pick(rng)]);
    }
    Codebook cb(k, w.dim());
    for (std::size_t j = 0; j < k; ++j) {
        cb.set_row(j, w.row(order[j]));
    }
    return cb;
}

Resolution greedy_random_resolve(const Assigner& assigner, Codebook cb, Assignment a,
                                 const BaselineConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    const std::size_t b = cb.dim();
    Resolution best{cb, a, {}};
    best.stats.entry_empty = a.empty_count();
    std::size_t best_empty = best.stats.entry_empty;
    std::size_t iterations = 0;
    std::vector<std::size_t> trajectory;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> noise(b);

    while (iterations < cfg.max_resolution_iters) {
        const auto& sizes = a.sizes();
        const auto empty = std::find(sizes.begin(), sizes.end(), std::size_t{0});
        if (empty == sizes.end()) {
            break;
        }
        ++iterations;
        const auto target = static_cast<std::size_t>(empty - sizes.begin());
        const auto donor = static_cast<std::size_t>(
            std::max_element(sizes.begin(), sizes.end()) - sizes.begin());

        auto donor_row = cb.row(donor);
        double norm = 0.0;
        for (float v : donor_row) {
            norm += static_cast<double>(v) * v;
        }
        norm = std::sqrt(norm);
        const double bound = cfg.perturb_scale * norm;
        const double sigma = bound / std::sqrt(static_cast<double>(b));
        for (auto& e : noise) {
            e = std::clamp(normal(rng) * sigma, -bound, bound);
        }

        auto target_row = cb.row(target);
        for (std::size_t d = 0; d < b; ++d) {
            const double base = donor_row[d];
            target_row[d] = static_cast<float>(base + noise[d]);
            donor_row[d] = static_cast<float>(base - noise[d]);
        }
        const std::size_t changed[] = {std::min(target, donor), std::max(target, donor)};
        assigner.reassign(cb, changed, a);

        const std::size_t now = a.empty_count();
        trajectory.push_back(now);
        if (now < best_empty) {
            best_empty = now;
            best.codebook = cb;
            best.assignment = a;
        }
    }

    best.stats.iterations = iterations;
    best.stats.exit_empty = best_empty;
    best.stats.empty_trajectory = std::move(trajectory);
    return best;
}

Resolution greedy_random_resolve(const WeightMatrix& w, Codebook cb, Assignment a,
                                 const BaselineConfig& cfg, std::uint64_t seed) {
    Assigner assigner(w);
    std::mt19937_64 rng(seed);
    return greedy_random_resolve(assigner, std::move(cb), std::move(a), cfg, rng);
}

Resolver baseline_resolver(const BaselineConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    return [cfg, rng = std::mt19937_64(seed)](const Assigner& assigner, Codebook cb,
                                              Assignment a) mutable {
        return greedy_random_resolve(assigner, std::move(cb), std::move(a), cfg, rng);
    };
}

}  // namespace pgkm
