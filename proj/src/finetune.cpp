#include "pgkm/finetune.hpp"

#include <algorithm>
#include <cmath>

#include "pgkm/preassign.hpp"

namespace pgkm {

void FinetuneConfig::validate() const {
    if (max_resolution_iters == 0) {
        throw UsageError("max_resolution_iters must be at least 1");
    }
    if (patience == 0) {
        throw UsageError("patience must be at least 1");
    }
}

double scaled_target(std::size_t n_ne, double s_avg) {
    if (n_ne == 0 || !(s_avg > 0.0)) {
        throw UsageError("scaled_target needs a non-empty cluster and positive s_avg");
    }
    const double n = static_cast<double>(n_ne);
    return std::max(n / std::sqrt(n / s_avg), s_avg);
}

SplitPlan plan_split(const Assignment& a, double threshold) {
    SplitPlan plan;
    const auto& sizes = a.sizes();
    for (std::size_t j = 0; j < sizes.size(); ++j) {
        if (sizes[j] == 0) {
            plan.slots.push_back(j);
        } else if (static_cast<double>(sizes[j]) > threshold) {
            plan.donor_clusters.emplace_back(j, sizes[j]);
        }
    }
    std::stable_sort(plan.donor_clusters.begin(), plan.donor_clusters.end(),
                     [](const auto& l, const auto& r) { return l.second > r.second; });
    for (const auto& [j, size] : plan.donor_clusters) {
        plan.slots.push_back(j);
        plan.n_reassigned += size;
    }
    if (!plan.slots.empty()) {
        plan.s_avg_reassigned = std::max(
            static_cast<double>(plan.n_reassigned) / static_cast<double>(plan.slots.size()), 1.0);
    }
    return plan;
}

Resolution resolve_empty_clusters(const Assigner& assigner, Codebook cb, Assignment a,
                                  const FinetuneConfig& cfg) {
    cfg.validate();
    const auto& w = assigner.matrix();
    const double threshold =
        static_cast<double>(w.rows()) / static_cast<double>(std::max<std::size_t>(cb.size(), 1));

    Resolution best{cb, a, {}};
    best.stats.entry_empty = a.empty_count();
    std::size_t best_empty = best.stats.entry_empty;
    std::size_t stale = 0;
    std::size_t iterations = 0;
    std::size_t unfilled_at_best = 0;
    std::vector<std::size_t> trajectory;

    while (a.empty_count() > 0 && iterations < cfg.max_resolution_iters) {
        const auto plan = plan_split(a, threshold);
        if (plan.donor_clusters.empty()) {
            break;
        }
        ++iterations;

        const auto members = a.members();
        PartitionSink sink({plan.s_avg_reassigned, true, plan.slots.size()});
        std::vector<std::size_t> reassigned;
        reassigned.reserve(plan.n_reassigned);
        for (const auto& [donor, size] : plan.donor_clusters) {
            const auto& blocks = members[donor];
            reassigned.insert(reassigned.end(), blocks.begin(), blocks.end());
            centroid_partitioning(w, blocks, scaled_target(size, plan.s_avg_reassigned), sink);
        }

        std::size_t filled = 0;
        for (const auto& piece : sink.pieces()) {
            cb.set_row(plan.slots[filled++], std::span<const float>(piece.centroid));
        }
        const auto pool = sink.uncovered(reassigned);
        if (!pool.empty()) {
            cb.set_row(plan.slots[filled++], std::span<const double>(block_mean(w, pool)));
        }
        const std::size_t unfilled = plan.slots.size() - filled;

        assigner.reassign(cb, plan.slots, a);
        const std::size_t empty = a.empty_count();
        trajectory.push_back(empty);
        if (empty < best_empty) {
            best_empty = empty;
            best.codebook = cb;
            best.assignment = a;
            unfilled_at_best = unfilled;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }

    best.stats.iterations = iterations;
    best.stats.exit_empty = best_empty;
    best.stats.empty_trajectory = std::move(trajectory);
    best.stats.unfilled_slots = unfilled_at_best;
    return best;
}

Resolution resolve_empty_clusters(const WeightMatrix& w, Codebook cb, Assignment a,
                                  const FinetuneConfig& cfg) {
    Assigner assigner(w);
    return resolve_empty_clusters(assigner, std::move(cb), std::move(a), cfg);
}

Resolver finetune_resolver(const FinetuneConfig& cfg) {
    cfg.validate();
    return [cfg](const Assigner& assigner, Codebook cb, Assignment a) {
        return resolve_empty_clusters(assigner, std::move(cb), std::move(a), cfg);
    };
}

}  // namespace pgkm
