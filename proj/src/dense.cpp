#include "pgkm/dense.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace pgkm {

void ConsolidationConfig::validate() const {
    if (epsilon && !(*epsilon > 0.0)) {
        throw UsageError("epsilon must be positive");
    }
    if (!(c_sd > 0.0 && c_sd < 1.0)) {
        throw UsageError("c_sd must lie in (0, 1)");
    }
    if (!(c_mc >= 1.0)) {
        throw UsageError("c_mc must be at least 1");
    }
}

std::size_t DenseClusterMap::original_size() const {
    std::size_t n = 0;
    for (const auto& o : origin) {
        n += o.size();
    }
    return n;
}

bool DenseClusterMap::is_identity() const {
    for (std::size_t r = 0; r < origin.size(); ++r) {
        if (origin[r].size() != 1 || origin[r][0] != r) {
            return false;
        }
    }
    return true;
}

DenseClusterMap identity_map(const WeightMatrix& w) {
    DenseClusterMap map{w, {}};
    map.origin.resize(w.rows());
    for (std::size_t i = 0; i < w.rows(); ++i) {
        map.origin[i] = {i};
    }
    return map;
}

PotentialClusters identify_potential(const WeightMatrix& w, std::span<const std::size_t> subset,
                                     double eps) {
    PotentialClusters out;
    if (subset.empty()) {
        return out;
    }
    const auto map = build_distance_map(w, subset, w.row(subset.front()));
    const auto& m = map.entries;
    auto close_run = [&](std::size_t s, std::size_t i) {
        if (i - s > 1) {
            std::vector<std::size_t> run;
            run.reserve(i - s);
            for (std::size_t j = s; j < i; ++j) {
                run.push_back(m[j].block);
            }
            out.potential.push_back(std::move(run));
        } else {
            out.independent.push_back(m[s].block);
        }
    };
    std::size_t s = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i].distance - m[s].distance > eps) {
            close_run(s, i);
            s = i;
        }
    }
    close_run(s, m.size());
    return out;
}

void generate_dense(const WeightMatrix& w, double eps, std::size_t anchor,
                    const std::vector<std::vector<std::size_t>>& potentials, DenseClusters& out,
                    std::size_t depth) {
    std::size_t first = 0;
    if (!potentials.empty()) {
        const auto& head = potentials.front();
        if (std::find(head.begin(), head.end(), anchor) != head.end()) {
            first = 1;
            DenseCluster cluster{anchor, {}};
            for (auto i : head) {
                if (i == anchor || euclidean(w.row(anchor), w.row(i)) < eps) {
                    cluster.members.push_back(i);
                } else {
                    out.independent.push_back(i);
                }
            }
            if (cluster.members.size() > 1) {
                std::sort(cluster.members.begin(), cluster.members.end());
                out.confirmed.push_back(std::move(cluster));
            } else {
                out.independent.push_back(anchor);
            }
        }
    }
    for (std::size_t p = first; p < potentials.size(); ++p) {
        const auto& group = potentials[p];
        auto sub = identify_potential(w, group, eps);
        out.independent.insert(out.independent.end(), sub.independent.begin(),
                               sub.independent.end());
        if (sub.potential.empty()) {
            continue;
        }
        if (depth + 1 >= kMaxDenseDepth) {
            log_warning("dense-cluster recursion depth cap reached; dissolving " +
                        std::to_string(sub.potential.size()) + " groups into independent weights");
            for (const auto& g : sub.potential) {
                out.independent.insert(out.independent.end(), g.begin(), g.end());
                ++out.dissolved;
            }
            continue;
        }
        generate_dense(w, eps, group.front(), sub.potential, out, depth + 1);
    }
}

DenseClusters identify_dense(const WeightMatrix& w, double eps, std::span<const std::size_t> order) {
    DenseClusters out;
    if (order.empty()) {
        return out;
    }
    auto top = identify_potential(w, order, eps);
    out.independent = std::move(top.independent);
    generate_dense(w, eps, order.front(), top.potential, out, 0);
    return out;
}

double epsilon_update(double eps, std::size_t n_c, std::size_t n_cw, double c_sd, double c_mc) {
    if (static_cast<double>(n_cw) < static_cast<double>(n_c) * c_mc) {
        return eps * c_sd;
    }
    return eps;
}

EpsilonSchedule run_epsilon_schedule(double eps0, std::size_t k, double c_sd, double c_mc,
                                     const std::function<std::size_t(double)>& count) {
    const double floor = std::ldexp(eps0, -24);
    EpsilonSchedule schedule;
    schedule.epsilon = eps0;
    while (true) {
        const std::size_t n_cw = count(schedule.epsilon);
        schedule.counts.push_back(n_cw);
        const double next = epsilon_update(schedule.epsilon, k, n_cw, c_sd, c_mc);
        if (next == schedule.epsilon) {
            break;
        }
        if (next < floor) {
            schedule.hit_floor = true;
            break;
        }
        schedule.epsilon = next;
        ++schedule.shrinks;
    }
    return schedule;
}

double default_epsilon(const WeightMatrix& w, std::uint64_t seed) {
    const std::size_t n = w.rows();
    const std::size_t m = std::min<std::size_t>(n, 1024);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(order[i], order[pick(rng)]);
    }
    if (m < 2) {
        return 1e-6;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double nearest = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m; ++j) {
            if (i != j) {
                nearest = std::min(nearest, squared_euclidean(w.row(order[i]), w.row(order[j])));
            }
        }
        total += std::sqrt(nearest);
    }
    const double eps = 0.25 * total / static_cast<double>(m);
    // An all-duplicate sample gives zero; keep epsilon positive.
    return eps > 0.0 ? eps : 1e-6;
}

namespace {

DenseClusterMap build_map(const WeightMatrix& w, const DenseClusters& found) {
    std::vector<std::vector<std::size_t>> groups;
    groups.reserve(found.confirmed.size() + found.independent.size());
    for (const auto& c : found.confirmed) {
        groups.push_back(c.members);
    }
    for (auto i : found.independent) {
        groups.push_back({i});
    }
    std::sort(groups.begin(), groups.end(),
              [](const auto& l, const auto& r) { return l.front() < r.front(); });

    std::vector<float> values;
    values.reserve(groups.size() * w.dim());
    for (const auto& g : groups) {
        if (g.size() == 1) {
            auto r = w.row(g.front());
            values.insert(values.end(), r.begin(), r.end());
        } else {
            for (double v : block_mean(w, g)) {
                values.push_back(static_cast<float>(v));
            }
        }
    }
    return {WeightMatrix(groups.size(), w.dim(), std::move(values)), std::move(groups)};
}

}  // namespace

ConsolidationResult consolidate(const WeightMatrix& w, std::size_t k,
                                const ConsolidationConfig& cfg) {
    cfg.validate();
    const std::size_t n = w.rows();
    if (n == 0) {
        throw UsageError("cannot consolidate an empty matrix");
    }
    ConsolidationResult result;
    result.initial_epsilon = cfg.epsilon ? *cfg.epsilon : default_epsilon(w, cfg.seed);
    result.epsilon = result.initial_epsilon;
    if (static_cast<double>(n) < static_cast<double>(k) * cfg.c_mc) {
        result.map = identity_map(w);
        result.identity_fallback = true;
        return result;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    DenseClusters last;
    auto schedule = run_epsilon_schedule(result.initial_epsilon, k, cfg.c_sd, cfg.c_mc,
                                         [&](double eps) {
                                             last = identify_dense(w, eps, order);
                                             return last.confirmed.size() + last.independent.size();
                                         });
    result.epsilon = schedule.epsilon;
    result.shrinks = schedule.shrinks;
    const std::size_t n_cw = last.confirmed.size() + last.independent.size();
    if (n_cw < k) {
        result.map = identity_map(w);
        result.identity_fallback = true;
        return result;
    }
    result.dense_clusters = last.confirmed.size();
    result.map = build_map(w, last);
    return result;
}

Assignment expand(const DenseClusterMap& map, const Assignment& consolidated) {
    if (consolidated.size() != map.origin.size()) {
        throw UsageError("assignment covers " + std::to_string(consolidated.size()) +
                         " rows but the map has " + std::to_string(map.origin.size()));
    }
    std::vector<std::uint32_t> index(map.original_size());
    for (std::size_t r = 0; r < map.origin.size(); ++r) {
        for (auto i : map.origin[r]) {
            index[i] = consolidated[r];
        }
    }
    return Assignment(std::move(index), consolidated.num_clusters());
}

}  // namespace pgkm
