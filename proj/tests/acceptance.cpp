// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pgkm/bench.hpp"
#include "pgkm/dense.hpp"
#include "pgkm/finetune.hpp"
#include "pgkm/formats.hpp"
#include "pgkm/preassign.hpp"
#include "support.hpp"

using namespace pgkm;
using namespace pgkm::testing;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

const bench::Family kFamilies[] = {bench::Family::gaussian_mixture, bench::Family::dense_clumps,
                                   bench::Family::uniform, bench::Family::skewed_mass,
                                   bench::Family::duplicate_heavy};

bench::SyntheticSpec synth(bench::Family f, std::size_t n, std::size_t b, std::uint64_t seed) {
    bench::SyntheticSpec s;
    s.family = f;
    s.n = n;
    s.b = b;
    s.seed = seed;
    return s;
}

// Every Lloyd run collected by the head-to-head criteria, for the monotonicity check.
std::vector<IterationStats> g_lloyd_runs;

void collect_runs(const std::vector<bench::HeadToHeadResult>& results) {
    for (const auto& r : results) {
        for (const auto& m : r.runs) {
            if (m.ok) g_lloyd_runs.push_back(m.stats);
        }
    }
}

Outcome a1() {
    const auto start = Clock::now();
    std::mt19937_64 rng(20240601);
    const std::size_t ks[] = {64, 256, 768};
    const std::size_t bs[] = {1, 2, 4, 8};
    std::size_t instances = 0, applicable = 0, failures = 0;
    while (applicable < 400 && instances < 2000) {
        const std::size_t k = ks[rng() % 3];
        const std::size_t b = bs[rng() % 4];
        const auto family = kFamilies[rng() % 5];
        // log-uniform n in [k, 64k]
        const double lo = std::log(static_cast<double>(k)), hi = std::log(65536.0);
        const auto n = static_cast<std::size_t>(
            std::exp(lo + (hi - lo) * std::uniform_real_distribution<double>(0, 1)(rng)));
        auto s = synth(family, std::max(n, k), b, rng());
        if (family == bench::Family::dense_clumps) s.components = 1 + rng() % 2048;
        auto w = bench::generate(s);
        ++instances;
        if (count_distinct(w) < k) continue;
        ++applicable;
        const auto a = assign(w, preassign(w, k));
        if (a.empty_count() != 0) {
            ++failures;
            std::fprintf(stderr, "A1: %s n=%zu b=%zu k=%zu seed=%llu -> %zu empty\n",
                         std::string(bench::to_string(family)).c_str(), s.n, b, k,
                         static_cast<unsigned long long>(s.seed), a.empty_count());
        }
    }
    const double secs = seconds_since(start);
    Outcome o;
    o.pass = failures == 0 && applicable >= 200 && secs <= 300.0;
    o.detail = fmt("%zu instances, %zu with >= k distinct blocks, %zu with empty clusters, %.1f s",
                   instances, applicable, failures, secs);
    return o;
}

Outcome a2() {
    const double v1 = scaled_target(48, 12.0), v2 = scaled_target(12, 12.0),
                 v3 = scaled_target(1200, 12.0);
    Outcome o;
    o.pass = std::abs(v1 - 24) <= 1e-9 && std::abs(v2 - 12) <= 1e-9 && std::abs(v3 - 120) <= 1e-9;
    o.detail = fmt("scaled_target: %.12g, %.12g, %.12g", v1, v2, v3);
    return o;
}

Outcome a3() {
    const double shrunk = epsilon_update(0.1, 100, 150, 0.8, 2.0);
    const double kept = epsilon_update(0.1, 100, 200, 0.8, 2.0);
    // Full loop with forced counts: 150 then 200.
    std::size_t calls = 0;
    auto forced = run_epsilon_schedule(0.1, 100, 0.8, 2.0, [&](double) {
        return ++calls == 1 ? std::size_t{150} : std::size_t{200};
    });
    auto immediate = run_epsilon_schedule(0.1, 100, 0.8, 2.0, [](double) { return std::size_t{200}; });
    Outcome o;
    o.pass = std::abs(shrunk - 0.08) <= 1e-12 && kept == 0.1 && forced.shrinks == 1 &&
             std::abs(forced.epsilon - 0.08) <= 1e-12 && calls == 2 && immediate.shrinks == 0 &&
             immediate.epsilon == 0.1 && immediate.counts.size() == 1;
    o.detail = fmt("n_cw=150 -> eps %.15g; n_cw=200 -> eps %.15g; loop: %zu shrink(s), %zu evaluation(s)",
                   shrunk, kept, forced.shrinks, calls);
    return o;
}

WeightMatrix ring_instance(std::size_t count) {
    std::vector<std::vector<float>> rows{{0.0f, 0.0f}};
    for (std::size_t i = 0; i < count; ++i) {
        const double t = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(count);
        rows.push_back({static_cast<float>(std::cos(t)), static_cast<float>(std::sin(t))});
    }
    return WeightMatrix(rows);
}

Outcome a4() {
    std::mt19937_64 rng(77);
    std::size_t runs = 0, clusters = 0, violations = 0;
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        auto s = synth(bench::Family::dense_clumps, 1000 + rng() % 9000, std::size_t{1} << (rng() % 4), seed);
        s.components = 2 + rng() % 500;
        s.radius = std::pow(10.0, -1.0 - static_cast<double>(rng() % 3));
        auto w = bench::generate(s);
        // Epsilon anywhere from below the clump radius to past the separation.
        const double eps = s.radius * std::exp(std::uniform_real_distribution<double>(std::log(0.5), std::log(150.0))(rng));
        std::vector<std::size_t> order(w.rows());
        std::iota(order.begin(), order.end(), std::size_t{0});
        auto found = identify_dense(w, eps, order);
        ++runs;
        for (const auto& c : found.confirmed) {
            ++clusters;
            const auto cand = w.row(c.candidate);
            for (std::size_t i = 0; i < c.members.size(); ++i) {
                const auto mi = w.row(c.members[i]);
                if (!(std::sqrt(naive_sq(cand, mi)) < eps)) ++violations;
                for (std::size_t j = i + 1; j < c.members.size(); ++j) {
                    if (!(std::sqrt(naive_sq(mi, w.row(c.members[j]))) < 2.0 * eps)) ++violations;
                }
            }
        }
    }
    std::size_t ring_confirmed = 0;
    for (std::size_t count : {6, 12, 50, 200}) {
        auto w = ring_instance(count);
        std::vector<std::size_t> order(w.rows());
        std::iota(order.begin(), order.end(), std::size_t{0});
        const double chord = 2.0 * std::sin(M_PI / static_cast<double>(count));
        ring_confirmed += identify_dense(w, 0.5 * chord, order).confirmed.size();
    }
    Outcome o;
    o.pass = violations == 0 && ring_confirmed == 0 && runs >= 50;
    o.detail = fmt("%zu seeded runs, %zu confirmed clusters, %zu violations; ring instances confirmed %zu",
                   runs, clusters, violations, ring_confirmed);
    return o;
}

struct AdversarialResults {
    std::vector<bench::HeadToHeadResult> results;
    double seconds = 0.0;
};

AdversarialResults run_adversarial() {
    bench::SuiteConfig cfg;
    for (auto f : {bench::Family::duplicate_heavy, bench::Family::skewed_mass}) {
        cfg.instances.push_back({std::string(bench::to_string(f)), synth(f, 50000, 4, 0), 512});
    }
    cfg.methods = {Method::baseline, Method::pg};
    for (std::uint64_t s = 0; s < 50; ++s) cfg.seeds.push_back(s);
    const auto start = Clock::now();
    AdversarialResults out;
    out.results = bench::run_suite(cfg);
    out.seconds = seconds_since(start);
    collect_runs(out.results);
    return out;
}

Outcome a5(const AdversarialResults& adv) {
    Outcome o;
    std::ostringstream d;
    std::size_t failed_runs = 0;
    for (const char* family : {"duplicate_heavy", "skewed_mass"}) {
        std::vector<double> base, pg;
        std::size_t pg_zero = 0;
        for (const auto& r : adv.results) {
            if (r.label != family) continue;
            if (!r.ok()) {
                ++failed_runs;
                continue;
            }
            base.push_back(static_cast<double>(r.runs[0].report.empty_clusters));
            pg.push_back(static_cast<double>(r.runs[1].report.empty_clusters));
            pg_zero += r.runs[1].report.empty_clusters == 0;
        }
        const double mb = mean(base), mp = mean(pg);
        const double zero_frac = pg.empty() ? 0.0 : static_cast<double>(pg_zero) / static_cast<double>(pg.size());
        bool ok = pg.size() >= 50;
        if (mb > 10.0) {
            ok = ok && mp * 10.0 <= mb && zero_frac >= 0.9;
        }
        o.pass = o.pass && ok;
        d << family << ": " << pg.size() << " pairs, baseline mean empty " << fmt("%.2f", mb)
          << ", pg mean empty " << fmt("%.3f", mp) << ", pg zero-empty " << fmt("%.0f%%", 100 * zero_frac)
          << "; ";
    }
    o.pass = o.pass && failed_runs == 0 && adv.seconds <= 900.0;
    d << fmt("%.1f s", adv.seconds);
    o.detail = d.str();
    return o;
}

Outcome a6(const AdversarialResults& adv) {
    Outcome o;
    std::ostringstream d;
    for (const char* family : {"duplicate_heavy", "skewed_mass"}) {
        std::vector<double> pg_iters, ratios, wall_ratios;
        for (const auto& r : adv.results) {
            if (r.label != family || !r.ok()) continue;
            pg_iters.push_back(static_cast<double>(r.runs[1].report.resolution_iters));
            ratios.push_back(r.deltas.at(0).resolution_iter_ratio);
            wall_ratios.push_back(r.deltas.at(0).wall_time_ratio);
        }
        const double mi = median(pg_iters), mr = median(ratios);
        o.pass = o.pass && !pg_iters.empty() && mi <= 10.0 && mr >= 4.0;
        d << family << ": median pg resolution iters " << fmt("%.1f", mi) << ", median ratio "
          << fmt("%.1f", mr) << ", median wall-time ratio " << fmt("%.2f", median(wall_ratios)) << "; ";
    }
    o.detail = d.str();
    return o;
}

Outcome a7() {
    auto cfg = bench::default_suite();
    std::erase_if(cfg.instances, [](const bench::Instance& i) {
        return i.synth.family != bench::Family::gaussian_mixture;
    });
    cfg.methods = {Method::baseline, Method::pg, Method::pg_full};
    cfg.seeds.clear();
    for (std::uint64_t s = 0; s < 50; ++s) cfg.seeds.push_back(s);
    const auto results = bench::run_suite(cfg);
    collect_runs(results);
    std::size_t pairs = 0, wins = 0;
    std::vector<double> mse_base, mse_pg, mse_full;
    for (const auto& r : results) {
        if (!r.ok()) continue;
        ++pairs;
        const double b = r.runs[0].report.mse, p = r.runs[1].report.mse, f = r.runs[2].report.mse;
        wins += f <= b;
        mse_base.push_back(b);
        mse_pg.push_back(p);
        mse_full.push_back(f);
    }
    const double frac = pairs ? static_cast<double>(wins) / static_cast<double>(pairs) : 0.0;
    Outcome o;
    o.pass = pairs >= 50 && pairs == results.size() && frac >= 0.8 && mean(mse_full) <= mean(mse_pg);
    o.detail = fmt("%zu pairs on %zu instance(s); pg_full <= baseline in %.0f%%; mean mse baseline %.6g, pg %.6g, pg_full %.6g",
                   pairs, cfg.instances.size(), 100 * frac, mean(mse_base), mean(mse_pg), mean(mse_full));
    return o;
}

// Block (i) of a reshaped tensor covers rows [r*b, r*b+b) of column c.
double oracle_mse(const Tensor& t, const QuantizedLayer& q) {
    const std::size_t b = q.spec.block_size, per_col = t.rows / b;
    double s = 0.0;
    for (std::size_t i = 0; i < q.assignment.size(); ++i) {
        const std::size_t c = i / per_col, r = i % per_col;
        const auto cent = q.codebook.row(q.assignment[i]);
        for (std::size_t d = 0; d < b; ++d) {
            const double e = static_cast<double>(t.at(r * b + d, c)) - cent[d];
            s += e * e;
        }
    }
    return s / static_cast<double>(t.values.size());
}

Outcome a8() {
    std::mt19937_64 rng(8);
    std::size_t assign_cases = 0, assign_fail = 0;
    for (int t = 0; t < 300; ++t) {
        const std::size_t n = 1 + rng() % 1000;
        const std::size_t b = std::size_t{1} << (rng() % 4);
        const std::size_t k = 1 + rng() % std::min<std::size_t>(n, 300);
        auto w = bench::generate(synth(kFamilies[rng() % 5], n, b, rng()));
        Assigner assigner(w);
        std::vector<Codebook> books{random_codebook(k, b, rng())};
        if (assigner.distinct_blocks() >= k) books.push_back(preassign(w, k));
        for (auto& cb : books) {
            ++assign_cases;
            auto a = assigner.assign(cb);
            assign_fail += a.index() != brute_assign(w, cb);
            assign_fail += assign(w, cb).index() != brute_assign(w, cb);
            // Move a few centroids and refresh incrementally.
            std::vector<std::size_t> changed;
            for (std::size_t j = 0; j < k; ++j) {
                if (rng() % 5 == 0) {
                    changed.push_back(j);
                    cb.set_row(j, w.row(rng() % n));
                }
            }
            assigner.reassign(cb, changed, a);
            ++assign_cases;
            assign_fail += a.index() != brute_assign(w, cb);
        }
    }

    std::size_t layers = 0, roundtrip_fail = 0, mse_fail = 0;
    double worst_rel = 0.0;
    for (int t = 0; t < 90; ++t) {
        const std::size_t b = std::size_t{1} << (rng() % 4);
        const std::size_t rows = b * (1 + rng() % 32);
        const std::size_t cols = 1 + rng() % 64;
        auto m = random_matrix(rows * cols, 1, rng(), 0.1);
        Tensor tensor{rows, cols, m.values()};
        const std::size_t n = rows / b * cols;
        roundtrip_fail += !(blocks_to_tensor(reshape_to_blocks(tensor, b), rows, cols) == tensor);

        TensorFile tf{"layer" + std::to_string(t), t % 2 ? LayerKind::linear : LayerKind::embedding, tensor};
        const auto wbytes = serialize_tensor(tf);
        const auto tf2 = parse_tensor(wbytes);
        roundtrip_fail += !(tf2 == tf) || serialize_tensor(tf2) != wbytes;

        LayerSpec spec{tf.name, tf.kind, rows, cols, b, 1 + rng() % std::min<std::size_t>(n, 128)};
        QuantizeOptions opts;
        opts.method = static_cast<Method>(t % 3);
        opts.seed = rng();
        auto q = quantize_layer(tensor, spec, opts);
        ++layers;
        const auto qbytes = serialize_quantized(q);
        const auto q2 = parse_quantized(qbytes);
        roundtrip_fail += !(q2.codebook == q.codebook) || !(q2.assignment == q.assignment) ||
                          serialize_quantized(q2) != qbytes || !(dequantize(q2) == dequantize(q));
        const double truth = oracle_mse(tensor, q);
        const double rel = truth == 0.0 ? std::abs(q2.report.mse) : std::abs(q2.report.mse - truth) / truth;
        worst_rel = std::max(worst_rel, rel);
        mse_fail += !(rel <= 1e-6);
    }
    Outcome o;
    o.pass = assign_fail == 0 && roundtrip_fail == 0 && mse_fail == 0;
    o.detail = fmt("assignment %zu/%zu match brute force; %zu layers, %zu round-trip mismatches, "
                   "worst relative mse error %.2e",
                   assign_cases - assign_fail, assign_cases, layers, roundtrip_fail, worst_rel);
    return o;
}

Outcome a9() {
    // Broader sweep on top of the runs collected by A5 and A7.
    bench::SuiteConfig cfg;
    std::mt19937_64 rng(9);
    for (auto f : kFamilies) {
        for (std::size_t b : {1, 2, 4, 8}) {
            auto s = synth(f, 3000 + rng() % 7000, b, 0);
            if (f == bench::Family::dense_clumps) s.components = 512;
            cfg.instances.push_back({std::string(bench::to_string(f)) + "_b" + std::to_string(b), s,
                                     b == 1 ? std::size_t{64} : std::size_t{256}});
        }
    }
    cfg.methods = {Method::baseline, Method::pg, Method::pg_full};
    cfg.seeds = {0, 1, 2};
    collect_runs(bench::run_suite(cfg));

    std::size_t eligible = 0, violating = 0;
    for (const auto& s : g_lloyd_runs) {
        if (s.any_intervention()) continue;
        ++eligible;
        for (std::size_t i = 1; i < s.iterations.size(); ++i) {
            if (s.iterations[i].objective > s.iterations[i - 1].objective) {
                ++violating;
                break;
            }
        }
    }
    Outcome o;
    o.pass = eligible > 0 && violating == 0;
    o.detail = fmt("%zu Lloyd runs, %zu without resolver intervention, %zu with an objective increase",
                   g_lloyd_runs.size(), eligible, violating);
    return o;
}

}  // namespace

int main() {
    bool all = true;
    auto report = [&](const char* id, const Outcome& o) {
        std::printf("%s %s  %s\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str());
        std::fflush(stdout);
        all = all && o.pass;
    };
    report("A1", a1());
    report("A2", a2());
    report("A3", a3());
    report("A4", a4());
    const auto adv = run_adversarial();
    report("A5", a5(adv));
    report("A6", a6(adv));
    report("A7", a7());
    report("A8", a8());
    report("A9", a9());
    return all ? 0 : 1;
}
