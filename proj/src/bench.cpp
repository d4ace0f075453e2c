#include "pgkm/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "pgkm/formats.hpp"

namespace pgkm::bench {

using nlohmann::json;

std::string_view to_string(Family f) {
    switch (f) {
        case Family::gaussian_mixture:
            return "gaussian_mixture";
        case Family::dense_clumps:
            return "dense_clumps";
        case Family::uniform:
            return "uniform";
        case Family::skewed_mass:
            return "skewed_mass";
        case Family::duplicate_heavy:
            return "duplicate_heavy";
    }
    return "unknown";
}

Family parse_family(std::string_view text) {
    for (auto f : {Family::gaussian_mixture, Family::dense_clumps, Family::uniform,
                   Family::skewed_mass, Family::duplicate_heavy}) {
        if (to_string(f) == text) {
            return f;
        }
    }
    throw UsageError("unknown family '" + std::string(text) + "'");
}

void SyntheticSpec::validate() const {
    if (n == 0 || b == 0) {
        throw UsageError("synthetic spec needs n >= 1 and b >= 1");
    }
    if (components == 0) {
        throw UsageError("synthetic spec needs at least one component");
    }
    if (!(sigma > 0.0) || !(radius > 0.0)) {
        throw UsageError("sigma and radius must be positive");
    }
    if (separation && !(*separation > 0.0)) {
        throw UsageError("separation must be positive");
    }
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw UsageError("fraction must lie in [0, 1]");
    }
    if (prototypes == 0) {
        throw UsageError("duplicate pool needs at least one prototype");
    }
}

namespace {

std::vector<double> unit_ball_point(std::size_t b, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit;
    std::vector<double> x(b);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (auto& v : x) {
            v = normal(rng);
            norm += v * v;
        }
    } while (norm == 0.0);
    const double r = std::pow(unit(rng), 1.0 / static_cast<double>(b)) / std::sqrt(norm);
    for (auto& v : x) {
        v *= r;
    }
    return x;
}

double laplace(double scale, std::mt19937_64& rng) {
    std::exponential_distribution<double> expo(1.0 / scale);
    std::bernoulli_distribution sign;
    const double m = expo(rng);
    return sign(rng) ? m : -m;
}

}  // namespace

WeightMatrix generate(const SyntheticSpec& s) {
    s.validate();
    std::mt19937_64 rng(s.seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit;
    std::vector<float> values;
    values.reserve(s.n * s.b);
    // Adding +0 turns -0 into +0, so equal values are also equal bit patterns.
    auto push = [&](double v) { values.push_back(static_cast<float>(v) + 0.0f); };

    switch (s.family) {
        case Family::gaussian_mixture: {
            std::vector<std::vector<double>> means;
            std::vector<double> sigmas;
            for (std::size_t c = 0; c < s.components; ++c) {
                means.push_back(unit_ball_point(s.b, rng));
                sigmas.push_back(s.sigma * (0.5 + unit(rng)));
            }
            std::uniform_int_distribution<std::size_t> pick(0, s.components - 1);
            for (std::size_t i = 0; i < s.n; ++i) {
                const auto c = pick(rng);
                for (std::size_t d = 0; d < s.b; ++d) {
                    push(means[c][d] + sigmas[c] * normal(rng));
                }
            }
            break;
        }
        case Family::dense_clumps: {
            const double sep = s.separation.value_or(100.0 * s.radius);
            auto dir = unit_ball_point(s.b, rng);
            const double norm = std::sqrt(std::inner_product(dir.begin(), dir.end(), dir.begin(), 0.0));
            for (auto& v : dir) {
                v /= norm;
            }
            for (std::size_t i = 0; i < s.n; ++i) {
                const double offset = static_cast<double>(i % s.components) * sep;
                const auto jitter = unit_ball_point(s.b, rng);
                for (std::size_t d = 0; d < s.b; ++d) {
                    push(offset * dir[d] + s.radius * jitter[d]);
                }
            }
            break;
        }
        case Family::uniform: {
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            for (std::size_t i = 0; i < s.n * s.b; ++i) {
                push(u(rng));
            }
            break;
        }
        case Family::skewed_mass: {
            for (std::size_t i = 0; i < s.n; ++i) {
                const bool small = unit(rng) < s.fraction;
                for (std::size_t d = 0; d < s.b; ++d) {
                    if (small) {
                        push(std::round(laplace(0.01, rng) / 0.05) * 0.05);
                    } else {
                        push(laplace(1.0, rng));
                    }
                }
            }
            break;
        }
        case Family::duplicate_heavy: {
            std::vector<float> pool(s.prototypes * s.b);
            for (auto& v : pool) {
                v = static_cast<float>(normal(rng));
            }
            std::uniform_int_distribution<std::size_t> pick(0, s.prototypes - 1);
            for (std::size_t i = 0; i < s.n; ++i) {
                if (unit(rng) < s.fraction) {
                    const auto p = pick(rng);
                    values.insert(values.end(), pool.begin() + p * s.b, pool.begin() + (p + 1) * s.b);
                } else {
                    for (std::size_t d = 0; d < s.b; ++d) {
                        push(normal(rng));
                    }
                }
            }
            break;
        }
    }
    return WeightMatrix(s.n, s.b, std::move(values));
}

std::uint64_t matrix_hash(const WeightMatrix& w) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const void* p, std::size_t len) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    const std::uint64_t shape[] = {w.rows(), w.dim()};
    mix(shape, sizeof shape);
    mix(w.values().data(), w.values().size() * sizeof(float));
    return h;
}

void SuiteConfig::validate() const {
    if (instances.empty()) {
        throw UsageError("suite lists no instances");
    }
    if (methods.size() < 2) {
        throw UsageError("suite needs a reference method and at least one challenger");
    }
    if (seeds.empty()) {
        throw UsageError("suite lists no seeds");
    }
    if (jobs == 0) {
        throw UsageError("jobs must be at least 1");
    }
    for (const auto& inst : instances) {
        inst.synth.validate();
        if (inst.k == 0 || inst.k > inst.synth.n) {
            throw UsageError("instance '" + inst.label + "': k must lie in [1, n]");
        }
    }
}

bool HeadToHeadResult::ok() const {
    return std::all_of(runs.begin(), runs.end(), [](const MethodRun& r) { return r.ok; });
}

PairDelta pair_delta(const MethodRun& ref, const MethodRun& chal) {
    PairDelta d;
    d.challenger = chal.method;
    d.empty_delta = static_cast<double>(ref.report.empty_clusters) -
                    static_cast<double>(chal.report.empty_clusters);
    d.mse_delta = ref.report.mse - chal.report.mse;
    d.resolution_iter_ratio =
        static_cast<double>(ref.report.resolution_iters) /
        static_cast<double>(std::max<std::size_t>(chal.report.resolution_iters, 1));
    d.wall_time_ratio =
        chal.report.wall_time_ms > 0.0 ? ref.report.wall_time_ms / chal.report.wall_time_ms : 0.0;
    return d;
}

namespace {

HeadToHeadResult run_pair(const SuiteConfig& cfg, const Instance& inst, std::uint64_t seed) {
    HeadToHeadResult out;
    out.label = inst.label;
    out.synth = inst.synth;
    out.synth.seed = seed;
    out.k = inst.k;
    out.seed = seed;
    LayerSpec spec{inst.label, LayerKind::linear, inst.synth.b, inst.synth.n, inst.synth.b, inst.k};
    bool have_hash = false;
    for (auto method : cfg.methods) {
        MethodRun run;
        run.method = method;
        try {
            // Each method regenerates its input; the hash proves the pair saw the same matrix.
            const auto w = generate(out.synth);
            const auto h = matrix_hash(w);
            if (!have_hash) {
                out.input_hash = h;
                have_hash = true;
            } else if (h != out.input_hash) {
                throw std::runtime_error("input matrix hash differs within a pair");
            }
            auto opts = cfg.options;
            opts.method = method;
            opts.seed = seed;
            auto q = quantize_blocks(w, spec, opts);
            run.report = q.report;
            run.stats = std::move(q.stats);
            run.ok = true;
        } catch (const std::exception& e) {
            run.error = e.what();
        }
        out.runs.push_back(std::move(run));
    }
    const auto& ref = out.runs.front();
    for (std::size_t m = 1; m < out.runs.size(); ++m) {
        if (ref.ok && out.runs[m].ok) {
            out.deltas.push_back(pair_delta(ref, out.runs[m]));
        }
    }
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string hex(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

double median(std::vector<double> v) {
    if (v.empty()) {
        return 0.0;
    }
    std::sort(v.begin(), v.end());
    const auto m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::vector<HeadToHeadResult> run_suite(const SuiteConfig& cfg) {
    cfg.validate();
    struct Task {
        const Instance* inst;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (const auto& inst : cfg.instances) {
        for (auto seed : cfg.seeds) {
            tasks.push_back({&inst, seed});
        }
    }
    std::vector<HeadToHeadResult> results(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t; (t = next.fetch_add(1)) < tasks.size();) {
            results[t] = run_pair(cfg, *tasks[t].inst, tasks[t].seed);
        }
    };
    const std::size_t jobs = std::min(cfg.jobs, tasks.size());
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t j = 0; j < jobs; ++j) {
            pool.emplace_back(worker);
        }
    }
    return results;
}

std::map<std::pair<std::string, std::string>, Summary> summarize(
    const std::vector<HeadToHeadResult>& results) {
    struct Acc {
        std::size_t runs = 0;
        std::size_t failed = 0;
        std::vector<double> empty, mse, res, wall;
    };
    std::map<std::pair<std::string, std::string>, Acc> acc;
    for (const auto& r : results) {
        for (const auto& run : r.runs) {
            auto& a = acc[{std::string(to_string(r.synth.family)), std::string(to_string(run.method))}];
            ++a.runs;
            if (!run.ok) {
                ++a.failed;
                continue;
            }
            a.empty.push_back(static_cast<double>(run.report.empty_clusters));
            a.mse.push_back(run.report.mse);
            a.res.push_back(static_cast<double>(run.report.resolution_iters));
            a.wall.push_back(run.report.wall_time_ms);
        }
    }
    std::map<std::pair<std::string, std::string>, Summary> out;
    for (const auto& [key, a] : acc) {
        Summary s;
        s.runs = a.runs;
        s.failed = a.failed;
        s.mean_empty = mean(a.empty);
        s.median_empty = median(a.empty);
        s.mean_mse = mean(a.mse);
        s.median_mse = median(a.mse);
        s.mean_resolution_iters = mean(a.res);
        s.median_resolution_iters = median(a.res);
        s.mean_wall_time_ms = mean(a.wall);
        if (!a.empty.empty()) {
            s.zero_empty_fraction =
                static_cast<double>(std::count(a.empty.begin(), a.empty.end(), 0.0)) /
                static_cast<double>(a.empty.size());
        }
        out[key] = s;
    }
    return out;
}

std::string to_csv(const std::vector<HeadToHeadResult>& results) {
    std::ostringstream out;
    out << kCsvHeader << '\n';
    for (const auto& r : results) {
        const auto& ref = r.runs.front();
        for (std::size_t m = 1; m < r.runs.size(); ++m) {
            const auto& chal = r.runs[m];
            out << r.label << ',' << to_string(r.synth.family) << ',' << r.synth.n << ','
                << r.synth.b << ',' << r.k << ',' << r.seed << ',' << hex(r.input_hash) << ','
                << to_string(ref.method) << ',' << to_string(chal.method) << ',';
            if (!ref.ok || !chal.ok) {
                out << "failed,,,,,,,,,,,\n";
                continue;
            }
            const auto d = pair_delta(ref, chal);
            out << "ok," << ref.report.empty_clusters << ',' << chal.report.empty_clusters << ','
                << fmt(d.empty_delta) << ',' << fmt(ref.report.mse) << ',' << fmt(chal.report.mse)
                << ',' << fmt(d.mse_delta) << ',' << ref.report.resolution_iters << ','
                << chal.report.resolution_iters << ',' << fmt(d.resolution_iter_ratio) << ','
                << ref.report.kmeans_iters << ',' << chal.report.kmeans_iters << '\n';
        }
    }
    return out.str();
}

json to_json(const std::vector<HeadToHeadResult>& results) {
    json rows = json::array();
    for (const auto& r : results) {
        json runs = json::array();
        for (const auto& run : r.runs) {
            json j = {{"method", std::string(to_string(run.method))}, {"ok", run.ok}};
            if (run.ok) {
                j["report"] = report_to_json(run.report, true);
                j["lloyd_interventions"] = run.stats.any_intervention();
            } else {
                j["error"] = run.error;
            }
            runs.push_back(std::move(j));
        }
        json deltas = json::array();
        for (const auto& d : r.deltas) {
            deltas.push_back({{"challenger", std::string(to_string(d.challenger))},
                              {"empty_delta", d.empty_delta},
                              {"mse_delta", d.mse_delta},
                              {"resolution_iter_ratio", d.resolution_iter_ratio},
                              {"wall_time_ratio", d.wall_time_ratio}});
        }
        rows.push_back({{"instance", r.label},
                        {"family", std::string(to_string(r.synth.family))},
                        {"n", r.synth.n},
                        {"b", r.synth.b},
                        {"k", r.k},
                        {"seed", r.seed},
                        {"input_hash", hex(r.input_hash)},
                        {"runs", std::move(runs)},
                        {"deltas", std::move(deltas)}});
    }
    json summary = json::array();
    for (const auto& [key, s] : summarize(results)) {
        summary.push_back({{"family", key.first},
                           {"method", key.second},
                           {"runs", s.runs},
                           {"failed", s.failed},
                           {"mean_empty_clusters", s.mean_empty},
                           {"median_empty_clusters", s.median_empty},
                           {"zero_empty_fraction", s.zero_empty_fraction},
                           {"mean_mse", s.mean_mse},
                           {"median_mse", s.median_mse},
                           {"mean_resolution_iters", s.mean_resolution_iters},
                           {"median_resolution_iters", s.median_resolution_iters},
                           {"mean_wall_time_ms", s.mean_wall_time_ms}});
    }
    return {{"schema", kReportSchema}, {"results", std::move(rows)}, {"summary", std::move(summary)}};
}

std::string summary_table(const std::vector<HeadToHeadResult>& results) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-18s %-9s %5s %6s %10s %10s %8s %12s %10s %11s\n", "family",
                  "method", "runs", "failed", "mean_empty", "med_empty", "zero_%", "mean_mse",
                  "med_resit", "mean_ms");
    out << line;
    for (const auto& [key, s] : summarize(results)) {
        std::snprintf(line, sizeof line, "%-18s %-9s %5zu %6zu %10.2f %10.1f %8.1f %12.4e %10.1f %11.1f\n",
                      key.first.c_str(), key.second.c_str(), s.runs, s.failed, s.mean_empty,
                      s.median_empty, 100.0 * s.zero_empty_fraction, s.mean_mse,
                      s.median_resolution_iters, s.mean_wall_time_ms);
        out << line;
    }
    return out.str();
}

namespace {

SyntheticSpec synthetic(Family family, std::size_t n, std::size_t b) {
    SyntheticSpec s;
    s.family = family;
    s.n = n;
    s.b = b;
    return s;
}

}  // namespace

SuiteConfig default_suite() {
    SuiteConfig cfg;
    cfg.methods = {Method::baseline, Method::pg, Method::pg_full};
    cfg.seeds = {0, 1, 2};

    auto dup = synthetic(Family::duplicate_heavy, 50000, 4);
    auto skew = synthetic(Family::skewed_mass, 50000, 4);
    auto gmm = synthetic(Family::gaussian_mixture, 10000, 4);
    auto clumps = synthetic(Family::dense_clumps, 10000, 4);
    clumps.components = 1024;
    auto uni = synthetic(Family::uniform, 10000, 8);
    cfg.instances = {
        {"duplicate_heavy_50k", dup, 512},
        {"skewed_mass_50k", skew, 512},
        {"gaussian_mixture_10k", gmm, 256},
        {"dense_clumps_10k", clumps, 256},
        {"uniform_10k", uni, 768},
    };
    return cfg;
}

SuiteConfig parse_suite(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw UsageError(std::string("suite config is not valid JSON: ") + e.what());
    }
    try {
        if (doc.value("schema", 0) != 1) {
            throw UsageError("suite config needs \"schema\": 1");
        }
        SuiteConfig cfg;
        for (const auto& m : doc.at("methods")) {
            cfg.methods.push_back(parse_method(m.get<std::string>()));
        }
        if (doc.contains("seeds")) {
            cfg.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
        } else {
            const auto count = doc.value("seed_count", std::uint64_t{1});
            const auto base = doc.value("seed_base", std::uint64_t{0});
            for (std::uint64_t s = 0; s < count; ++s) {
                cfg.seeds.push_back(base + s);
            }
        }
        cfg.options.kmeans_iters = doc.value("kmeans_iters", cfg.options.kmeans_iters);
        if (doc.contains("resolve_iters")) {
            cfg.options.resolve_iters = doc.at("resolve_iters").get<std::size_t>();
        }
        cfg.jobs = doc.value("jobs", std::size_t{1});
        for (const auto& e : doc.at("instances")) {
            Instance inst;
            inst.synth.family = parse_family(e.at("family").get<std::string>());
            inst.synth.n = e.at("n").get<std::size_t>();
            inst.synth.b = e.at("b").get<std::size_t>();
            inst.k = e.at("k").get<std::size_t>();
            inst.synth.components = e.value("components", inst.synth.components);
            inst.synth.sigma = e.value("sigma", inst.synth.sigma);
            inst.synth.radius = e.value("radius", inst.synth.radius);
            if (e.contains("separation")) {
                inst.synth.separation = e.at("separation").get<double>();
            }
            inst.synth.fraction = e.value("fraction", inst.synth.fraction);
            inst.synth.prototypes = e.value("prototypes", inst.synth.prototypes);
            inst.label = e.value("label", std::string(to_string(inst.synth.family)) + "_" +
                                              std::to_string(inst.synth.n));
            cfg.instances.push_back(std::move(inst));
        }
        cfg.validate();
        return cfg;
    } catch (const json::exception& e) {
        throw UsageError(std::string("suite config: ") + e.what());
    }
}

SuiteConfig load_suite(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return parse_suite(std::string(bytes.begin(), bytes.end()));
}

}  // namespace pgkm::bench
