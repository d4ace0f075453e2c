#include "pgkm/cli.hpp"

#include <atomic>
#include <chrono>
#include <cstring>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "pgkm/bench.hpp"
#include "pgkm/formats.hpp"
#include "pgkm/manifest.hpp"

namespace pgkm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct LayerJob {
    std::string file;
    fs::path output;
    Tensor tensor;
    LayerSpec spec;
    QuantizeOptions opts;

    bool ok = false;
    std::string error;
    QuantizedLayer result;
    double wall_ms = 0.0;
};

QuantizeOptions resolve_options(const ManifestLayer& l, const Overrides& o) {
    QuantizeOptions opts;
    opts.method = o.method.value_or(l.method.value_or(Method::pg));
    opts.seed = o.seed.value_or(l.seed.value_or(0));
    if (o.kmeans_iters) {
        opts.kmeans_iters = *o.kmeans_iters;
    }
    opts.resolve_iters = o.resolve_iters;
    opts.epsilon = o.epsilon ? o.epsilon : l.dense.epsilon;
    opts.c_sd = o.c_sd.value_or(l.dense.c_sd.value_or(opts.c_sd));
    opts.c_mc = o.c_mc.value_or(l.dense.c_mc.value_or(opts.c_mc));
    opts.original_bits = l.original_bits;
    return opts;
}

void validate_options(const QuantizeOptions& opts, const std::string& layer) {
    try {
        if (opts.kmeans_iters == 0) {
            throw UsageError("--kmeans-iters must be at least 1");
        }
        if (opts.resolve_iters && *opts.resolve_iters == 0) {
            throw UsageError("--resolve-iters must be at least 1");
        }
        ConsolidationConfig{opts.epsilon, opts.c_sd, opts.c_mc, opts.seed}.validate();
    } catch (const UsageError& e) {
        throw UsageError("layer '" + layer + "': " + e.what());
    }
}

template <typename F>
void run_pool(std::size_t count, std::size_t jobs, F&& body) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) {
            body(i);
        }
    };
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        worker();
        return;
    }
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) {
        pool.emplace_back(worker);
    }
}

std::uint64_t compressed_bits(const LayerSpec& s) {
    return static_cast<std::uint64_t>(s.num_centroids) * s.block_size * 32 +
           static_cast<std::uint64_t>(s.num_blocks()) * index_bits(s.num_centroids);
}

json aggregate_report(const std::vector<LayerJob>& jobs) {
    json layers = json::array();
    struct KindAcc {
        std::size_t layers = 0;
        std::size_t with_empty = 0;
        double empty_sum = 0.0;
    };
    std::map<std::string, KindAcc> by_kind;
    std::size_t failed = 0;
    std::size_t with_empty = 0;
    double original_bits = 0.0;
    double compressed = 0.0;
    for (const auto& j : jobs) {
        json e = {
            {"name", j.spec.name},
            {"kind", std::string(to_string(j.spec.kind))},
            {"file", j.file},
            {"method", std::string(to_string(j.opts.method))},
            {"seed", j.opts.seed},
            {"rows", j.spec.rows},
            {"cols", j.spec.cols},
            {"block_size", j.spec.block_size},
            {"num_centroids", j.spec.num_centroids},
        };
        if (!j.ok) {
            ++failed;
            e["status"] = "failed";
            e["error"] = j.error;
            layers.push_back(std::move(e));
            continue;
        }
        const auto& r = j.result.report;
        e["status"] = "ok";
        e["output"] = j.output.filename().string();
        e["report"] = report_to_json(r);
        layers.push_back(std::move(e));

        auto& k = by_kind[std::string(to_string(j.spec.kind))];
        ++k.layers;
        k.empty_sum += static_cast<double>(r.empty_clusters);
        if (r.empty_clusters > 0) {
            ++k.with_empty;
            ++with_empty;
        }
        original_bits += static_cast<double>(j.spec.rows) * static_cast<double>(j.spec.cols) *
                         r.original_bits;
        compressed += static_cast<double>(compressed_bits(j.spec));
    }
    const std::size_t ok = jobs.size() - failed;
    json kinds = json::object();
    for (const auto& [name, k] : by_kind) {
        kinds[name] = {
            {"layers", k.layers},
            {"mean_empty_clusters", k.empty_sum / static_cast<double>(k.layers)},
            {"percent_layers_with_empty_clusters",
             100.0 * static_cast<double>(k.with_empty) / static_cast<double>(k.layers)},
        };
    }
    json summary = {
        {"layers", jobs.size()},
        {"failed", failed},
        {"by_kind", std::move(kinds)},
        {"percent_layers_with_empty_clusters",
         ok ? 100.0 * static_cast<double>(with_empty) / static_cast<double>(ok) : 0.0},
        {"total_compression_ratio", compressed > 0.0 ? original_bits / compressed : 0.0},
    };
    return {{"schema", kReportSchema}, {"layers", std::move(layers)}, {"summary", std::move(summary)}};
}

std::string layer_csv(const std::vector<LayerJob>& jobs) {
    std::ostringstream out;
    out << "name,kind,method,seed,rows,cols,block_size,num_centroids,status,empty_clusters,"
           "resolution_iters,kmeans_iters,mse,compression_ratio\n";
    out.precision(17);
    for (const auto& j : jobs) {
        out << j.spec.name << ',' << to_string(j.spec.kind) << ',' << to_string(j.opts.method)
            << ',' << j.opts.seed << ',' << j.spec.rows << ',' << j.spec.cols << ','
            << j.spec.block_size << ',' << j.spec.num_centroids << ',';
        if (!j.ok) {
            out << "failed,,,,,\n";
            continue;
        }
        const auto& r = j.result.report;
        out << "ok," << r.empty_clusters << ',' << r.resolution_iters << ',' << r.kmeans_iters
            << ',' << r.mse << ',' << r.compression_ratio << '\n';
    }
    return out.str();
}

}  // namespace

int cmd_quantize(const QuantizeArgs& args, std::ostream& out, std::ostream& err) {
    std::vector<LayerJob> jobs;
    try {
        const auto manifest = load_manifest(args.manifest);
        std::set<fs::path> outputs;
        for (const auto& l : manifest.layers) {
            LayerJob job;
            job.file = l.file.filename().string();
            auto tf = read_tensor_file(l.file);
            job.spec = {tf.name, l.layer_type.value_or(tf.kind), tf.tensor.rows, tf.tensor.cols,
                        l.block_size, l.num_centroids};
            job.spec.validate();
            job.tensor = std::move(tf.tensor);
            job.opts = resolve_options(l, args.overrides);
            validate_options(job.opts, job.spec.name);
            job.output = args.out_dir / (l.file.stem().string() + ".pgq1");
            if (!outputs.insert(job.output).second) {
                throw UsageError("two layers would both write '" + job.output.string() + "'");
            }
            jobs.push_back(std::move(job));
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    std::error_code ec;
    fs::create_directories(args.out_dir, ec);
    if (ec) {
        err << "error: cannot create '" << args.out_dir.string() << "': " << ec.message() << '\n';
        return kExitFailure;
    }

    run_pool(jobs.size(), args.jobs, [&](std::size_t i) {
        auto& job = jobs[i];
        try {
            const auto start = std::chrono::steady_clock::now();
            job.result = quantize_layer(job.tensor, job.spec, job.opts);
            write_quantized_file(job.output, job.result);
            job.wall_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - start)
                              .count();
            job.ok = true;
        } catch (const std::exception& e) {
            job.error = e.what();
        }
    });

    std::size_t failed = 0;
    for (const auto& job : jobs) {
        if (job.ok) {
            const auto& r = job.result.report;
            out << job.spec.name << ": " << to_string(job.opts.method) << " k=" << job.spec.num_centroids
                << " b=" << job.spec.block_size << " empty=" << r.empty_clusters
                << " resolution_iters=" << r.resolution_iters << " mse=" << r.mse
                << " ratio=" << r.compression_ratio << " (" << job.wall_ms << " ms)\n";
        } else {
            ++failed;
            err << "error: layer '" << job.spec.name << "' (shape " << job.spec.rows << "x"
                << job.spec.cols << "): " << job.error << '\n';
        }
    }

    try {
        write_file_atomic(args.out_dir / "report.json", aggregate_report(jobs).dump(2) + "\n");
        if (args.report == ReportFormat::csv) {
            write_file_atomic(args.out_dir / "report.csv", layer_csv(jobs));
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return failed ? kExitFailure : kExitOk;
}

int cmd_dequantize(const fs::path& input, const fs::path& output, std::ostream& out,
                   std::ostream& err) {
    QuantizedLayer q;
    try {
        q = read_quantized_file(input);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    try {
        write_tensor_file(output, {q.spec.name, q.spec.kind, dequantize(q)});
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    out << q.spec.name << ": wrote " << q.spec.rows << "x" << q.spec.cols << " tensor to "
        << output.string() << '\n';
    return kExitOk;
}

int cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err) {
    bench::SuiteConfig cfg;
    try {
        cfg = args.suite ? bench::load_suite(*args.suite) : bench::default_suite();
        const auto& o = args.overrides;
        if (o.seed) {
            for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
                cfg.seeds[i] = *o.seed + i;
            }
        }
        if (o.kmeans_iters) {
            cfg.options.kmeans_iters = *o.kmeans_iters;
        }
        if (o.resolve_iters) {
            cfg.options.resolve_iters = o.resolve_iters;
        }
        if (o.epsilon) {
            cfg.options.epsilon = o.epsilon;
        }
        cfg.options.c_sd = o.c_sd.value_or(cfg.options.c_sd);
        cfg.options.c_mc = o.c_mc.value_or(cfg.options.c_mc);
        if (args.jobs) {
            cfg.jobs = *args.jobs;
        }
        validate_options(cfg.options, "bench");
        cfg.validate();
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    const auto results = bench::run_suite(cfg);
    try {
        fs::create_directories(args.out_dir);
        write_file_atomic(args.out_dir / "bench.csv", bench::to_csv(results));
        write_file_atomic(args.out_dir / "bench.json", bench::to_json(results).dump(2) + "\n");
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    out << bench::summary_table(results);
    std::size_t failed = 0;
    for (const auto& r : results) {
        for (const auto& run : r.runs) {
            if (!run.ok) {
                ++failed;
                err << "failed: " << r.label << " seed " << r.seed << " " << to_string(run.method)
                    << ": " << run.error << '\n';
            }
        }
    }
    if (failed) {
        out << failed << " run(s) failed\n";
        return kExitFailure;
    }
    return kExitOk;
}

int cmd_inspect(const fs::path& input, std::ostream& out, std::ostream& err) {
    try {
        const auto bytes = read_file(input);
        json j;
        if (bytes.size() >= 4 && std::memcmp(bytes.data(), "PGW1", 4) == 0) {
            const auto t = parse_tensor(bytes);
            j = {{"format", "PGW1"},
                 {"name", t.name},
                 {"kind", std::string(to_string(t.kind))},
                 {"rows", t.tensor.rows},
                 {"cols", t.tensor.cols}};
        } else {
            const auto q = parse_quantized(bytes);
            j = {{"format", "PGQ1"},
                 {"name", q.spec.name},
                 {"kind", std::string(to_string(q.spec.kind))},
                 {"rows", q.spec.rows},
                 {"cols", q.spec.cols},
                 {"block_size", q.spec.block_size},
                 {"num_centroids", q.spec.num_centroids},
                 {"index_bits", index_bits(q.spec.num_centroids)},
                 {"method", std::string(to_string(q.method))},
                 {"report", report_to_json(q.report)}};
        }
        out << j.dump(2) << '\n';
        return kExitOk;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
    } catch (const FormatError& e) {
        err << "error: " << e.what() << '\n';
    }
    return kExitUsage;
}

namespace {

struct FlagValues {
    std::string method;
    std::uint64_t seed = 0;
    std::size_t kmeans_iters = 15;
    std::size_t resolve_iters = 15;
    double epsilon = 0.0;
    double c_sd = 0.8;
    double c_mc = 2.0;
    std::size_t jobs = 1;

    CLI::Option* method_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* kmeans_opt = nullptr;
    CLI::Option* resolve_opt = nullptr;
    CLI::Option* epsilon_opt = nullptr;
    CLI::Option* c_sd_opt = nullptr;
    CLI::Option* c_mc_opt = nullptr;
    CLI::Option* jobs_opt = nullptr;

    void add(CLI::App* app, bool with_method) {
        if (with_method) {
            method_opt = app->add_option("--method", method, "baseline, pg or pg_full (default pg)")
                             ->check(CLI::IsMember({"baseline", "pg", "pg_full"}));
        }
        seed_opt = app->add_option("--seed", seed, "Random seed (default 0)");
        kmeans_opt = app->add_option("--kmeans-iters", kmeans_iters, "k-means iteration cap (default 15)");
        resolve_opt = app->add_option("--resolve-iters", resolve_iters,
                                      "Resolution iterations per k-means iteration "
                                      "(default 100 baseline, 15 pg)");
        epsilon_opt = app->add_option("--epsilon", epsilon, "Initial dense-consolidation radius");
        c_sd_opt = app->add_option("--c-sd", c_sd, "Epsilon shrink factor (default 0.8)");
        c_mc_opt = app->add_option("--c-mc", c_mc, "Minimum consolidated count factor (default 2)");
        jobs_opt = app->add_option("--jobs", jobs, "Worker threads (default 1)");
    }

    Overrides overrides() const {
        Overrides o;
        if (method_opt && method_opt->count()) {
            o.method = parse_method(method);
        }
        if (seed_opt->count()) {
            o.seed = seed;
        }
        if (kmeans_opt->count()) {
            o.kmeans_iters = kmeans_iters;
        }
        if (resolve_opt->count()) {
            o.resolve_iters = resolve_iters;
        }
        if (epsilon_opt->count()) {
            o.epsilon = epsilon;
        }
        if (c_sd_opt->count()) {
            o.c_sd = c_sd;
        }
        if (c_mc_opt->count()) {
            o.c_mc = c_mc;
        }
        return o;
    }
};

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Partitioning-guided k-means product quantization", "pgkm"};
    app.require_subcommand(1);

    QuantizeArgs qargs;
    FlagValues qflags;
    std::string report = "json";
    auto* quantize = app.add_subcommand("quantize", "Quantize every layer listed in a manifest");
    quantize->add_option("manifest", qargs.manifest, "Manifest JSON")->required();
    quantize->add_option("out_dir", qargs.out_dir, "Output directory")->required();
    qflags.add(quantize, true);
    quantize->add_option("--report", report, "Aggregate report format (json, csv)")
        ->check(CLI::IsMember({"json", "csv"}));

    fs::path dq_in, dq_out;
    auto* deq = app.add_subcommand("dequantize", "Reconstruct a PGW1 tensor from a PGQ1 file");
    deq->add_option("input", dq_in, "PGQ1 file")->required();
    deq->add_option("output", dq_out, "PGW1 file to write")->required();

    BenchArgs bargs;
    FlagValues bflags;
    std::string suite;
    bool use_default = false;
    auto* bench_cmd = app.add_subcommand("bench", "Run a head-to-head benchmark suite");
    auto* suite_opt = bench_cmd->add_option("suite", suite, "Suite config JSON");
    auto* default_opt = bench_cmd->add_flag("--default", use_default, "Run the built-in suite");
    suite_opt->excludes(default_opt);
    bargs.out_dir = ".";
    bench_cmd->add_option("--out-dir", bargs.out_dir, "Where bench.csv and bench.json go");
    bflags.add(bench_cmd, false);

    fs::path inspect_in;
    auto* inspect = app.add_subcommand("inspect", "Describe a PGW1 or PGQ1 file");
    inspect->add_option("input", inspect_in, "File to inspect")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, er;
        const int code = app.exit(e, o, er);
        out << o.str();
        err << er.str();
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*quantize) {
            qargs.overrides = qflags.overrides();
            qargs.jobs = qflags.jobs;
            qargs.report = report == "csv" ? ReportFormat::csv : ReportFormat::json;
            return cmd_quantize(qargs, out, err);
        }
        if (*deq) {
            return cmd_dequantize(dq_in, dq_out, out, err);
        }
        if (*bench_cmd) {
            if (!use_default && suite.empty()) {
                err << "error: bench needs a suite config path or --default\n";
                return kExitUsage;
            }
            if (!suite.empty()) {
                bargs.suite = suite;
            }
            bargs.overrides = bflags.overrides();
            if (bflags.jobs_opt->count()) {
                bargs.jobs = bflags.jobs;
            }
            return cmd_bench(bargs, out, err);
        }
        return cmd_inspect(inspect_in, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace pgkm::cli
