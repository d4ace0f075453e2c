#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pgkm/pq_engine.hpp"

namespace pgkm::bench {

enum class Family { gaussian_mixture, dense_clumps, uniform, skewed_mass, duplicate_heavy };

std::string_view to_string(Family f);
Family parse_family(std::string_view text);

/**
 * Synthetic block distribution.
 *
 * gaussian_mixture: `components` means drawn uniformly from the unit ball, each
 *   component isotropic with sigma * U(0.5, 1.5); blocks pick a component uniformly.
 * dense_clumps: `components` clumps whose centres sit on a ray from the
 *   origin, `separation` apart; block i lies uniformly inside the ball of radius
 *   `radius` around clump i mod components.
 * uniform: every coordinate U(-1, 1).
 * skewed_mass: a `fraction` of blocks are Laplace(0.01) values rounded to a
 *   0.05 grid (mostly the zero block); the rest are Laplace(1).
 * duplicate_heavy: a `fraction` of blocks are exact copies drawn from a pool of
 *   `prototypes` N(0, 1) blocks; the rest are fresh N(0, 1) blocks.
 */
struct SyntheticSpec {
    Family family = Family::gaussian_mixture;
    std::size_t n = 1000;
    std::size_t b = 4;
    std::size_t components = 16;
    double sigma = 0.05;
    double radius = 1e-3;
    /// Distance between neighbouring clump centres; 100 * radius when unset.
    std::optional<double> separation;
    double fraction = 0.9;
    std::size_t prototypes = 16;
    std::uint64_t seed = 0;

    void validate() const;
};

WeightMatrix generate(const SyntheticSpec& spec);

/// FNV-1a over the shape and the raw value bytes.
std::uint64_t matrix_hash(const WeightMatrix& w);

struct Instance {
    std::string label;
    SyntheticSpec synth;
    std::size_t k = 256;
};

struct SuiteConfig {
    std::vector<Instance> instances;
    /// The first method is the reference every other method is paired against.
    std::vector<Method> methods;
    std::vector<std::uint64_t> seeds;
    /// Method and seed are overwritten per run.
    QuantizeOptions options;
    std::size_t jobs = 1;

    void validate() const;
};

struct MethodRun {
    Method method = Method::pg;
    bool ok = false;
    std::string error;
    QuantReport report;
    /// Objective trace and intervention flags of the Lloyd run.
    IterationStats stats;
};

struct PairDelta {
    Method challenger = Method::pg;
    /// reference − challenger
    double empty_delta = 0.0;
    /// reference − challenger
    double mse_delta = 0.0;
    /// reference / max(challenger, 1)
    double resolution_iter_ratio = 0.0;
    /// reference / challenger
    double wall_time_ratio = 0.0;
};

struct HeadToHeadResult {
    std::string label;
    SyntheticSpec synth;
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::uint64_t input_hash = 0;
    std::vector<MethodRun> runs;
    /// One entry per challenger whose run and reference run both succeeded.
    std::vector<PairDelta> deltas;

    bool ok() const;
};

PairDelta pair_delta(const MethodRun& reference, const MethodRun& challenger);

/// Every instance x seed, all methods on the same generated matrix.
std::vector<HeadToHeadResult> run_suite(const SuiteConfig& cfg);

struct Summary {
    std::size_t runs = 0;
    std::size_t failed = 0;
    double mean_empty = 0.0;
    double median_empty = 0.0;
    double mean_mse = 0.0;
    double median_mse = 0.0;
    double mean_resolution_iters = 0.0;
    double median_resolution_iters = 0.0;
    double mean_wall_time_ms = 0.0;
    /// Share of successful runs ending with no empty cluster.
    double zero_empty_fraction = 0.0;
};

/// Keyed by (family, method).
std::map<std::pair<std::string, std::string>, Summary> summarize(
    const std::vector<HeadToHeadResult>& results);

/// One row per (instance, seed, challenger); timing-free, so byte-stable under fixed seeds.
std::string to_csv(const std::vector<HeadToHeadResult>& results);
nlohmann::json to_json(const std::vector<HeadToHeadResult>& results);
std::string summary_table(const std::vector<HeadToHeadResult>& results);

inline constexpr std::string_view kCsvHeader =
    "instance,family,n,b,k,seed,input_hash,reference,challenger,status,"
    "ref_empty,chal_empty,empty_delta,ref_mse,chal_mse,mse_delta,"
    "ref_resolution_iters,chal_resolution_iters,resolution_iter_ratio,"
    "ref_kmeans_iters,chal_kmeans_iters";

/// Adversarial and Gaussian-mixture instances at desk scale.
SuiteConfig default_suite();
/**
 * JSON suite description:
 *   {"schema": 1, "methods": ["baseline", "pg"], "seeds": [0, 1] | "seed_count": 10,
 *    "kmeans_iters": 15, "instances": [{"family": "duplicate_heavy", "n": 50000,
 *    "b": 4, "k": 512, "fraction": 0.9, ...}]}
 */
SuiteConfig parse_suite(const std::string& text);
SuiteConfig load_suite(const std::filesystem::path& path);

}  // namespace pgkm::bench
