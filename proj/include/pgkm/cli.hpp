#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "pgkm/pq_engine.hpp"

namespace pgkm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

enum class ReportFormat { json, csv };

/// Flags given on the command line; set values override the manifest.
struct Overrides {
    std::optional<Method> method;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> kmeans_iters;
    std::optional<std::size_t> resolve_iters;
    std::optional<double> epsilon;
    std::optional<double> c_sd;
    std::optional<double> c_mc;
};

struct QuantizeArgs {
    std::filesystem::path manifest;
    std::filesystem::path out_dir;
    Overrides overrides;
    std::size_t jobs = 1;
    ReportFormat report = ReportFormat::json;
};

struct BenchArgs {
    /// Unset selects the built-in default suite.
    std::optional<std::filesystem::path> suite;
    std::filesystem::path out_dir;
    Overrides overrides;
    std::optional<std::size_t> jobs;
};

/**
 * Writes <out_dir>/<tensor file stem>.pgq1 per layer and an aggregate
 * report.json (or report.csv). Returns an exit code; diagnostics go to `err`.
 */
int cmd_quantize(const QuantizeArgs& args, std::ostream& out, std::ostream& err);
/// PGQ1 in, reconstructed PGW1 out.
int cmd_dequantize(const std::filesystem::path& input, const std::filesystem::path& output,
                   std::ostream& out, std::ostream& err);
/// Writes bench.csv and bench.json into out_dir and prints the summary table.
int cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err);
/// Prints the header and embedded report of a PGW1 or PGQ1 file as JSON.
int cmd_inspect(const std::filesystem::path& input, std::ostream& out, std::ostream& err);

/// Entry point used by the executable; parses argv with CLI11.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace pgkm::cli
