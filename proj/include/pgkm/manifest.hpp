#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pgkm/pq_engine.hpp"

namespace pgkm {

inline constexpr int kManifestSchema = 1;

struct DenseSettings {
    std::optional<double> epsilon;
    std::optional<double> c_sd;
    std::optional<double> c_mc;
};

/// One layer entry. Unset fields fall back to command-line flags or engine defaults.
struct ManifestLayer {
    /// Resolved against the manifest's directory.
    std::filesystem::path file;
    std::size_t block_size = 0;
    std::size_t num_centroids = 0;
    std::optional<Method> method;
    std::optional<std::uint64_t> seed;
    unsigned original_bits = 16;
    /// Overrides the kind stored in the tensor file.
    std::optional<LayerKind> layer_type;
    DenseSettings dense;
};

/**
 * JSON document:
 *   {"schema": 1, "layers": [{"file": "fc1.pgw", "block_size": 4, "num_centroids": 256,
 *     "method": "pg", "seed": 0, "original_bits": 16, "layer_type": "linear",
 *     "dense": {"epsilon": 0.01, "c_sd": 0.8, "c_mc": 2}}]}
 */
struct Manifest {
    std::vector<ManifestLayer> layers;
};

/// Throws UsageError on malformed documents.
Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir);
Manifest load_manifest(const std::filesystem::path& path);
std::string dump_manifest(const Manifest& m, const std::filesystem::path& base_dir);

}  // namespace pgkm
