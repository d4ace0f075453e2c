#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pgkm/baseline.hpp"
#include "pgkm/core.hpp"
#include "pgkm/dense.hpp"
#include "pgkm/finetune.hpp"

namespace pgkm {

enum class LayerKind : std::uint8_t { embedding = 0, linear = 1 };
enum class Method : std::uint8_t { baseline = 0, pg = 1, pg_full = 2 };

std::string_view to_string(LayerKind kind);
std::string_view to_string(Method method);
LayerKind parse_layer_kind(std::string_view text);
Method parse_method(std::string_view text);

/// Row-major rows x cols tensor of 32-bit reals.
struct Tensor {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> values;

    float at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    bool operator==(const Tensor&) const = default;
};

struct LayerSpec {
    std::string name;
    LayerKind kind = LayerKind::linear;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t block_size = 1;
    std::size_t num_centroids = 1;

    std::size_t num_blocks() const { return rows / block_size * cols; }
    /// Throws UsageError naming the layer and its shape when the spec is unusable.
    void validate() const;
};

struct QuantReport {
    std::size_t empty_clusters = 0;
    std::size_t resolution_iters = 0;
    std::size_t kmeans_iters = 0;
    /// Mean squared reconstruction error over all weights.
    double mse = 0.0;
    std::uint64_t compressed_bytes = 0;
    std::uint64_t original_bytes = 0;
    unsigned original_bits = 16;
    double compression_ratio = 0.0;
    double wall_time_ms = 0.0;

    // Dense-consolidation diagnostics (pg_full only).
    bool dense_applied = false;
    std::size_t consolidated_rows = 0;
    std::size_t dense_clusters = 0;
    double dense_epsilon = 0.0;
    std::size_t dense_epsilon_shrinks = 0;
    bool dense_identity_fallback = false;

    bool operator==(const QuantReport&) const = default;
};

struct QuantizedLayer {
    LayerSpec spec;
    Method method = Method::pg;
    Codebook codebook;
    Assignment assignment;
    QuantReport report;
    /// Per-iteration Lloyd diagnostics; not serialized.
    IterationStats stats;
};

struct QuantizeOptions {
    Method method = Method::pg;
    std::uint64_t seed = 0;
    std::size_t kmeans_iters = 15;
    /// Resolution budget per k-means iteration; defaults to 100 (baseline) or 15 (pg).
    std::optional<std::size_t> resolve_iters;
    std::size_t patience = 3;
    double perturb_scale = 1e-6;
    std::optional<double> epsilon;
    double c_sd = 0.8;
    double c_mc = 2.0;
    unsigned original_bits = 16;
    /// After expanding consolidated assignments, recompute each centroid from
    /// the original blocks it now represents.
    bool refit_expanded = true;
};

/// Splits each column into rows/b contiguous runs of length b; blocks ordered
/// column-major (all runs of column 0, then column 1, ...).
WeightMatrix reshape_to_blocks(const Tensor& t, std::size_t block_size,
                               std::string_view layer_name = "tensor");
Tensor blocks_to_tensor(const WeightMatrix& blocks, std::size_t rows, std::size_t cols);

QuantizedLayer quantize_layer(const Tensor& t, const LayerSpec& spec, const QuantizeOptions& opts);
/// Same, on blocks that are already reshaped.
QuantizedLayer quantize_blocks(const WeightMatrix& w, const LayerSpec& spec,
                               const QuantizeOptions& opts);

Tensor dequantize(const QuantizedLayer& q);

unsigned index_bits(std::size_t k);
/// (rows*cols*original_bits) / (k*b*32 + n*ceil(log2 k)).
double compression_ratio(std::size_t rows, std::size_t cols, std::size_t block_size, std::size_t k,
                         unsigned original_bits);
double compression_ratio(const QuantizedLayer& q, unsigned original_bits);

/// Σ(original − reconstructed)² / count.
double reconstruction_mse(const Tensor& original, const Tensor& reconstructed);

}  // namespace pgkm
