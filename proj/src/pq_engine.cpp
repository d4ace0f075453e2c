#include "pgkm/pq_engine.hpp"

#include <chrono>
#include <cmath>

#include "pgkm/preassign.hpp"

namespace pgkm {

std::string_view to_string(LayerKind kind) {
    return kind == LayerKind::embedding ? "embedding" : "linear";
}

std::string_view to_string(Method method) {
    switch (method) {
        case Method::baseline:
            return "baseline";
        case Method::pg:
            return "pg";
        case Method::pg_full:
            return "pg_full";
    }
    return "unknown";
}

LayerKind parse_layer_kind(std::string_view text) {
    if (text == "embedding") {
        return LayerKind::embedding;
    }
    if (text == "linear") {
        return LayerKind::linear;
    }
    throw UsageError("unknown layer kind '" + std::string(text) + "'");
}

Method parse_method(std::string_view text) {
    if (text == "baseline") {
        return Method::baseline;
    }
    if (text == "pg") {
        return Method::pg;
    }
    if (text == "pg_full") {
        return Method::pg_full;
    }
    throw UsageError("unknown method '" + std::string(text) + "'");
}

namespace {

std::string shape_of(std::size_t rows, std::size_t cols) {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace

void LayerSpec::validate() const {
    const std::string where = "layer '" + name + "' (shape " + shape_of(rows, cols) + ")";
    if (rows == 0 || cols == 0) {
        throw UsageError(where + ": empty tensor");
    }
    if (block_size == 0) {
        throw UsageError(where + ": block size must be at least 1");
    }
    if (rows % block_size != 0) {
        throw UsageError(where + ": " + std::to_string(rows) + " rows not divisible by block size " +
                         std::to_string(block_size));
    }
    if (num_centroids == 0) {
        throw UsageError(where + ": number of centroids must be at least 1");
    }
    if (num_centroids > num_blocks()) {
        throw UsageError(where + ": " + std::to_string(num_centroids) +
                         " centroids exceed the " + std::to_string(num_blocks()) + " blocks");
    }
}

WeightMatrix reshape_to_blocks(const Tensor& t, std::size_t block_size, std::string_view layer_name) {
    if (block_size == 0 || t.rows % block_size != 0) {
        throw UsageError("layer '" + std::string(layer_name) + "' (shape " +
                         shape_of(t.rows, t.cols) + "): rows not divisible by block size " +
                         std::to_string(block_size));
    }
    const std::size_t per_column = t.rows / block_size;
    std::vector<float> values;
    values.reserve(t.rows * t.cols);
    for (std::size_t c = 0; c < t.cols; ++c) {
        for (std::size_t r = 0; r < t.rows; ++r) {
            values.push_back(t.at(r, c));
        }
    }
    return WeightMatrix(per_column * t.cols, block_size, std::move(values));
}

Tensor blocks_to_tensor(const WeightMatrix& blocks, std::size_t rows, std::size_t cols) {
    if (blocks.rows() * blocks.dim() != rows * cols || rows % blocks.dim() != 0) {
        throw UsageError("blocks do not tile a " + shape_of(rows, cols) + " tensor");
    }
    Tensor t{rows, cols, std::vector<float>(rows * cols)};
    const auto& v = blocks.values();
    std::size_t p = 0;
    for (std::size_t c = 0; c < cols; ++c) {
        for (std::size_t r = 0; r < rows; ++r) {
            t.values[r * cols + c] = v[p++];
        }
    }
    return t;
}

unsigned index_bits(std::size_t k) {
    unsigned bits = 0;
    while ((std::size_t{1} << bits) < k) {
        ++bits;
    }
    return bits;
}

double compression_ratio(std::size_t rows, std::size_t cols, std::size_t block_size, std::size_t k,
                         unsigned original_bits) {
    const double original = static_cast<double>(rows) * static_cast<double>(cols) * original_bits;
    const double n = static_cast<double>(rows / block_size * cols);
    const double compressed = static_cast<double>(k) * static_cast<double>(block_size) * 32.0 +
                              n * static_cast<double>(index_bits(k));
    return original / compressed;
}

double compression_ratio(const QuantizedLayer& q, unsigned original_bits) {
    return compression_ratio(q.spec.rows, q.spec.cols, q.spec.block_size, q.spec.num_centroids,
                             original_bits);
}

QuantizedLayer quantize_layer(const Tensor& t, const LayerSpec& spec, const QuantizeOptions& opts) {
    spec.validate();
    if (t.rows != spec.rows || t.cols != spec.cols) {
        throw UsageError("layer '" + spec.name + "': tensor shape " + shape_of(t.rows, t.cols) +
                         " does not match spec " + shape_of(spec.rows, spec.cols));
    }
    return quantize_blocks(reshape_to_blocks(t, spec.block_size, spec.name), spec, opts);
}

QuantizedLayer quantize_blocks(const WeightMatrix& w, const LayerSpec& spec,
                               const QuantizeOptions& opts) {
    spec.validate();
    if (w.rows() != spec.num_blocks() || w.dim() != spec.block_size) {
        throw UsageError("layer '" + spec.name + "': block matrix does not match its spec");
    }
    if (opts.kmeans_iters == 0) {
        throw UsageError("kmeans_iters must be at least 1");
    }
    const std::size_t k = spec.num_centroids;

    QuantizedLayer q;
    q.spec = spec;
    q.method = opts.method;

    DenseClusterMap dense;
    const WeightMatrix* clustered = &w;
    if (opts.method == Method::pg_full) {
        ConsolidationConfig cfg{opts.epsilon, opts.c_sd, opts.c_mc, opts.seed};
        auto consolidated = consolidate(w, k, cfg);
        dense = std::move(consolidated.map);
        clustered = &dense.representatives;
        q.report.dense_applied = true;
        q.report.consolidated_rows = dense.representatives.rows();
        q.report.dense_clusters = consolidated.dense_clusters;
        q.report.dense_epsilon = consolidated.epsilon;
        q.report.dense_epsilon_shrinks = consolidated.shrinks;
        q.report.dense_identity_fallback = consolidated.identity_fallback;
    }

    Codebook init;
    Resolver resolver;
    if (opts.method == Method::baseline) {
        init = random_init(*clustered, k, opts.seed);
        BaselineConfig cfg{opts.resolve_iters.value_or(100), opts.perturb_scale};
        // Decorrelate the perturbation stream from the sampling stream.
        resolver = baseline_resolver(cfg, opts.seed ^ 0x9e3779b97f4a7c15ULL);
    } else {
        init = preassign(*clustered, k);
        resolver = finetune_resolver({opts.resolve_iters.value_or(15), opts.patience});
    }

    Assigner assigner(*clustered);
    const auto start = std::chrono::steady_clock::now();
    auto lloyd = lloyd_iterate(assigner, std::move(init), resolver, opts.kmeans_iters);
    const auto stop = std::chrono::steady_clock::now();

    q.report.wall_time_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    q.report.kmeans_iters = lloyd.stats.iterations.size();
    q.report.resolution_iters = lloyd.stats.total_resolver_iterations();
    q.stats = std::move(lloyd.stats);

    if (opts.method == Method::pg_full) {
        q.assignment = expand(dense, lloyd.assignment);
        q.codebook = opts.refit_expanded ? update_centroids(w, q.assignment, lloyd.codebook)
                                         : std::move(lloyd.codebook);
    } else {
        q.assignment = std::move(lloyd.assignment);
        q.codebook = std::move(lloyd.codebook);
    }

    const std::size_t n = w.rows();
    q.report.empty_clusters = q.assignment.empty_count();
    q.report.mse = quantization_error(w, q.assignment, q.codebook) /
                   (static_cast<double>(n) * static_cast<double>(w.dim()));
    q.report.original_bits = opts.original_bits;
    q.report.original_bytes =
        (static_cast<std::uint64_t>(spec.rows) * spec.cols * opts.original_bits + 7) / 8;
    const std::uint64_t compressed_bits = static_cast<std::uint64_t>(k) * spec.block_size * 32 +
                                          static_cast<std::uint64_t>(n) * index_bits(k);
    q.report.compressed_bytes = (compressed_bits + 7) / 8;
    q.report.compression_ratio = compression_ratio(q, opts.original_bits);
    return q;
}

Tensor dequantize(const QuantizedLayer& q) {
    const auto& cb = q.codebook;
    std::vector<float> values;
    values.reserve(q.assignment.size() * cb.dim());
    for (std::size_t i = 0; i < q.assignment.size(); ++i) {
        auto c = cb.row(q.assignment[i]);
        values.insert(values.end(), c.begin(), c.end());
    }
    return blocks_to_tensor(WeightMatrix(q.assignment.size(), cb.dim(), std::move(values)),
                            q.spec.rows, q.spec.cols);
}

double reconstruction_mse(const Tensor& original, const Tensor& reconstructed) {
    if (original.values.size() != reconstructed.values.size()) {
        throw UsageError("tensor sizes differ");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < original.values.size(); ++i) {
        const double d = static_cast<double>(original.values[i]) - reconstructed.values[i];
        total += d * d;
    }
    return total / static_cast<double>(original.values.size());
}

}  // namespace pgkm
