#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pgkm {

/// Caller passed arguments that violate an operation's preconditions.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Serialized data could not be parsed.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void log_warning(const std::string& message);

/**
 * Row-major dense matrix of 32-bit reals. Base for the block matrix and the
 * codebook, which share storage layout but are distinct domain types.
 */
class BlockMatrix {
public:
    BlockMatrix() = default;
    BlockMatrix(std::size_t rows, std::size_t dim);
    BlockMatrix(std::size_t rows, std::size_t dim, std::vector<float> values);

    std::size_t rows() const { return rows_; }
    std::size_t dim() const { return dim_; }
    bool empty() const { return rows_ == 0; }

    std::span<const float> row(std::size_t i) const {
        return {values_.data() + i * dim_, dim_};
    }
    std::span<float> row(std::size_t i) { return {values_.data() + i * dim_, dim_}; }

    const std::vector<float>& values() const { return values_; }

    bool operator==(const BlockMatrix&) const = default;

protected:
    std::size_t rows_ = 0;
    std::size_t dim_ = 0;
    std::vector<float> values_;
};

/// n PQ blocks of dimension b. Row order is stable across all operations.
class WeightMatrix : public BlockMatrix {
public:
    WeightMatrix() = default;
    /// Throws UsageError if dim is 0, sizes disagree, or any value is not finite.
    WeightMatrix(std::size_t rows, std::size_t dim, std::vector<float> values);
    explicit WeightMatrix(std::vector<std::vector<float>> rows);

    std::size_t size() const { return rows_; }
};

/// k centroids of dimension b.
class Codebook : public BlockMatrix {
public:
    Codebook() = default;
    Codebook(std::size_t k, std::size_t dim) : BlockMatrix(k, dim) {}
    Codebook(std::size_t k, std::size_t dim, std::vector<float> values);
    explicit Codebook(std::vector<std::vector<float>> rows);

    std::size_t size() const { return rows_; }
    void set_row(std::size_t i, std::span<const float> centroid);
    void set_row(std::size_t i, std::span<const double> centroid);
};

/// Per-block centroid index with a cluster-size histogram kept in sync.
class Assignment {
public:
    Assignment() = default;
    Assignment(std::vector<std::uint32_t> index, std::size_t k);

    std::size_t size() const { return index_.size(); }
    std::size_t num_clusters() const { return sizes_.size(); }

    std::uint32_t operator[](std::size_t block) const { return index_[block]; }
    const std::vector<std::uint32_t>& index() const { return index_; }
    const std::vector<std::size_t>& sizes() const { return sizes_; }

    void set(std::size_t block, std::uint32_t cluster);

    std::size_t empty_count() const;
    std::vector<std::size_t> empty_clusters() const;
    /// Block indices per cluster, each list ascending.
    std::vector<std::vector<std::size_t>> members() const;

    /// True when sizes agrees with the index array.
    bool consistent() const;

    bool operator==(const Assignment&) const = default;

private:
    std::vector<std::uint32_t> index_;
    std::vector<std::size_t> sizes_;
};

struct DistanceEntry {
    std::size_t block;
    double distance;

    bool operator==(const DistanceEntry&) const = default;
};

/// Blocks sorted ascending by distance to an anchor; ties by block index.
struct DistanceMap {
    std::vector<float> anchor;
    std::vector<DistanceEntry> entries;
};

double euclidean(std::span<const float> a, std::span<const float> x);
double squared_euclidean(std::span<const float> a, std::span<const float> x);

DistanceMap build_distance_map(const WeightMatrix& w, std::span<const float> anchor);
/// Same, restricted to the listed blocks.
DistanceMap build_distance_map(const WeightMatrix& w, std::span<const std::size_t> subset,
                               std::span<const float> anchor);

/// Arithmetic mean of the listed blocks, accumulated in double.
std::vector<double> block_mean(const WeightMatrix& w, std::span<const std::size_t> subset);

/**
 * Nearest-centroid assignment engine for one weight matrix.
 *
 * Identical blocks always receive identical assignments, so the engine works
 * over the distinct rows and scatters results back to every copy. Results are
 * bit-identical to a plain exhaustive scan with lowest-index tie-breaking.
 */
class Assigner {
public:
    explicit Assigner(const WeightMatrix& w);

    const WeightMatrix& matrix() const { return *w_; }
    std::size_t distinct_blocks() const { return representative_.size(); }

    Assignment assign(const Codebook& cb) const;

    /// Refreshes `a` after the centroids listed in `changed` were replaced.
    /// `a` must be the nearest-centroid assignment for the codebook before the change.
    void reassign(const Codebook& cb, std::span<const std::size_t> changed, Assignment& a) const;

private:
    std::uint32_t nearest(std::span<const float> x, const std::vector<double>& centroids,
                          std::size_t k) const;

    const WeightMatrix* w_;
    std::vector<std::size_t> representative_;      // first block of each distinct row
    std::vector<std::size_t> copies_offset_;       // CSR over distinct rows
    std::vector<std::size_t> copies_;
};

Assignment assign(const WeightMatrix& w, const Codebook& cb);

/// Replaces each non-empty cluster's centroid by the mean of its members.
/// Empty clusters keep their previous centroid.
Codebook update_centroids(const WeightMatrix& w, const Assignment& a, const Codebook& cb);

/// Σ‖block − assigned centroid‖².
double quantization_error(const WeightMatrix& w, const Assignment& a, const Codebook& cb);

struct ResolutionStats {
    std::size_t iterations = 0;
    std::size_t entry_empty = 0;
    std::size_t exit_empty = 0;
    /// Empty count after each resolution iteration.
    std::vector<std::size_t> empty_trajectory;
    /// Slots a resolver could not refill (degenerate inputs).
    std::size_t unfilled_slots = 0;
};

struct Resolution {
    Codebook codebook;
    Assignment assignment;
    ResolutionStats stats;
};

/// Empty-cluster strategy plugged into the Lloyd loop. Receives the
/// nearest-centroid assignment for `cb` and returns the repaired pair.
using Resolver = std::function<Resolution(const Assigner&, Codebook, Assignment)>;

Resolver no_resolution();

struct IterationRecord {
    std::size_t empty_before_resolution = 0;
    std::size_t resolver_iterations = 0;
    bool resolver_intervened = false;
    /// Objective after the centroid update.
    double objective = 0.0;
};

struct IterationStats {
    std::vector<IterationRecord> iterations;
    bool converged = false;

    std::size_t total_resolver_iterations() const;
    bool any_intervention() const;
};

struct LloydResult {
    Codebook codebook;
    Assignment assignment;
    IterationStats stats;
};

/**
 * Alternates assign, resolve and update. Stops after `max_iters` or at a
 * fixed point (assignment repeated, or an iteration that leaves the codebook
 * bit-identical). The returned assignment is the post-resolution one from the
 * final iteration and the codebook holds the means of its clusters.
 */
LloydResult lloyd_iterate(const WeightMatrix& w, Codebook cb, const Resolver& resolver,
                          std::size_t max_iters);
LloydResult lloyd_iterate(const Assigner& assigner, Codebook cb, const Resolver& resolver,
                          std::size_t max_iters);

}  // namespace pgkm
