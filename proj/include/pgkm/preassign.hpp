#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pgkm/core.hpp"

namespace pgkm {

struct PartitionParams {
    /// Target average cluster size, n/k. Real-valued, never rounded.
    double s_avg = 1.0;
    /// Leave the final slot unfilled so the caller can place a pooled centroid.
    bool reserve_last = false;
    std::size_t k_target = 1;
};

/// One emitted centroid together with the blocks it was computed from.
struct Piece {
    std::vector<float> centroid;
    std::vector<std::size_t> members;
};

/**
 * Codebook under construction. Several partitioning calls may share one sink;
 * they fill slots in call order until the sink reports full.
 */
class PartitionSink {
public:
    explicit PartitionSink(const PartitionParams& params);

    std::size_t capacity() const { return capacity_; }
    bool reserve_last() const { return reserve_last_; }

    /// No further centroid may be emitted (the reserved slot does not count).
    bool full() const;
    std::size_t slots_left() const { return capacity_ - pieces_.size(); }

    void emit(Piece piece);

    const std::vector<Piece>& pieces() const { return pieces_; }
    std::vector<Piece>& pieces() { return pieces_; }

    /// Blocks of `subset` not covered by any emitted piece, ascending.
    std::vector<std::size_t> uncovered(std::span<const std::size_t> subset) const;

private:
    std::size_t capacity_;
    bool reserve_last_;
    std::vector<Piece> pieces_;
};

/// Nearest integer multiple of s_avg to n_w / 2, clamped so both halves keep at
/// least ceil(s_avg) blocks; falls back to floor(n_w / 2) when that is impossible.
std::size_t split_size(std::size_t n_w, double s_avg);

/**
 * Recursive spherical bisection of `subset`. Each sub-distribution either
 * becomes one centroid (at most s_avg + 1 blocks, or all blocks identical) or
 * is split into the split_size() blocks nearest to its farthest point and the
 * rest. Pieces are emitted depth-first, near part before far part, until the
 * sink fills. Uses an explicit work stack.
 */
void centroid_partitioning(const WeightMatrix& w, std::span<const std::size_t> subset, double s_avg,
                           PartitionSink& out);

/// Partition pieces for the whole matrix, topped up to exactly k pieces when
/// enough distinct blocks exist.
std::vector<Piece> preassign_pieces(const WeightMatrix& w, std::size_t k);

/**
 * Partitioning-guided initial codebook of exactly k centroids. When the matrix
 * holds at least k distinct blocks, the nearest-centroid assignment of the
 * result has no empty cluster.
 */
Codebook preassign(const WeightMatrix& w, std::size_t k);

}  // namespace pgkm
