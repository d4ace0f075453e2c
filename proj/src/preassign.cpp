#include "pgkm/preassign.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

namespace pgkm {

PartitionSink::PartitionSink(const PartitionParams& params)
    : capacity_(params.k_target), reserve_last_(params.reserve_last) {
    if (!(params.s_avg > 0.0)) {
        throw UsageError("s_avg must be positive");
    }
    if (params.k_target == 0) {
        throw UsageError("k_target must be at least 1");
    }
    pieces_.reserve(capacity_);
}

bool PartitionSink::full() const {
    const std::size_t usable = reserve_last_ ? capacity_ - 1 : capacity_;
    return pieces_.size() >= usable;
}

void PartitionSink::emit(Piece piece) {
    pieces_.push_back(std::move(piece));
}

std::vector<std::size_t> PartitionSink::uncovered(std::span<const std::size_t> subset) const {
    std::vector<std::size_t> covered;
    for (const auto& p : pieces_) {
        covered.insert(covered.end(), p.members.begin(), p.members.end());
    }
    std::sort(covered.begin(), covered.end());
    std::vector<std::size_t> sorted(subset.begin(), subset.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> out;
    std::set_difference(sorted.begin(), sorted.end(), covered.begin(), covered.end(),
                        std::back_inserter(out));
    return out;
}

std::size_t split_size(std::size_t n_w, double s_avg) {
    const auto lo = static_cast<std::size_t>(std::ceil(s_avg));
    if (n_w < 2 * lo) {
        return n_w / 2;
    }
    const std::size_t hi = n_w - lo;
    const double multiple = std::round((static_cast<double>(n_w) / 2.0) / s_avg) * s_avg;
    const auto n_h = static_cast<std::size_t>(std::llround(multiple));
    return std::clamp(n_h, lo, hi);
}

namespace {

std::vector<float> to_float(const std::vector<double>& v) {
    return {v.begin(), v.end()};
}

struct Split {
    std::vector<std::size_t> near;
    std::vector<std::size_t> far;
};

// Sphere centred on the block farthest from `centroid`, holding the n_h nearest blocks.
// Returns nothing when every block coincides with the centroid.
std::optional<Split> spherical_split(const WeightMatrix& w, std::span<const std::size_t> subset,
                                     std::span<const float> centroid, std::size_t n_h) {
    const auto to_centroid = build_distance_map(w, subset, centroid);
    const auto& farthest = to_centroid.entries.back();
    if (farthest.distance == 0.0) {
        return std::nullopt;
    }
    const auto to_farthest = build_distance_map(w, subset, w.row(farthest.block));
    Split split;
    split.near.reserve(n_h);
    split.far.reserve(subset.size() - n_h);
    for (std::size_t i = 0; i < to_farthest.entries.size(); ++i) {
        (i < n_h ? split.near : split.far).push_back(to_farthest.entries[i].block);
    }
    return split;
}

bool all_identical(const WeightMatrix& w, std::span<const std::size_t> subset) {
    if (subset.empty()) {
        return true;
    }
    const auto first = w.row(subset.front());
    return std::all_of(subset.begin() + 1, subset.end(), [&](std::size_t i) {
        return std::equal(first.begin(), first.end(), w.row(i).begin());
    });
}

}  // namespace

void centroid_partitioning(const WeightMatrix& w, std::span<const std::size_t> subset, double s_avg,
                           PartitionSink& out) {
    if (!(s_avg > 0.0)) {
        throw UsageError("s_avg must be positive");
    }
    std::vector<std::vector<std::size_t>> stack;
    stack.emplace_back(subset.begin(), subset.end());
    while (!stack.empty()) {
        if (out.full()) {
            return;
        }
        auto part = std::move(stack.back());
        stack.pop_back();
        if (part.empty()) {
            continue;
        }
        auto centroid = to_float(block_mean(w, part));
        const double n_w = static_cast<double>(part.size());
        if (n_w <= s_avg + 1.0) {
            out.emit({std::move(centroid), std::move(part)});
            continue;
        }
        auto split = spherical_split(w, part, centroid, split_size(part.size(), s_avg));
        if (!split) {
            out.emit({std::move(centroid), std::move(part)});
            continue;
        }
        stack.push_back(std::move(split->far));
        stack.push_back(std::move(split->near));
    }
}

std::vector<Piece> preassign_pieces(const WeightMatrix& w, std::size_t k) {
    const std::size_t n = w.rows();
    if (k == 0) {
        throw UsageError("number of centroids must be at least 1");
    }
    if (n < k) {
        throw UsageError("more centroids than blocks: k=" + std::to_string(k) +
                         ", n=" + std::to_string(n));
    }
    const double s_avg = static_cast<double>(n) / static_cast<double>(k);
    PartitionSink sink({s_avg, false, k});
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    centroid_partitioning(w, all, s_avg, sink);

    // The base case accepts up to s_avg + 1 blocks, so the recursion can stop
    // short of k. Bisect the largest splittable pieces until k are present.
    auto pieces = std::move(sink.pieces());
    std::vector<char> splittable(pieces.size());
    for (std::size_t p = 0; p < pieces.size(); ++p) {
        splittable[p] = !all_identical(w, pieces[p].members);
    }
    while (pieces.size() < k) {
        std::size_t pick = pieces.size();
        for (std::size_t p = 0; p < pieces.size(); ++p) {
            if (splittable[p] &&
                (pick == pieces.size() || pieces[p].members.size() > pieces[pick].members.size())) {
                pick = p;
            }
        }
        if (pick == pieces.size()) {
            // Fewer than k distinct blocks: the surplus centroids duplicate the first.
            while (pieces.size() < k) {
                pieces.push_back({pieces.front().centroid, {}});
            }
            break;
        }
        const auto& members = pieces[pick].members;
        auto split = spherical_split(w, members, pieces[pick].centroid, members.size() / 2);
        Piece far{to_float(block_mean(w, split->far)), std::move(split->far)};
        pieces[pick] = {to_float(block_mean(w, split->near)), std::move(split->near)};
        splittable[pick] = !all_identical(w, pieces[pick].members);
        splittable.push_back(!all_identical(w, far.members));
        pieces.push_back(std::move(far));
    }
    return pieces;
}

Codebook preassign(const WeightMatrix& w, std::size_t k) {
    const auto pieces = preassign_pieces(w, k);
    Codebook cb(k, w.dim());
    for (std::size_t j = 0; j < k; ++j) {
        cb.set_row(j, std::span<const float>(pieces[j].centroid));
    }

    // A piece mean can lose all its members to neighbouring centroids. Move
    // each such centroid onto the block worst served by the current codebook;
    // the objective drops strictly, so this ends with no empty cluster whenever
    // at least k distinct blocks exist.
    Assigner assigner(w);
    Assignment a = assigner.assign(cb);
    while (a.empty_count() > 0) {
        std::size_t worst = 0;
        double worst_d = -1.0;
        for (std::size_t i = 0; i < w.rows(); ++i) {
            const double d = squared_euclidean(w.row(i), cb.row(a[i]));
            if (d > worst_d) {
                worst_d = d;
                worst = i;
            }
        }
        if (worst_d <= 0.0) {
            break;
        }
        const std::size_t slot = a.empty_clusters().front();
        cb.set_row(slot, w.row(worst));
        const std::size_t changed[] = {slot};
        assigner.reassign(cb, changed, a);
    }
    return cb;
}

}  // namespace pgkm
