#include "pgkm/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iostream>
#include <mutex>
#include <numeric>
#include <string_view>
#include <unordered_map>

namespace pgkm {

void log_warning(const std::string& message) {
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    std::cerr << "warning: " << message << '\n';
}

BlockMatrix::BlockMatrix(std::size_t rows, std::size_t dim)
    : rows_(rows), dim_(dim), values_(rows * dim, 0.0F) {}

BlockMatrix::BlockMatrix(std::size_t rows, std::size_t dim, std::vector<float> values)
    : rows_(rows), dim_(dim), values_(std::move(values)) {
    if (values_.size() != rows_ * dim_) {
        throw UsageError("matrix storage holds " + std::to_string(values_.size()) +
                         " values, expected " + std::to_string(rows_ * dim_));
    }
}

namespace {

std::vector<float> flatten(const std::vector<std::vector<float>>& rows, std::size_t& dim) {
    dim = rows.empty() ? 0 : rows.front().size();
    std::vector<float> out;
    out.reserve(rows.size() * dim);
    for (const auto& r : rows) {
        if (r.size() != dim) {
            throw UsageError("ragged rows: expected dimension " + std::to_string(dim));
        }
        out.insert(out.end(), r.begin(), r.end());
    }
    return out;
}

void check_finite(const std::vector<float>& values, const char* what) {
    for (float v : values) {
        if (!std::isfinite(v)) {
            throw UsageError(std::string(what) + " contains a non-finite value");
        }
    }
}

}  // namespace

WeightMatrix::WeightMatrix(std::size_t rows, std::size_t dim, std::vector<float> values)
    : BlockMatrix(rows, dim, std::move(values)) {
    if (dim_ == 0) {
        throw UsageError("block size must be at least 1");
    }
    check_finite(values_, "weight matrix");
}

WeightMatrix::WeightMatrix(std::vector<std::vector<float>> rows) {
    std::size_t dim = 0;
    auto flat = flatten(rows, dim);
    if (!rows.empty()) {
        *this = WeightMatrix(rows.size(), dim, std::move(flat));
    }
}

Codebook::Codebook(std::size_t k, std::size_t dim, std::vector<float> values)
    : BlockMatrix(k, dim, std::move(values)) {
    check_finite(values_, "codebook");
}

Codebook::Codebook(std::vector<std::vector<float>> rows) {
    std::size_t dim = 0;
    auto flat = flatten(rows, dim);
    *this = Codebook(rows.size(), dim, std::move(flat));
}

void Codebook::set_row(std::size_t i, std::span<const float> centroid) {
    std::copy(centroid.begin(), centroid.end(), row(i).begin());
}

void Codebook::set_row(std::size_t i, std::span<const double> centroid) {
    auto dst = row(i);
    for (std::size_t d = 0; d < dim_; ++d) {
        dst[d] = static_cast<float>(centroid[d]);
    }
}

Assignment::Assignment(std::vector<std::uint32_t> index, std::size_t k)
    : index_(std::move(index)), sizes_(k, 0) {
    for (auto c : index_) {
        if (c >= k) {
            throw UsageError("assignment index " + std::to_string(c) + " out of range for k=" +
                             std::to_string(k));
        }
        ++sizes_[c];
    }
}

void Assignment::set(std::size_t block, std::uint32_t cluster) {
    --sizes_[index_[block]];
    index_[block] = cluster;
    ++sizes_[cluster];
}

std::size_t Assignment::empty_count() const {
    return static_cast<std::size_t>(std::count(sizes_.begin(), sizes_.end(), std::size_t{0}));
}

std::vector<std::size_t> Assignment::empty_clusters() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < sizes_.size(); ++j) {
        if (sizes_[j] == 0) {
            out.push_back(j);
        }
    }
    return out;
}

std::vector<std::vector<std::size_t>> Assignment::members() const {
    std::vector<std::vector<std::size_t>> out(sizes_.size());
    for (std::size_t j = 0; j < sizes_.size(); ++j) {
        out[j].reserve(sizes_[j]);
    }
    for (std::size_t i = 0; i < index_.size(); ++i) {
        out[index_[i]].push_back(i);
    }
    return out;
}

bool Assignment::consistent() const {
    std::vector<std::size_t> counts(sizes_.size(), 0);
    for (auto c : index_) {
        if (c >= counts.size()) {
            return false;
        }
        ++counts[c];
    }
    return counts == sizes_;
}

double squared_euclidean(std::span<const float> a, std::span<const float> x) {
    if (a.size() != x.size()) {
        throw UsageError("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                         std::to_string(x.size()));
    }
    double acc = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double diff = static_cast<double>(a[d]) - static_cast<double>(x[d]);
        acc += diff * diff;
    }
    return acc;
}

double euclidean(std::span<const float> a, std::span<const float> x) {
    return std::sqrt(squared_euclidean(a, x));
}

DistanceMap build_distance_map(const WeightMatrix& w, std::span<const float> anchor) {
    std::vector<std::size_t> all(w.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return build_distance_map(w, all, anchor);
}

DistanceMap build_distance_map(const WeightMatrix& w, std::span<const std::size_t> subset,
                               std::span<const float> anchor) {
    DistanceMap map;
    map.anchor.assign(anchor.begin(), anchor.end());
    if (subset.empty()) {
        return map;
    }
    if (anchor.size() != w.dim()) {
        throw UsageError("anchor dimension " + std::to_string(anchor.size()) +
                         " does not match block size " + std::to_string(w.dim()));
    }
    map.entries.reserve(subset.size());
    for (auto i : subset) {
        map.entries.push_back({i, euclidean(w.row(i), anchor)});
    }
    std::sort(map.entries.begin(), map.entries.end(),
              [](const DistanceEntry& l, const DistanceEntry& r) {
                  return l.distance < r.distance || (l.distance == r.distance && l.block < r.block);
              });
    return map;
}

std::vector<double> block_mean(const WeightMatrix& w, std::span<const std::size_t> subset) {
    std::vector<double> mean(w.dim(), 0.0);
    for (auto i : subset) {
        auto r = w.row(i);
        for (std::size_t d = 0; d < mean.size(); ++d) {
            mean[d] += r[d];
        }
    }
    if (!subset.empty()) {
        for (auto& v : mean) {
            v /= static_cast<double>(subset.size());
        }
    }
    return mean;
}

namespace {

struct RowKey {
    std::string_view bytes;
    bool operator==(const RowKey&) const = default;
};

struct RowKeyHash {
    std::size_t operator()(const RowKey& key) const noexcept {
        return std::hash<std::string_view>{}(key.bytes);
    }
};

std::vector<double> widen(const Codebook& cb) {
    return {cb.values().begin(), cb.values().end()};
}

inline double sq_dist(std::span<const float> x, const double* c) {
    double acc = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
        const double diff = static_cast<double>(x[d]) - c[d];
        acc += diff * diff;
    }
    return acc;
}

}  // namespace

Assigner::Assigner(const WeightMatrix& w) : w_(&w) {
    const std::size_t n = w.rows();
    const std::size_t row_bytes = w.dim() * sizeof(float);
    const char* base = reinterpret_cast<const char*>(w.values().data());

    std::unordered_map<RowKey, std::size_t, RowKeyHash> seen;
    seen.reserve(n);
    std::vector<std::size_t> group(n);
    for (std::size_t i = 0; i < n; ++i) {
        RowKey key{std::string_view(base + i * row_bytes, row_bytes)};
        auto [it, inserted] = seen.try_emplace(key, representative_.size());
        if (inserted) {
            representative_.push_back(i);
        }
        group[i] = it->second;
    }

    copies_offset_.assign(representative_.size() + 1, 0);
    for (auto g : group) {
        ++copies_offset_[g + 1];
    }
    std::partial_sum(copies_offset_.begin(), copies_offset_.end(), copies_offset_.begin());
    copies_.resize(n);
    auto cursor = copies_offset_;
    for (std::size_t i = 0; i < n; ++i) {
        copies_[cursor[group[i]]++] = i;
    }
}

std::uint32_t Assigner::nearest(std::span<const float> x, const std::vector<double>& centroids,
                                std::size_t k) const {
    const std::size_t b = x.size();
    std::uint32_t best = 0;
    double best_d = sq_dist(x, centroids.data());
    for (std::size_t j = 1; j < k; ++j) {
        const double d = sq_dist(x, centroids.data() + j * b);
        if (d < best_d) {
            best_d = d;
            best = static_cast<std::uint32_t>(j);
        }
    }
    return best;
}

Assignment Assigner::assign(const Codebook& cb) const {
    const auto& w = *w_;
    if (cb.size() == 0) {
        throw UsageError("cannot assign to an empty codebook");
    }
    if (cb.dim() != w.dim()) {
        throw UsageError("codebook dimension " + std::to_string(cb.dim()) +
                         " does not match block size " + std::to_string(w.dim()));
    }
    const auto centroids = widen(cb);
    std::vector<std::uint32_t> index(w.rows());
    for (std::size_t u = 0; u < representative_.size(); ++u) {
        const auto c = nearest(w.row(representative_[u]), centroids, cb.size());
        for (auto p = copies_offset_[u]; p < copies_offset_[u + 1]; ++p) {
            index[copies_[p]] = c;
        }
    }
    return Assignment(std::move(index), cb.size());
}

void Assigner::reassign(const Codebook& cb, std::span<const std::size_t> changed,
                        Assignment& a) const {
    if (changed.empty()) {
        return;
    }
    const auto& w = *w_;
    const std::size_t b = w.dim();
    const auto centroids = widen(cb);
    std::vector<char> is_changed(cb.size(), 0);
    for (auto c : changed) {
        is_changed[c] = 1;
    }
    for (std::size_t u = 0; u < representative_.size(); ++u) {
        const auto x = w.row(representative_[u]);
        const auto current = a[representative_[u]];
        std::uint32_t best = current;
        if (is_changed[current]) {
            best = nearest(x, centroids, cb.size());
        } else {
            double best_d = sq_dist(x, centroids.data() + current * b);
            for (auto c : changed) {
                const double d = sq_dist(x, centroids.data() + c * b);
                if (d < best_d || (d == best_d && c < best)) {
                    best_d = d;
                    best = static_cast<std::uint32_t>(c);
                }
            }
        }
        if (best != current) {
            for (auto p = copies_offset_[u]; p < copies_offset_[u + 1]; ++p) {
                a.set(copies_[p], best);
            }
        }
    }
}

Assignment assign(const WeightMatrix& w, const Codebook& cb) {
    return Assigner(w).assign(cb);
}

Codebook update_centroids(const WeightMatrix& w, const Assignment& a, const Codebook& cb) {
    const std::size_t b = w.dim();
    std::vector<double> sums(cb.size() * b, 0.0);
    for (std::size_t i = 0; i < w.rows(); ++i) {
        auto r = w.row(i);
        double* s = sums.data() + a[i] * b;
        for (std::size_t d = 0; d < b; ++d) {
            s[d] += r[d];
        }
    }
    Codebook out = cb;
    for (std::size_t j = 0; j < cb.size(); ++j) {
        const auto count = a.sizes()[j];
        if (count == 0) {
            continue;
        }
        auto dst = out.row(j);
        for (std::size_t d = 0; d < b; ++d) {
            dst[d] = static_cast<float>(sums[j * b + d] / static_cast<double>(count));
        }
    }
    return out;
}

double quantization_error(const WeightMatrix& w, const Assignment& a, const Codebook& cb) {
    double total = 0.0;
    for (std::size_t i = 0; i < w.rows(); ++i) {
        total += squared_euclidean(w.row(i), cb.row(a[i]));
    }
    return total;
}

Resolver no_resolution() {
    return [](const Assigner&, Codebook cb, Assignment a) {
        Resolution r{std::move(cb), std::move(a), {}};
        r.stats.entry_empty = r.stats.exit_empty = r.assignment.empty_count();
        return r;
    };
}

std::size_t IterationStats::total_resolver_iterations() const {
    std::size_t total = 0;
    for (const auto& it : iterations) {
        total += it.resolver_iterations;
    }
    return total;
}

bool IterationStats::any_intervention() const {
    return std::any_of(iterations.begin(), iterations.end(),
                       [](const IterationRecord& r) { return r.resolver_intervened; });
}

LloydResult lloyd_iterate(const WeightMatrix& w, Codebook cb, const Resolver& resolver,
                          std::size_t max_iters) {
    Assigner assigner(w);
    return lloyd_iterate(assigner, std::move(cb), resolver, max_iters);
}

LloydResult lloyd_iterate(const Assigner& assigner, Codebook cb, const Resolver& resolver,
                          std::size_t max_iters) {
    if (max_iters == 0) {
        throw UsageError("max_iters must be at least 1");
    }
    const auto& w = assigner.matrix();
    LloydResult result;
    Assignment previous;
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        const Codebook start = cb;
        Assignment a = assigner.assign(cb);

        IterationRecord record;
        record.empty_before_resolution = a.empty_count();
        auto resolved = resolver(assigner, std::move(cb), std::move(a));
        record.resolver_iterations = resolved.stats.iterations;
        record.resolver_intervened = resolved.stats.iterations > 0;

        cb = update_centroids(w, resolved.assignment, resolved.codebook);
        record.objective = quantization_error(w, resolved.assignment, cb);
        result.stats.iterations.push_back(record);

        const bool repeated = iter > 0 && resolved.assignment.index() == previous.index();
        previous = std::move(resolved.assignment);
        if (repeated || cb == start) {
            result.stats.converged = true;
            break;
        }
    }
    result.codebook = std::move(cb);
    result.assignment = std::move(previous);
    return result;
}

}  // namespace pgkm
