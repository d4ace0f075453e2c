#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "pgkm/core.hpp"

namespace pgkm::testing {

using Rows = std::vector<std::vector<float>>;

inline WeightMatrix random_matrix(std::size_t n, std::size_t b, std::uint64_t seed,
                                  double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, scale);
    std::vector<float> v(n * b);
    for (auto& x : v) {
        x = static_cast<float>(normal(rng));
    }
    return WeightMatrix(n, b, std::move(v));
}

inline Codebook random_codebook(std::size_t k, std::size_t b, std::uint64_t seed) {
    auto w = random_matrix(k, b, seed);
    return Codebook(k, b, w.values());
}

/// Plain double-precision distance, written independently of the library.
inline double naive_sq(std::span<const float> a, std::span<const float> x) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double t = static_cast<double>(a[d]) - static_cast<double>(x[d]);
        s += t * t;
    }
    return s;
}

/// Exhaustive nearest-centroid scan, lowest index on ties.
inline std::vector<std::uint32_t> brute_assign(const BlockMatrix& w, const BlockMatrix& cb) {
    std::vector<std::uint32_t> out(w.rows());
    for (std::size_t i = 0; i < w.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < cb.rows(); ++j) {
            const double d = naive_sq(w.row(i), cb.row(j));
            if (d < best) {
                best = d;
                out[i] = static_cast<std::uint32_t>(j);
            }
        }
    }
    return out;
}

inline double brute_objective(const BlockMatrix& w, const BlockMatrix& cb,
                              const std::vector<std::uint32_t>& index) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.rows(); ++i) {
        s += naive_sq(w.row(i), cb.row(index[i]));
    }
    return s;
}

inline std::size_t count_distinct(const WeightMatrix& w) {
    std::vector<std::vector<float>> rows;
    for (std::size_t i = 0; i < w.rows(); ++i) {
        rows.emplace_back(w.row(i).begin(), w.row(i).end());
    }
    std::sort(rows.begin(), rows.end());
    return static_cast<std::size_t>(std::unique(rows.begin(), rows.end()) - rows.begin());
}

}  // namespace pgkm::testing
