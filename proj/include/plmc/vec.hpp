#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace plmc {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double squared_norm(std::span<const double> x) { return dot(x, x); }

inline double norm(std::span<const double> x) { return std::sqrt(squared_norm(x)); }

/// Pairwise (tree) summation over a contiguous range. The reduction order is a
/// pure function of the element count, so serial and parallel callers that
/// assemble the same array get bitwise-identical sums.
inline double pairwise_sum(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline double pairwise_mean(std::span<const double> v) {
    return v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
}

/// Sample variance (denominator n-1) with the same fixed reduction order.
inline double pairwise_sample_variance(std::span<const double> v, double mean) {
    if (v.size() < 2) return 0.0;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = v[i] - mean;
        sq[i] = d * d;
    }
    return pairwise_sum(sq) / static_cast<double>(v.size() - 1);
}

inline bool all_finite(std::span<const double> x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

} // namespace plmc
