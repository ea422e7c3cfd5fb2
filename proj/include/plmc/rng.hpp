#pragma once

// Deterministic, splittable standard-Gaussian streams.
//
// Layout is fully counter-based: scalar draw i of trajectory j under master
// seed s is word (i & 1) of Philox2x64-10(key = s, counter = (i >> 1, j)).
// Deriving a substream is O(1), there is no sequential coupling between
// trajectory indices, and a stream's output is a pure function of
// (master_seed, trajectory_index, draw index) — independent of process,
// thread, or call pattern.
//
// Uniform-to-normal transform: the 64-bit word is mapped to the open unit
// interval as u = ((w >> 11) + 0.5) * 2^-53 and pushed through Wichura's
// AS241 double-precision normal quantile. Both maps are fixed; outputs are
// bit-stable across releases and platforms with IEEE doubles.

#include <cstdint>
#include <cmath>
#include <span>
#include <vector>

namespace plmc {

namespace detail {

struct u128 {
    std::uint64_t hi;
    std::uint64_t lo;
};

inline u128 mul_64x64(std::uint64_t a, std::uint64_t b) {
    const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
    return {static_cast<std::uint64_t>(p >> 64), static_cast<std::uint64_t>(p)};
}

inline constexpr std::uint64_t kPhiloxM = 0xD2B74407B1CE6E93ULL;
inline constexpr std::uint64_t kPhiloxW = 0x9E3779B97F4A7C15ULL;

/// Philox2x64-10 block function: counter (c0, c1), key k -> two output words.
inline u128 philox2x64(std::uint64_t c0, std::uint64_t c1, std::uint64_t key) {
    for (int round = 0; round < 10; ++round) {
        const u128 p = mul_64x64(kPhiloxM, c0);
        c0 = p.hi ^ key ^ c1;
        c1 = p.lo;
        key += kPhiloxW;
    }
    return {c0, c1};
}

/// 64-bit word -> double in the open interval (0, 1), symmetric about 1/2.
inline double to_unit_open(std::uint64_t w) {
    const double u = (static_cast<double>(w >> 11) + 0.5) * 0x1.0p-53;
    // At the maximal word the exact value 1 - 2^-54 is not representable and
    // rounds up to 1.0, which the normal quantile maps to +inf; clamp to the
    // largest double below 1 so the interval stays open.
    return u < 1.0 ? u : 0x1.fffffffffffffp-1;
}

} // namespace detail

/// Inverse of the standard normal CDF (Wichura's AS241, PPND16 precision).
/// Requires p in (0, 1); accurate to about 1e-15 relative error.
inline double standard_normal_quantile(double p) {
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                  6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
              1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
        const double den =
            (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                  3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
              4.2313330701600911252e+1) * r + 1.0);
        return q * num / den;
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double z;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
              4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
              2.05319162663775882187e+0) * r + 1.0);
        z = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
              5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
        z = num / den;
    }
    return (q < 0.0) ? -z : z;
}

/// One deterministic substream of standard-Gaussian (and uniform) draws,
/// keyed by (master_seed, trajectory_index). Single-owner value type; copy it
/// to replay from the captured position.
class NoiseStream {
public:
    NoiseStream() = default;
    NoiseStream(std::uint64_t master_seed, std::uint64_t trajectory_index)
        : master_seed_(master_seed), trajectory_index_(trajectory_index) {}

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t trajectory_index() const { return trajectory_index_; }
    /// Number of completed vector draws (one per next_gaussian_vector call).
    std::uint64_t step_counter() const { return step_counter_; }
    /// Number of consumed scalar draws.
    std::uint64_t draw_counter() const { return draw_counter_; }

    std::uint64_t next_u64() {
        const std::uint64_t i = draw_counter_++;
        const detail::u128 block = detail::philox2x64(i >> 1, trajectory_index_, master_seed_);
        return (i & 1) ? block.lo : block.hi;
    }

    double next_uniform01() { return detail::to_unit_open(next_u64()); }

    double next_gaussian() { return standard_normal_quantile(next_uniform01()); }

    /// Fills out with i.i.d. N(0,1) draws and advances step_counter by 1.
    void next_gaussian_vector(std::span<double> out) {
        // Walk whole Philox blocks; each block yields two scalars.
        std::size_t j = 0;
        const std::size_t d = out.size();
        if ((draw_counter_ & 1) != 0 && j < d) out[j++] = next_gaussian();
        while (j + 1 < d) {
            const detail::u128 block =
                detail::philox2x64(draw_counter_ >> 1, trajectory_index_, master_seed_);
            out[j++] = standard_normal_quantile(detail::to_unit_open(block.hi));
            out[j++] = standard_normal_quantile(detail::to_unit_open(block.lo));
            draw_counter_ += 2;
        }
        if (j < d) out[j] = next_gaussian();
        ++step_counter_;
    }

    std::vector<double> next_gaussian_vector(std::size_t d) {
        std::vector<double> v(d);
        next_gaussian_vector(std::span<double>(v));
        return v;
    }

private:
    std::uint64_t master_seed_ = 0;
    std::uint64_t trajectory_index_ = 0;
    std::uint64_t step_counter_ = 0;
    std::uint64_t draw_counter_ = 0;
};

/// O(1) substream derivation; streams with distinct trajectory indices are
/// statistically independent.
inline NoiseStream derive_stream(std::uint64_t master_seed, std::uint64_t trajectory_index) {
    return NoiseStream(master_seed, trajectory_index);
}

} // namespace plmc
