#pragma once

// Radial projection used by the projected scheme: P(x) = min{1, c/||x||} x
// with cap c = theta (d/h)^{1/(2 gamma)} when gamma > 1, identity when
// gamma = 1, and P(0) = 0.

#include <cmath>
#include <span>
#include <vector>

#include "plmc/errors.hpp"
#include "plmc/vec.hpp"

namespace plmc {

struct ProjectionParams {
    double gamma = 1.0;
    double theta = 1.0;
    int dimension = 1;
    double h = 0.0;  // step size

    double cap_radius() const {
        return theta * std::pow(static_cast<double>(dimension) / h, 1.0 / (2.0 * gamma));
    }
};

namespace detail {

inline void validate_projection_params(const ProjectionParams& p) {
    if (p.gamma < 1.0) throw invalid_parameter_error("projection: gamma must be >= 1");
    if (!(p.theta >= 1.0)) throw invalid_parameter_error("projection: theta must be >= 1");
    if (p.dimension < 1) throw invalid_parameter_error("projection: dimension must be >= 1");
    if (!(p.h > 0.0 && p.h < 1.0)) throw invalid_parameter_error("projection: h must be in (0,1)");
}

} // namespace detail

/// In-place projection. Points at or inside the cap (and the origin, and the
/// whole space when gamma = 1) are returned without touching a single bit, so
/// the projected scheme coincides exactly with the unprojected one wherever
/// the projection is inactive. For points outside the cap the scale factor is
/// nudged down by ulps until the recomputed norm is <= cap, which makes the
/// map exactly idempotent under this library's norm().
inline void project_in_place(std::span<double> x, const ProjectionParams& p) {
    detail::validate_projection_params(p);
    if (static_cast<int>(x.size()) != p.dimension)
        throw invalid_parameter_error("projection: x has wrong dimension");
    if (p.gamma == 1.0) return;
    if (!all_finite(x)) return;  // divergence is flagged upstream, never masked here
    const double n = norm(x);
    if (n == 0.0) return;
    const double cap = p.cap_radius();
    if (n <= cap) return;
    double s = cap / n;
    std::vector<double> scaled(x.size());
    for (;;) {
        for (std::size_t i = 0; i < x.size(); ++i) scaled[i] = x[i] * s;
        if (norm(scaled) <= cap) break;
        s = std::nextafter(s, 0.0);
    }
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = scaled[i];
}

inline std::vector<double> project(std::span<const double> x, const ProjectionParams& p) {
    std::vector<double> out(x.begin(), x.end());
    project_in_place(std::span<double>(out), p);
    return out;
}

} // namespace plmc
