#pragma once

// Drift/potential models and numeric verifiers for the structural conditions
// the samplers rely on (dissipativity, contractivity at infinity, one-sided
// Lipschitz, polynomial growth constant).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plmc/errors.hpp"
#include "plmc/rng.hpp"
#include "plmc/vec.hpp"

namespace plmc {

/// Double-well drift parameters: f(x) = alpha*x - beta*||x||^2*x (gamma = 3).
struct DoubleWellParams {
    double alpha = 1.0;
    double beta = 1.0;
};

using DriftFn = std::function<void(std::span<const double>, std::span<double>)>;
using PotentialFn = std::function<double(std::span<const double>)>;

/// A drift f = -grad U together with its growth exponent and whichever
/// structural constants are known. Immutable after construction; drift_eval
/// must be a pure function of x, so values are safe to share across workers.
struct DriftModel {
    std::string name;
    int dimension = 1;
    double gamma = 1.0;

    std::optional<double> a1;        // dissipativity <x,f(x)> <= -a1||x||^2 + a2
    std::optional<double> a2;
    std::optional<double> atilde1;   // contractivity at infinity
    std::optional<double> atilde2;
    std::optional<double> radius_R;
    std::optional<double> cf;        // drift bound constant

    DriftFn drift_eval;
    PotentialFn potential_eval;      // optional; empty if unknown

    std::optional<DoubleWellParams> double_well;  // set for the built-in family

    void drift(std::span<const double> x, std::span<double> out) const { drift_eval(x, out); }

    std::vector<double> drift_at(std::span<const double> x) const {
        std::vector<double> out(x.size());
        drift_eval(x, std::span<double>(out));
        return out;
    }

    bool has_dissipativity_constants() const { return a1.has_value() && a2.has_value(); }
    bool has_contractivity_constants() const {
        return atilde1.has_value() && atilde2.has_value() && radius_R.has_value();
    }
};

/// Outcome of one Monte Carlo assumption check. pass <=> violations == 0.
struct AssumptionReport {
    std::string assumption_id;
    std::int64_t samples = 0;
    std::int64_t violations = 0;
    double worst_margin = -std::numeric_limits<double>::infinity();
    bool pass = true;
};

namespace detail {

inline void validate_model_constants(const DriftModel& m) {
    if (m.dimension < 1) throw invalid_parameter_error("model dimension must be >= 1");
    if (m.gamma < 1.0) throw invalid_parameter_error("model gamma must be >= 1");
    if (m.a1 && *m.a1 <= 0.0) throw invalid_parameter_error("a1 must be positive");
    if (m.a2 && *m.a2 <= 0.0) throw invalid_parameter_error("a2 must be positive");
    if (m.has_contractivity_constants()) {
        if (!(*m.atilde1 > *m.atilde2 && *m.atilde2 > 0.0))
            throw invalid_parameter_error("contractivity constants need atilde1 > atilde2 > 0");
        if (*m.radius_R <= 0.0) throw invalid_parameter_error("radius_R must be positive");
    }
}

/// Uniform point in the d-ball of the given radius: gaussian direction scaled
/// by radius * U^{1/d}.
inline void uniform_in_ball(NoiseStream& stream, double radius, std::span<double> out) {
    stream.next_gaussian_vector(out);
    const double n = norm(out);
    const double u = stream.next_uniform01();
    const double r = radius * std::pow(u, 1.0 / static_cast<double>(out.size()));
    const double s = (n > 0.0) ? r / n : 0.0;
    for (double& v : out) v *= s;
}

} // namespace detail

/// Double-well model with drift alpha*x - beta*||x||^2*x. For alpha = beta = 1
/// the structural constants are known in closed form and auto-filled; other
/// parameterizations leave them unset for the caller to supply.
inline DriftModel make_double_well(double alpha, double beta, int d) {
    if (!(alpha > 0.0) || !(beta > 0.0))
        throw invalid_parameter_error("make_double_well: alpha and beta must be positive");
    if (d < 1) throw invalid_parameter_error("make_double_well: d must be >= 1");

    DriftModel m;
    m.name = "doublewell";
    m.dimension = d;
    m.gamma = 3.0;
    m.double_well = DoubleWellParams{alpha, beta};
    m.drift_eval = [alpha, beta](std::span<const double> x, std::span<double> out) {
        const double r2 = squared_norm(x);
        const double s = alpha - beta * r2;
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = s * x[i];
    };
    m.potential_eval = [alpha, beta](std::span<const double> x) {
        const double r2 = squared_norm(x);
        return beta * r2 * r2 / 4.0 - alpha * r2 / 2.0;
    };
    if (alpha == 1.0 && beta == 1.0) {
        m.a1 = 1.0;
        m.a2 = 1.0;
        m.atilde1 = 4.0 * std::sqrt(2.0) + 9.5;
        m.atilde2 = 0.5;
        m.radius_R = 16.0 + 20.0 * std::sqrt(2.0);
    }
    detail::validate_model_constants(m);
    return m;
}

/// Ornstein-Uhlenbeck model: f(x) = -x, U(x) = ||x||^2/2, stationary law
/// standard Gaussian. Lipschitz (gamma = 1) reference model. a2 is stored as
/// 1e-12 so the strict positivity required of dissipativity constants holds;
/// <x,-x> = -||x||^2 needs no slack.
inline DriftModel make_ou(int d) {
    if (d < 1) throw invalid_parameter_error("make_ou: d must be >= 1");
    DriftModel m;
    m.name = "ou";
    m.dimension = d;
    m.gamma = 1.0;
    m.a1 = 1.0;
    m.a2 = 1e-12;
    m.cf = 1.0;  // ||f(x)|| = ||x|| <= 1 * (1 + ||x||)
    m.drift_eval = [](std::span<const double> x, std::span<double> out) {
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = -x[i];
    };
    m.potential_eval = [](std::span<const double> x) { return 0.5 * squared_norm(x); };
    detail::validate_model_constants(m);
    return m;
}

/// Monte Carlo check of <x, f(x)> <= -a1||x||^2 + a2 over the ball of the
/// given radius. The condition is global; a bounded sampling region is all a
/// numeric check can do, so the radius is the caller's to choose (default
/// guidance: 10 for the double-well).
inline AssumptionReport check_dissipativity(const DriftModel& model, std::int64_t n_samples,
                                            double radius, std::uint64_t seed) {
    if (!model.has_dissipativity_constants())
        throw config_error("check_dissipativity: model has no a1/a2 constants");
    if (n_samples < 1) throw invalid_parameter_error("check_dissipativity: n_samples >= 1");

    const double a1 = *model.a1, a2 = *model.a2;
    const std::size_t d = static_cast<std::size_t>(model.dimension);
    AssumptionReport rep;
    rep.assumption_id = "dissipativity";
    rep.samples = n_samples;
    std::vector<double> x(d), fx(d);
    for (std::int64_t i = 0; i < n_samples; ++i) {
        NoiseStream s = derive_stream(seed, static_cast<std::uint64_t>(i));
        detail::uniform_in_ball(s, radius, x);
        model.drift(x, fx);
        const double margin = dot(x, fx) + a1 * squared_norm(x) - a2;
        if (margin > rep.worst_margin) rep.worst_margin = margin;
        if (margin > 0.0) ++rep.violations;
    }
    rep.pass = (rep.violations == 0);
    return rep;
}

/// Monte Carlo check of <x-y, f(x)-f(y)> <= (atilde1*1{||x-y||<=R} - atilde2)
/// ||x-y||^2 over pairs in the ball of the given radius (choose it large
/// enough that pairs straddle R).
inline AssumptionReport check_contractivity_at_infinity(const DriftModel& model,
                                                        std::int64_t n_pairs, double radius,
                                                        std::uint64_t seed) {
    if (!model.has_contractivity_constants())
        throw config_error("check_contractivity_at_infinity: model has no atilde1/atilde2/R");
    if (n_pairs < 1) throw invalid_parameter_error("check_contractivity_at_infinity: n_pairs >= 1");

    const double at1 = *model.atilde1, at2 = *model.atilde2, R = *model.radius_R;
    const std::size_t d = static_cast<std::size_t>(model.dimension);
    AssumptionReport rep;
    rep.assumption_id = "contractivity_at_infinity";
    rep.samples = n_pairs;
    std::vector<double> x(d), y(d), fx(d), fy(d), dxy(d), dfxy(d);
    for (std::int64_t i = 0; i < n_pairs; ++i) {
        NoiseStream s = derive_stream(seed, static_cast<std::uint64_t>(i));
        detail::uniform_in_ball(s, radius, x);
        detail::uniform_in_ball(s, radius, y);
        model.drift(x, fx);
        model.drift(y, fy);
        for (std::size_t k = 0; k < d; ++k) {
            dxy[k] = x[k] - y[k];
            dfxy[k] = fx[k] - fy[k];
        }
        const double sep2 = squared_norm(dxy);
        const double coeff = (std::sqrt(sep2) <= R ? at1 : 0.0) - at2;
        const double margin = dot(dxy, dfxy) - coeff * sep2;
        if (margin > rep.worst_margin) rep.worst_margin = margin;
        if (margin > 0.0) ++rep.violations;
    }
    rep.pass = (rep.violations == 0);
    return rep;
}

/// Monte Carlo check of the one-sided Lipschitz bound
/// <x-y, f(x)-f(y)> <= L ||x-y||^2.
inline AssumptionReport check_one_sided_lipschitz(const DriftModel& model, double L,
                                                  std::int64_t n_pairs, double radius,
                                                  std::uint64_t seed) {
    if (!(L > 0.0)) throw invalid_parameter_error("check_one_sided_lipschitz: L must be positive");
    if (n_pairs < 1) throw invalid_parameter_error("check_one_sided_lipschitz: n_pairs >= 1");

    const std::size_t d = static_cast<std::size_t>(model.dimension);
    AssumptionReport rep;
    rep.assumption_id = "one_sided_lipschitz";
    rep.samples = n_pairs;
    std::vector<double> x(d), y(d), fx(d), fy(d), dxy(d), dfxy(d);
    for (std::int64_t i = 0; i < n_pairs; ++i) {
        NoiseStream s = derive_stream(seed, static_cast<std::uint64_t>(i));
        detail::uniform_in_ball(s, radius, x);
        detail::uniform_in_ball(s, radius, y);
        model.drift(x, fx);
        model.drift(y, fy);
        for (std::size_t k = 0; k < d; ++k) {
            dxy[k] = x[k] - y[k];
            dfxy[k] = fx[k] - fy[k];
        }
        const double margin = dot(dxy, dfxy) - L * squared_norm(dxy);
        if (margin > rep.worst_margin) rep.worst_margin = margin;
        if (margin > 0.0) ++rep.violations;
    }
    rep.pass = (rep.violations == 0);
    return rep;
}

/// Gradient-consistency check for models carrying a potential: central finite
/// differences of U must match -f at random points with ||x|| <= 5,
/// delta = 1e-5 (1 + ||x||), to relative tolerance 1e-5.
inline AssumptionReport check_gradient_consistency(const DriftModel& model, std::int64_t n_points,
                                                   std::uint64_t seed) {
    if (!model.potential_eval)
        throw config_error("check_gradient_consistency: model has no potential");
    if (n_points < 1) throw invalid_parameter_error("check_gradient_consistency: n_points >= 1");

    const std::size_t d = static_cast<std::size_t>(model.dimension);
    AssumptionReport rep;
    rep.assumption_id = "gradient_consistency";
    rep.samples = n_points;
    std::vector<double> x(d), fx(d), xp(d), xm(d);
    for (std::int64_t i = 0; i < n_points; ++i) {
        NoiseStream s = derive_stream(seed, static_cast<std::uint64_t>(i));
        detail::uniform_in_ball(s, 5.0, x);
        model.drift(x, fx);
        const double delta = 1e-5 * (1.0 + norm(x));
        const double tol = 1e-5 * (1.0 + norm(fx));
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < d; ++k) {
            xp = x;
            xm = x;
            xp[k] += delta;
            xm[k] -= delta;
            const double grad_k =
                (model.potential_eval(xp) - model.potential_eval(xm)) / (2.0 * delta);
            worst = std::max(worst, std::fabs(fx[k] + grad_k) - tol);
        }
        if (worst > rep.worst_margin) rep.worst_margin = worst;
        if (worst > 0.0) ++rep.violations;
    }
    rep.pass = (rep.violations == 0);
    return rep;
}

/// Numeric estimate of the drift bound constant C_f:
///   gamma > 1: max over h in h_grid and radii r in [0, theta (d/h)^{1/2gamma}]
///              of max_{||x||=r} ||f(x)|| / (theta^gamma d^{1/2} h^{-1/2});
///   gamma = 1: max over probed x of ||f(x)|| / (1 + ||x||), radii on a fixed
///              log grid up to 1e6 so the supremum is approached from below.
/// Radial maxima are probed on the coordinate axes plus 64 random directions
/// per radius (512 radii per h). Deterministic: probe directions use a fixed
/// internal seed.
inline double estimate_cf(const DriftModel& model, std::span<const double> h_grid, double theta) {
    if (h_grid.empty()) throw invalid_parameter_error("estimate_cf: empty h grid");
    for (double h : h_grid)
        if (!(h > 0.0 && h < 1.0)) throw invalid_parameter_error("estimate_cf: h must be in (0,1)");
    if (!(theta >= 1.0)) throw invalid_parameter_error("estimate_cf: theta must be >= 1");

    constexpr int kRadii = 512;
    constexpr int kRandomDirs = 64;
    constexpr std::uint64_t kProbeSeed = 0x5eedcf5eedcf5eedULL;

    const std::size_t d = static_cast<std::size_t>(model.dimension);
    const double dd = static_cast<double>(model.dimension);
    std::vector<double> x(d), fx(d), dir(d);

    const auto probe_radius = [&](double r, double denom, std::uint64_t dir_seed,
                                  double& best) {
        // axis-aligned probes
        for (std::size_t axis = 0; axis < d; ++axis) {
            std::fill(x.begin(), x.end(), 0.0);
            x[axis] = r;
            model.drift(x, fx);
            best = std::max(best, norm(fx) / denom);
        }
        // random directions
        NoiseStream s = derive_stream(kProbeSeed, dir_seed);
        for (int j = 0; j < kRandomDirs; ++j) {
            s.next_gaussian_vector(std::span<double>(dir));
            const double n = norm(dir);
            if (n == 0.0) continue;
            for (std::size_t k = 0; k < d; ++k) x[k] = dir[k] * (r / n);
            model.drift(x, fx);
            best = std::max(best, norm(fx) / denom);
        }
    };

    double best = 0.0;
    if (model.gamma > 1.0) {
        std::uint64_t dir_seed = 0;
        for (double h : h_grid) {
            const double cap = theta * std::pow(dd / h, 1.0 / (2.0 * model.gamma));
            const double denom = std::pow(theta, model.gamma) * std::sqrt(dd / h);
            for (int k = 0; k < kRadii; ++k) {
                const double r = cap * static_cast<double>(k) / (kRadii - 1);
                probe_radius(r, denom, dir_seed++, best);
            }
        }
    } else {
        // gamma = 1: ratio ||f(x)||/(1+||x||), independent of h.
        std::uint64_t dir_seed = 0;
        for (int k = 0; k < kRadii; ++k) {
            const double r = std::pow(10.0, -6.0 + 12.0 * static_cast<double>(k) / (kRadii - 1));
            std::fill(x.begin(), x.end(), 0.0);
            x[0] = r;
            model.drift(x, fx);
            const double denom = 1.0 + r;
            best = std::max(best, norm(fx) / denom);
            NoiseStream s = derive_stream(kProbeSeed, dir_seed++);
            for (int j = 0; j < kRandomDirs; ++j) {
                s.next_gaussian_vector(std::span<double>(dir));
                const double n = norm(dir);
                if (n == 0.0) continue;
                for (std::size_t kk = 0; kk < d; ++kk) x[kk] = dir[kk] * (r / n);
                model.drift(x, fx);
                best = std::max(best, norm(fx) / (1.0 + norm(x)));
            }
        }
    }
    return best;
}

/// Step-size admissibility window from the scheme's uniform moment bound:
/// h must lie below min{1/(2 a1), 2 a1/(a1 + 2 C_f^2), 1}.
inline double admissible_h_max(const DriftModel& model) {
    if (!model.a1 || !model.cf)
        throw config_error("admissible_h_max: model needs a1 and cf set");
    const double a1 = *model.a1, cf = *model.cf;
    return std::min({1.0 / (2.0 * a1), 2.0 * a1 / (a1 + 2.0 * cf * cf), 1.0});
}

} // namespace plmc
