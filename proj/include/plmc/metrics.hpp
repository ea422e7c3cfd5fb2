#pragma once

// Estimators and oracles: bounded test functions, expectation / weak error /
// TV lower-bound estimators over ensembles, moment tracking, a Gaussian TV
// oracle, the two-sample KS statistic, order fitting, and histograms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "plmc/errors.hpp"
#include "plmc/samplers.hpp"
#include "plmc/vec.hpp"

namespace plmc {

enum class TestFunctionId { Phi1, ExpNegNorm, Phi2, AtanNorm, Const, User };

struct TestFunction {
    TestFunctionId id = TestFunctionId::User;
    std::string name;
    double sup_norm = 1.0;
    std::function<double(std::span<const double>)> eval;

    double operator()(std::span<const double> x) const { return eval(x); }
};

/// The paper's bounded test-function menu. phi1 is the indicator of
/// ||x|| in (0,1/2) u (3/2,2) u (5/2,3) u (7/2,4); phi2 is the step function
/// with the stated case list, extended over its omitted band ||x|| in [5/2,3)
/// by the preceding value 1/4 so the function is total (reports flag this).
inline TestFunction make_test_function(TestFunctionId id) {
    TestFunction t;
    t.id = id;
    switch (id) {
        case TestFunctionId::Phi1:
            t.name = "phi1";
            t.sup_norm = 1.0;
            t.eval = [](std::span<const double> x) {
                const double r = norm(x);
                const bool in = (r > 0.0 && r < 0.5) || (r > 1.5 && r < 2.0) ||
                                (r > 2.5 && r < 3.0) || (r > 3.5 && r < 4.0);
                return in ? 1.0 : 0.0;
            };
            return t;
        case TestFunctionId::ExpNegNorm:
            t.name = "exp_neg_norm";
            t.sup_norm = 1.0;
            t.eval = [](std::span<const double> x) { return std::exp(-norm(x)); };
            return t;
        case TestFunctionId::Phi2:
            t.name = "phi2";
            t.sup_norm = 1.0;
            t.eval = [](std::span<const double> x) {
                const double r = norm(x);
                if (r < 0.5) return 0.0;
                if (r < 1.0) return 1.0;
                if (r < 1.5) return 0.5;
                if (r < 2.0) return -1.0;
                if (r < 3.0) return 0.25;  // includes the gap band [5/2, 3)
                if (r < 3.5) return 1.0 / 3.0;
                if (r < 4.0) return -1.0 / 3.0;
                return -0.5;
            };
            return t;
        case TestFunctionId::AtanNorm:
            t.name = "atan_norm";
            t.sup_norm = std::numbers::pi / 2.0;
            t.eval = [](std::span<const double> x) { return std::atan(norm(x)); };
            return t;
        case TestFunctionId::Const:
            t.name = "const";
            t.sup_norm = 1.0;
            t.eval = [](std::span<const double>) { return 1.0; };
            return t;
        case TestFunctionId::User:
            throw invalid_parameter_error("make_test_function: USER needs explicit construction");
    }
    throw invalid_parameter_error("make_test_function: unknown id");
}

inline TestFunction make_user_test_function(std::string name, double sup_norm,
                                            std::function<double(std::span<const double>)> fn) {
    if (!(sup_norm > 0.0))
        throw invalid_parameter_error("make_user_test_function: sup_norm must be positive");
    return TestFunction{TestFunctionId::User, std::move(name), sup_norm, std::move(fn)};
}

/// The paper's four table columns, in column order.
inline std::vector<TestFunction> paper_test_functions() {
    return {make_test_function(TestFunctionId::Phi1), make_test_function(TestFunctionId::ExpNegNorm),
            make_test_function(TestFunctionId::Phi2), make_test_function(TestFunctionId::AtanNorm)};
}

struct Expectation {
    double mean = 0.0;
    double std_error = 0.0;
    std::int64_t used = 0;
    std::int64_t excluded = 0;
};

namespace detail {

/// Mean/SE of phi over the rows of an M x d array, excluding trajectories
/// whose divergence step is <= the state's step index. Summation is pairwise
/// in trajectory order, so serial and parallel callers agree bitwise.
inline Expectation expectation_over(const Ensemble& e, const std::vector<double>& states,
                                    std::int64_t state_step, const TestFunction& phi) {
    const std::size_t d = static_cast<std::size_t>(e.dimension());
    const std::int64_t m = e.size();
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(m));
    std::int64_t excluded = 0;
    for (std::int64_t i = 0; i < m; ++i) {
        const std::int64_t div = e.divergence_step[static_cast<std::size_t>(i)];
        if (div >= 0 && div <= state_step) {
            ++excluded;
            continue;
        }
        std::span<const double> row(states.data() + static_cast<std::size_t>(i) * d, d);
        values.push_back(phi(row));
    }
    if (values.empty())
        throw estimation_error("estimate_expectation: every trajectory diverged");
    Expectation r;
    r.used = static_cast<std::int64_t>(values.size());
    r.excluded = excluded;
    r.mean = pairwise_mean(values);
    r.std_error = (values.size() > 1)
                      ? std::sqrt(pairwise_sample_variance(values, r.mean) /
                                  static_cast<double>(values.size()))
                      : 0.0;
    return r;
}

} // namespace detail

/// Sample mean and standard error of phi over terminal states; diverged
/// trajectories are excluded and counted.
inline Expectation estimate_expectation(const Ensemble& e, const TestFunction& phi) {
    if (e.size() < 1) throw invalid_parameter_error("estimate_expectation: empty ensemble");
    return detail::expectation_over(e, e.terminal, e.config.n_steps, phi);
}

/// Same estimator at a stored checkpoint (full states required).
inline Expectation estimate_expectation_at(const Ensemble& e, std::size_t checkpoint_index,
                                           const TestFunction& phi) {
    if (checkpoint_index >= e.checkpoint_states.size() ||
        e.checkpoint_states[checkpoint_index].empty())
        throw invalid_parameter_error("estimate_expectation_at: checkpoint states not stored");
    return detail::expectation_over(e, e.checkpoint_states[checkpoint_index],
                                    e.checkpoint_steps[checkpoint_index], phi);
}

struct ErrorRecord {
    std::string phi;
    double h = 0.0;
    int d = 0;
    double estimate = 0.0;
    double reference = 0.0;
    double abs_error = 0.0;   // |estimate - reference| exactly
    double std_error = 0.0;   // Monte Carlo SE (per-trajectory differences when coupled)
};

namespace detail {

inline bool ensembles_coupled(const Ensemble& coarse, const Ensemble& reference) {
    return coarse.config.coupled_reference &&
           coarse.config.master_seed == reference.config.master_seed &&
           coarse.config.n_trajectories == reference.config.n_trajectories &&
           coarse.config.h_ref == reference.config.h;
}

} // namespace detail

/// Weak error |E phi(Y_N) - E phi(X_T)| against the fine-step surrogate.
/// Both ensembles must sit at the same physical time. When the runs are
/// coupled the standard error comes from per-trajectory differences.
inline ErrorRecord weak_error(const Ensemble& coarse, const Ensemble& reference,
                              const TestFunction& phi) {
    if (coarse.dimension() != reference.dimension())
        throw invalid_parameter_error("weak_error: dimension mismatch");
    const double tc = coarse.physical_time(), tr = reference.physical_time();
    if (std::fabs(tc - tr) > 1e-9 * std::max(1.0, tc))
        throw invalid_parameter_error("weak_error: ensembles at different physical times");

    const Expectation ec = estimate_expectation(coarse, phi);
    const Expectation er = estimate_expectation(reference, phi);
    ErrorRecord rec;
    rec.phi = phi.name;
    rec.h = coarse.config.h;
    rec.d = coarse.dimension();
    rec.estimate = ec.mean;
    rec.reference = er.mean;
    rec.abs_error = std::fabs(ec.mean - er.mean);

    if (detail::ensembles_coupled(coarse, reference)) {
        const std::size_t d = static_cast<std::size_t>(coarse.dimension());
        std::vector<double> diffs;
        diffs.reserve(static_cast<std::size_t>(coarse.size()));
        for (std::int64_t i = 0; i < coarse.size(); ++i) {
            if (coarse.trajectory_diverged(i) || reference.trajectory_diverged(i)) continue;
            std::span<const double> yc(coarse.terminal.data() + static_cast<std::size_t>(i) * d, d);
            std::span<const double> yr(reference.terminal.data() + static_cast<std::size_t>(i) * d,
                                       d);
            diffs.push_back(phi(yc) - phi(yr));
        }
        if (diffs.size() > 1) {
            const double mean_diff = pairwise_mean(diffs);
            rec.std_error = std::sqrt(pairwise_sample_variance(diffs, mean_diff) /
                                      static_cast<double>(diffs.size()));
        }
    } else {
        rec.std_error = std::sqrt(ec.std_error * ec.std_error + er.std_error * er.std_error);
    }
    return rec;
}

struct TvBound {
    double value = 0.0;
    double std_error = 0.0;  // SE of the maximizing competitor's difference
    std::string arg_phi;
};

namespace detail {

inline TvBound tv_bound_over(const Ensemble& a, const Ensemble& b,
                             std::span<const TestFunction> phis, int checkpoint /*-1 terminal*/) {
    if (a.dimension() != b.dimension())
        throw invalid_parameter_error("tv_lower_bound: dimension mismatch");
    if (phis.empty()) throw invalid_parameter_error("tv_lower_bound: empty test-function set");
    TvBound best;
    for (const TestFunction& phi : phis) {
        const double scale = (phi.sup_norm > 1.0) ? 1.0 / phi.sup_norm : 1.0;
        const Expectation ea = (checkpoint < 0)
                                   ? estimate_expectation(a, phi)
                                   : estimate_expectation_at(a, static_cast<std::size_t>(checkpoint), phi);
        const Expectation eb = (checkpoint < 0)
                                   ? estimate_expectation(b, phi)
                                   : estimate_expectation_at(b, static_cast<std::size_t>(checkpoint), phi);
        const double v = scale * std::fabs(ea.mean - eb.mean);
        if (v >= best.value) {
            best.value = v;
            best.std_error = scale * std::sqrt(ea.std_error * ea.std_error +
                                               eb.std_error * eb.std_error);
            best.arg_phi = phi.name;
        }
    }
    return best;
}

} // namespace detail

/// Lower bound on the paper-convention TV distance (range [0,2]) between the
/// laws behind two ensembles: max over the bounded competitors of
/// |E_a phi - E_b phi|, with any sup_norm > 1 competitor rescaled to 1
/// (arctan enters as (2/pi) arctan).
inline double tv_lower_bound(const Ensemble& a, const Ensemble& b,
                             std::span<const TestFunction> phis) {
    return detail::tv_bound_over(a, b, phis, -1).value;
}

inline TvBound tv_lower_bound_detail(const Ensemble& a, const Ensemble& b,
                                     std::span<const TestFunction> phis, int checkpoint = -1) {
    return detail::tv_bound_over(a, b, phis, checkpoint);
}

/// Per-checkpoint sample means of ||Y_n||^{2p}; diverged trajectories drop
/// out from the first checkpoint at or after their divergence step.
inline std::vector<std::pair<std::int64_t, double>> moment_curve(const Ensemble& e, int p) {
    if (p < 1) throw invalid_parameter_error("moment_curve: p must be >= 1");
    if (e.checkpoint_sqnorms.empty())
        throw invalid_parameter_error("moment_curve: ensemble has no checkpoints");
    std::vector<std::pair<std::int64_t, double>> out;
    out.reserve(e.checkpoint_sqnorms.size());
    std::vector<double> values;
    for (std::size_t k = 0; k < e.checkpoint_sqnorms.size(); ++k) {
        const std::int64_t step = e.checkpoint_steps[k];
        values.clear();
        for (std::int64_t i = 0; i < e.size(); ++i) {
            const std::int64_t div = e.divergence_step[static_cast<std::size_t>(i)];
            if (div >= 0 && div <= step) continue;
            const double q = e.checkpoint_sqnorms[k][static_cast<std::size_t>(i)];
            double v = 1.0;
            for (int j = 0; j < p; ++j) v *= q;
            values.push_back(v);
        }
        if (values.empty()) throw estimation_error("moment_curve: every trajectory diverged");
        out.emplace_back(step, pairwise_mean(values));
    }
    return out;
}

/// Closed-form SDE moment bound: e^{-cpt} m0 +
/// ((4p-2+2a2)^p / p) ((p-1)/((2a1-c)p))^{p-1} d^p, with 0^0 = 1 at p = 1.
inline double sde_moment_bound(int p, double c, double a1, double a2, int d, double t, double m0) {
    if (p < 1) throw invalid_parameter_error("sde_moment_bound: p must be >= 1");
    if (!(a1 > 0.0)) throw invalid_parameter_error("sde_moment_bound: a1 must be positive");
    if (!(c > 0.0 && c < 2.0 * a1))
        throw invalid_parameter_error("sde_moment_bound: c must lie in (0, 2 a1)");
    if (a2 < 0.0) throw invalid_parameter_error("sde_moment_bound: a2 must be >= 0");
    if (d < 1) throw invalid_parameter_error("sde_moment_bound: d must be >= 1");
    if (t < 0.0) throw invalid_parameter_error("sde_moment_bound: t must be >= 0");
    if (m0 < 0.0) throw invalid_parameter_error("sde_moment_bound: m0 must be >= 0");
    const double pd = static_cast<double>(p);
    const double head = std::exp(-c * pd * t) * m0;
    const double lead = std::pow(4.0 * pd - 2.0 + 2.0 * a2, pd) / pd;
    const double mid = std::pow((pd - 1.0) / ((2.0 * a1 - c) * pd), pd - 1.0);  // 0^0 = 1
    return head + lead * mid * std::pow(static_cast<double>(d), pd);
}

namespace detail {

inline double gaussian_pdf(double x, double sigma) {
    const double z = x / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

template <typename F>
double adaptive_simpson_rec(const F& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double tol) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, 52);
}

} // namespace detail

/// TV distance, paper convention (= integral of |density difference|, range
/// [0,2]), between N(0, sigma_a^2) and N(0, sigma_b^2) on the line, by
/// adaptive Simpson integration to absolute tolerance 1e-10. The integrand's
/// kink (the density crossing) is isolated as a panel boundary.
inline double gaussian_tv_oracle(double sigma_a, double sigma_b) {
    if (!(sigma_a > 0.0) || !(sigma_b > 0.0))
        throw invalid_parameter_error("gaussian_tv_oracle: sigmas must be positive");
    if (sigma_a == sigma_b) return 0.0;
    const auto f = [&](double x) {
        return std::fabs(detail::gaussian_pdf(x, sigma_a) - detail::gaussian_pdf(x, sigma_b));
    };
    const double L = 10.0 * std::max(sigma_a, sigma_b);
    // densities cross at x*^2 = 2 ln(sb/sa) / (1/sa^2 - 1/sb^2)
    const double num = 2.0 * std::log(sigma_b / sigma_a);
    const double den = 1.0 / (sigma_a * sigma_a) - 1.0 / (sigma_b * sigma_b);
    double half = 0.0;
    const double cross2 = num / den;
    if (cross2 > 0.0 && std::sqrt(cross2) < L) {
        const double xc = std::sqrt(cross2);
        half = detail::adaptive_simpson(f, 0.0, xc, 2.5e-11) +
               detail::adaptive_simpson(f, xc, L, 2.5e-11);
    } else {
        half = detail::adaptive_simpson(f, 0.0, L, 5e-11);
    }
    return 2.0 * half;
}

/// Two-sample Kolmogorov-Smirnov statistic (sup distance of empirical CDFs).
inline double ks_statistic(std::span<const double> samples_a, std::span<const double> samples_b) {
    if (samples_a.empty() || samples_b.empty())
        throw invalid_parameter_error("ks_statistic: samples must be nonempty");
    std::vector<double> a(samples_a.begin(), samples_a.end());
    std::vector<double> b(samples_b.begin(), samples_b.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double t = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= t) ++i;
        while (j < b.size() && b[j] <= t) ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

struct OrderFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual_rms = 0.0;
    std::int64_t points_used = 0;
};

/// Least squares of ln(error) on ln(h); the slope is the reported order.
/// Zero errors are excluded with a warning; negative entries are invalid.
inline OrderFit fit_order(std::span<const std::pair<double, double>> points) {
    std::vector<double> xs, ys;
    for (const auto& [h, err] : points) {
        if (!(h > 0.0)) throw invalid_parameter_error("fit_order: h values must be positive");
        if (err < 0.0) throw invalid_parameter_error("fit_order: errors must be non-negative");
        if (err == 0.0) {
            std::cerr << "warning: fit_order dropping zero error at h = " << h << "\n";
            continue;
        }
        xs.push_back(std::log(h));
        ys.push_back(std::log(err));
    }
    if (xs.size() < 2)
        throw invalid_parameter_error("fit_order: need at least 2 positive points");
    const double n = static_cast<double>(xs.size());
    double xbar = 0.0, ybar = 0.0;
    for (double v : xs) xbar += v;
    for (double v : ys) ybar += v;
    xbar /= n;
    ybar /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        sxx += (xs[k] - xbar) * (xs[k] - xbar);
        sxy += (xs[k] - xbar) * (ys[k] - ybar);
    }
    if (sxx == 0.0) throw invalid_parameter_error("fit_order: degenerate abscissa");
    OrderFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = ybar - fit.slope * xbar;
    fit.points_used = static_cast<std::int64_t>(xs.size());
    double ss = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const double r = ys[k] - (fit.intercept + fit.slope * xs[k]);
        ss += r * r;
    }
    fit.residual_rms = std::sqrt(ss / n);
    return fit;
}

/// Equal-width histogram; densities are count/(N * width) with N the total
/// sample count, so the densities integrate to the in-range mass fraction.
inline std::vector<std::pair<double, double>> histogram(std::span<const double> samples, int bins,
                                                        double lo, double hi) {
    if (bins < 1) throw invalid_parameter_error("histogram: bins must be >= 1");
    if (!(lo < hi)) throw invalid_parameter_error("histogram: need lo < hi");
    const double width = (hi - lo) / static_cast<double>(bins);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(bins), 0);
    for (double s : samples) {
        if (!(s >= lo && s <= hi)) continue;
        auto idx = static_cast<std::int64_t>((s - lo) / width);
        idx = std::min<std::int64_t>(idx, bins - 1);
        ++counts[static_cast<std::size_t>(idx)];
    }
    const double total = static_cast<double>(samples.size());
    std::vector<std::pair<double, double>> out;
    out.reserve(static_cast<std::size_t>(bins));
    for (int k = 0; k < bins; ++k) {
        const double center = lo + (static_cast<double>(k) + 0.5) * width;
        const double density =
            (total > 0.0) ? static_cast<double>(counts[static_cast<std::size_t>(k)]) / (total * width)
                          : 0.0;
        out.emplace_back(center, density);
    }
    return out;
}

} // namespace plmc
