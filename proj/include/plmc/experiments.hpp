#pragma once

// Experiment drivers: convergence study, density comparison, dimension
// dependence, assumption/property verification, raw sampling, and the
// mixing-time planner. Each driver returns an ExperimentReport whose
// serialized form is byte-identical across reruns and worker counts.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "plmc/errors.hpp"
#include "plmc/metrics.hpp"
#include "plmc/model.hpp"
#include "plmc/projection.hpp"
#include "plmc/report.hpp"
#include "plmc/rng.hpp"
#include "plmc/samplers.hpp"

namespace plmc {

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Mixing-time planner
// ---------------------------------------------------------------------------

/// The constants C, C*, c* are existential (no concrete values are known);
/// the planner takes them as explicit inputs, defaulting to 1, and its output
/// is meaningful up to those unknown constants.
struct MixingConstants {
    double C = 1.0;
    double C_star = 1.0;
    double c_star = 1.0;
    double phi_norm = 1.0;      // ||phi||_0
    double x0_mean_norm = 0.0;  // E||x0||
};

struct MixingPlan {
    double epsilon = 0.0;
    double gamma = 1.0;
    int d = 1;
    MixingConstants constants;
    double h = 0.0;
    std::int64_t iterations = 0;
};

/// Step-size and iteration budget for an epsilon-accurate (TV, paper
/// convention) approximation of the target:
///   gamma > 1: h = [4C (d^q/eps) ln(2C d^q/eps)]^{-1}, q = max{3g/2, 2g-1};
///   gamma = 1: h = eps/(2C d^{3/2});
///   k = ceil((1/(c* h)) ln(2 C* ||phi||_0 (1 + E||x0||)/eps)), at least 1.
inline MixingPlan plan_mixing(double epsilon, double gamma, int d, const MixingConstants& k) {
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw invalid_parameter_error("plan_mixing: epsilon must lie in (0,1)");
    if (!(gamma >= 1.0)) throw invalid_parameter_error("plan_mixing: gamma must be >= 1");
    if (d < 1) throw invalid_parameter_error("plan_mixing: d must be >= 1");
    if (!(k.C > 0.0 && k.C_star > 0.0 && k.c_star > 0.0 && k.phi_norm > 0.0))
        throw invalid_parameter_error("plan_mixing: constants must be positive");
    if (k.x0_mean_norm < 0.0)
        throw invalid_parameter_error("plan_mixing: E||x0|| must be >= 0");

    MixingPlan plan;
    plan.epsilon = epsilon;
    plan.gamma = gamma;
    plan.d = d;
    plan.constants = k;
    const double dd = static_cast<double>(d);
    if (gamma > 1.0) {
        const double q = std::max(1.5 * gamma, 2.0 * gamma - 1.0);
        const double arg = 2.0 * k.C * std::pow(dd, q) / epsilon;
        if (!(arg > 1.0))
            throw invalid_parameter_error(
                "plan_mixing: outside the planning regime (2 C d^q / eps must exceed 1)");
        plan.h = 1.0 / (4.0 * k.C * (std::pow(dd, q) / epsilon) * std::log(arg));
    } else {
        plan.h = epsilon / (2.0 * k.C * std::pow(dd, 1.5));
    }
    const double need = std::log(2.0 * k.C_star * k.phi_norm * (1.0 + k.x0_mean_norm) / epsilon);
    const double raw = need / (k.c_star * plan.h);
    plan.iterations = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(raw)));
    return plan;
}

// ---------------------------------------------------------------------------
// Experiment specification
// ---------------------------------------------------------------------------

struct ExperimentSpec {
    enum class Kind { Sample, Converge, Density, DimDep, Verify, Mixing };

    Kind kind = Kind::Converge;
    std::string model = "doublewell";
    double alpha = 1.0;
    double beta = 4.0;
    std::vector<int> dims;       // empty: per-kind default
    std::vector<double> h_grid;  // strictly decreasing; empty: per-kind default
    double h_ref = 0.0;          // 0: scale default (2^-11 desk, 2^-13 paper)
    double T = 6.0;
    std::int64_t iterations = 0;  // 0: derive N = T/h (dimdep default: 80)
    std::int64_t n_traj = 0;      // 0: per-kind/scale default
    double theta = 1.0;
    std::uint64_t seed = 42;
    bool paper_scale = false;
    bool independent_ref = false;
    Scheme scheme = Scheme::PLMC;  // sample subcommand only
    double x0_value = 0.0;         // sample: x0 = value * ones(d)
    std::string out_path;
    std::string format = "csv";
    std::string dump_path;
    int n_threads = 0;
    // mixing only:
    double mix_epsilon = 0.1;
    double mix_gamma = 1.0;
    MixingConstants mix_constants;
};

inline std::string experiment_kind_name(ExperimentSpec::Kind k) {
    switch (k) {
        case ExperimentSpec::Kind::Sample: return "sample";
        case ExperimentSpec::Kind::Converge: return "converge";
        case ExperimentSpec::Kind::Density: return "density";
        case ExperimentSpec::Kind::DimDep: return "dimdep";
        case ExperimentSpec::Kind::Verify: return "verify";
        case ExperimentSpec::Kind::Mixing: return "mixing";
    }
    return "?";
}

namespace detail {

inline double dyadic(int neg_power) { return std::ldexp(1.0, -neg_power); }

inline std::int64_t integral_steps(double T, double h, const char* what) {
    const double ratio = T / h;
    const double rounded = std::round(ratio);
    if (!(rounded >= 1.0) || std::fabs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
        throw invalid_parameter_error(std::string(what) + ": T/h must be a positive integer");
    return static_cast<std::int64_t>(rounded);
}

inline void require_decreasing(const std::vector<double>& grid, const char* what) {
    if (grid.empty()) throw invalid_parameter_error(std::string(what) + ": empty h grid");
    for (double h : grid)
        if (!(h > 0.0 && h < 1.0))
            throw invalid_parameter_error(std::string(what) + ": h values must lie in (0,1)");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] < grid[i - 1]))
            throw invalid_parameter_error(std::string(what) + ": h grid must be strictly decreasing");
}

inline DriftModel make_model(const ExperimentSpec& spec, int d) {
    if (spec.model == "doublewell") return make_double_well(spec.alpha, spec.beta, d);
    if (spec.model == "ou") return make_ou(d);
    throw invalid_parameter_error("unknown model: " + spec.model);
}

/// Per-kind/scale defaults, resolved once so reports can echo the exact
/// configuration they ran with.
inline ExperimentSpec resolve_defaults(const ExperimentSpec& in) {
    ExperimentSpec s = in;
    const bool paper = s.paper_scale;
    if (s.h_ref == 0.0) s.h_ref = paper ? dyadic(13) : dyadic(11);
    switch (s.kind) {
        case ExperimentSpec::Kind::Converge:
            if (s.dims.empty()) s.dims = {6};
            if (s.h_grid.empty()) s.h_grid = {dyadic(5), dyadic(6), dyadic(7), dyadic(8), dyadic(9)};
            if (s.n_traj == 0) s.n_traj = paper ? 3000 : 1000;
            break;
        case ExperimentSpec::Kind::Density:
            if (s.dims.empty()) s.dims = {10};
            if (s.h_grid.empty()) s.h_grid = {paper ? dyadic(13) : dyadic(9)};
            if (s.n_traj == 0) s.n_traj = 3000;
            break;
        case ExperimentSpec::Kind::DimDep:
            s.model = "doublewell";
            s.alpha = 1.0;  // the dimension study is pinned to alpha = beta = 1
            s.beta = 1.0;
            if (s.dims.empty()) s.dims = {10, 20, 50, 100};
            if (s.h_grid.empty()) s.h_grid = {dyadic(4)};
            if (s.iterations == 0) s.iterations = 80;
            if (s.n_traj == 0) s.n_traj = paper ? 3000 : 1000;
            break;
        case ExperimentSpec::Kind::Verify:
            if (s.dims.empty()) s.dims = {10};
            if (s.n_traj == 0) s.n_traj = 1000;
            break;
        case ExperimentSpec::Kind::Sample:
            if (s.dims.empty()) s.dims = {10};
            if (s.h_grid.empty()) s.h_grid = {dyadic(9)};
            if (s.n_traj == 0) s.n_traj = 1000;
            break;
        case ExperimentSpec::Kind::Mixing:
            if (s.dims.empty()) s.dims = {1};
            break;
    }
    std::sort(s.dims.begin(), s.dims.end());
    return s;
}

inline std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt17(v[i]);
    return out;
}

inline std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

inline void stamp_common_meta(ExperimentReport& rep, const ExperimentSpec& s) {
    rep.add_meta("version", kVersion);
    rep.add_meta("model", s.model);
    if (s.model == "doublewell") {
        rep.add_meta("alpha", fmt17(s.alpha));
        rep.add_meta("beta", fmt17(s.beta));
    }
    rep.add_meta("d", join_ints(s.dims));
    rep.add_meta("seed", std::to_string(s.seed));
    rep.add_meta("theta", fmt17(s.theta));
    rep.add_meta("scale", s.paper_scale ? "paper" : "desk");
    rep.add_meta("phi2_gap_fill", "0.25");
}

struct CellRun {
    Ensemble coarse;
    bool failed = false;  // > 1% of trajectories diverged
};

inline bool cell_failed(const Ensemble& e) {
    return static_cast<double>(e.diverged_count) >
           0.01 * static_cast<double>(e.config.n_trajectories);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Convergence study (Tables 1-4 shape)
// ---------------------------------------------------------------------------

inline ExperimentReport run_convergence(const ExperimentSpec& raw) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentSpec s = detail::resolve_defaults(raw);
    if (s.kind != ExperimentSpec::Kind::Converge)
        throw invalid_parameter_error("run_convergence: spec kind mismatch");
    detail::require_decreasing(s.h_grid, "run_convergence");
    if (!(s.h_ref > 0.0)) throw invalid_parameter_error("run_convergence: h_ref must be positive");

    ExperimentReport rep;
    rep.kind = "converge";
    detail::stamp_common_meta(rep, s);
    rep.add_meta("T", fmt17(s.T));
    rep.add_meta("h_grid", detail::join_doubles(s.h_grid));
    rep.add_meta("h_ref", fmt17(s.h_ref));
    rep.add_meta("traj", std::to_string(s.n_traj));
    rep.add_meta("reference", s.independent_ref ? "independent" : "coupled");

    const std::vector<TestFunction> phis = paper_test_functions();
    std::int64_t total_divergences = 0;
    std::vector<std::pair<int, double>> failed;
    bool dumped = false;

    for (int d : s.dims) {
        const DriftModel model = detail::make_model(s, d);

        SamplerConfig ref_cfg;
        ref_cfg.scheme = Scheme::Reference;
        ref_cfg.model = model;
        ref_cfg.h = s.h_ref;
        ref_cfg.n_steps = detail::integral_steps(s.T, s.h_ref, "run_convergence (h_ref)");
        ref_cfg.theta = s.theta;
        ref_cfg.n_trajectories = s.n_traj;
        ref_cfg.master_seed = s.independent_ref ? (s.seed ^ kIndependentRefSeedOffset) : s.seed;
        ref_cfg.n_threads = s.n_threads;
        const Ensemble reference = run_ensemble(ref_cfg);
        total_divergences += reference.diverged_count;
        if (!s.dump_path.empty() && !dumped) {
            dump_ensemble_csv(reference, s.dump_path);
            dumped = true;
        }

        for (double h : s.h_grid) {
            SamplerConfig cfg;
            cfg.scheme = Scheme::PLMC;
            cfg.model = model;
            cfg.h = h;
            cfg.n_steps = detail::integral_steps(s.T, h, "run_convergence");
            cfg.theta = s.theta;
            cfg.n_trajectories = s.n_traj;
            cfg.master_seed = s.seed;
            cfg.n_threads = s.n_threads;
            if (!s.independent_ref) {
                cfg.coupled_reference = true;
                cfg.h_ref = s.h_ref;
            }
            const Ensemble coarse = run_ensemble(cfg);
            total_divergences += coarse.diverged_count;
            if (detail::cell_failed(coarse)) {
                rep.any_cell_failed = true;
                failed.emplace_back(d, h);
            }
            for (const TestFunction& phi : phis) {
                const ErrorRecord rec = weak_error(coarse, reference, phi);
                ReportRow row;
                row.scheme = scheme_name(Scheme::PLMC);
                row.model = model.name;
                if (model.double_well) {
                    row.alpha = model.double_well->alpha;
                    row.beta = model.double_well->beta;
                }
                row.d = d;
                row.h = h;
                row.phi = phi.name;
                row.estimate = rec.estimate;
                row.reference = rec.reference;
                row.abs_error = rec.abs_error;
                row.std_error = rec.std_error;
                rep.rows.push_back(row);
            }
        }

        // Per-phi order fits over the h grid (failed cells excluded).
        const auto is_failed = [&failed](int dd, double hh) {
            for (const auto& [fd, fh] : failed)
                if (fd == dd && fh == hh) return true;
            return false;
        };
        for (const TestFunction& phi : phis) {
            std::vector<std::pair<double, double>> points;
            for (const ReportRow& row : rep.rows) {
                if (row.d != d || row.phi != phi.name) continue;
                if (is_failed(row.d, row.h)) continue;
                if (row.abs_error > 0.0) points.emplace_back(row.h, row.abs_error);
            }
            if (points.size() < 2) continue;  // fit skipped (degenerate grid)
            const OrderFit fit = fit_order(points);
            const std::string label =
                (s.dims.size() == 1) ? phi.name : phi.name + "@d" + std::to_string(d);
            rep.orders.push_back({label, fit.slope, fit.residual_rms});
        }
    }

    std::string failed_cells;
    for (const auto& [fd, fh] : failed) {
        if (!failed_cells.empty()) failed_cells += ";";
        failed_cells += std::to_string(fd) + ":" + fmt17(fh);
    }
    rep.add_meta("divergences", std::to_string(total_divergences));
    rep.add_meta("failed_cells", failed_cells.empty() ? "none" : failed_cells);
    rep.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

// ---------------------------------------------------------------------------
// Density comparison (Figure 1 shape): PLMC vs MTLMC histograms + KS
// ---------------------------------------------------------------------------

inline ExperimentReport run_density(const ExperimentSpec& raw) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentSpec s = detail::resolve_defaults(raw);
    if (s.kind != ExperimentSpec::Kind::Density)
        throw invalid_parameter_error("run_density: spec kind mismatch");
    if (s.model != "doublewell")
        throw invalid_parameter_error("run_density: model must be the double-well");
    detail::require_decreasing(s.h_grid, "run_density");
    const double h = s.h_grid.front();
    const int d = s.dims.front();

    ExperimentReport rep;
    rep.kind = "density";
    detail::stamp_common_meta(rep, s);
    rep.add_meta("T", fmt17(s.T));
    rep.add_meta("h", fmt17(h));
    rep.add_meta("traj", std::to_string(s.n_traj));

    const DriftModel model = detail::make_model(s, d);
    SamplerConfig cfg;
    cfg.model = model;
    cfg.h = h;
    cfg.n_steps = detail::integral_steps(s.T, h, "run_density");
    cfg.theta = s.theta;
    cfg.n_trajectories = s.n_traj;
    cfg.master_seed = s.seed;
    cfg.n_threads = s.n_threads;

    cfg.scheme = Scheme::PLMC;
    const Ensemble plmc = run_ensemble(cfg);
    cfg.scheme = Scheme::MTLMC;
    const Ensemble mtlmc = run_ensemble(cfg);
    if (!s.dump_path.empty()) dump_ensemble_csv(plmc, s.dump_path);
    rep.any_cell_failed = detail::cell_failed(plmc) || detail::cell_failed(mtlmc);
    rep.add_meta("divergences", std::to_string(plmc.diverged_count + mtlmc.diverged_count));

    const auto first_coords = [](const Ensemble& e) {
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(e.size()));
        for (std::int64_t i = 0; i < e.size(); ++i)
            if (!e.trajectory_diverged(i)) out.push_back(e.state(i)[0]);
        return out;
    };
    const std::vector<double> xs_plmc = first_coords(plmc);
    const std::vector<double> xs_mtlmc = first_coords(mtlmc);
    if (xs_plmc.empty() || xs_mtlmc.empty())
        throw estimation_error("run_density: a scheme lost every trajectory to divergence");

    double lo = xs_plmc.front(), hi = xs_plmc.front();
    for (double v : xs_plmc) { lo = std::min(lo, v); hi = std::max(hi, v); }
    for (double v : xs_mtlmc) { lo = std::min(lo, v); hi = std::max(hi, v); }
    constexpr int kBins = 80;
    for (const auto& [center, density] : histogram(xs_plmc, kBins, lo, hi))
        rep.hist.push_back({"PLMC", center, density});
    for (const auto& [center, density] : histogram(xs_mtlmc, kBins, lo, hi))
        rep.hist.push_back({"MTLMC", center, density});

    const double ks = ks_statistic(xs_plmc, xs_mtlmc);
    CheckRow ksrow;
    ksrow.id = "density_ks_first_coordinate";
    ksrow.samples = static_cast<std::int64_t>(xs_plmc.size() + xs_mtlmc.size());
    ksrow.worst_margin = ks - 0.05;
    ksrow.violations = (ksrow.worst_margin > 0.0) ? 1 : 0;
    ksrow.pass = (ksrow.violations == 0);
    rep.checks.push_back(ksrow);
    if (!ksrow.pass) rep.any_check_failed = true;
    rep.add_meta("ks_first_coordinate", fmt17(ks));

    rep.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

// ---------------------------------------------------------------------------
// Dimension dependence (Table 5 shape)
// ---------------------------------------------------------------------------

inline ExperimentReport run_dimdep(const ExperimentSpec& raw) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentSpec s = detail::resolve_defaults(raw);
    if (s.kind != ExperimentSpec::Kind::DimDep)
        throw invalid_parameter_error("run_dimdep: spec kind mismatch");
    detail::require_decreasing(s.h_grid, "run_dimdep");
    if (s.h_grid.size() != 1)
        throw invalid_parameter_error("run_dimdep: exactly one h required");
    const double h = s.h_grid.front();
    const std::int64_t n_steps = s.iterations;
    if (n_steps < 1) throw invalid_parameter_error("run_dimdep: iterations must be >= 1");

    ExperimentReport rep;
    rep.kind = "dimdep";
    detail::stamp_common_meta(rep, s);
    rep.add_meta("h", fmt17(h));
    rep.add_meta("iterations", std::to_string(n_steps));
    rep.add_meta("h_ref", fmt17(s.h_ref));
    rep.add_meta("traj", std::to_string(s.n_traj));
    rep.add_meta("reference", s.independent_ref ? "independent" : "coupled");

    const std::vector<TestFunction> phis = paper_test_functions();
    std::int64_t total_divergences = 0;
    std::vector<std::pair<int, double>> failed;
    bool dumped = false;

    for (int d : s.dims) {
        const DriftModel model = detail::make_model(s, d);
        SamplerConfig cfg;
        cfg.scheme = Scheme::PLMC;
        cfg.model = model;
        cfg.h = h;
        cfg.n_steps = n_steps;
        cfg.theta = s.theta;
        cfg.n_trajectories = s.n_traj;
        cfg.master_seed = s.seed;
        cfg.n_threads = s.n_threads;
        if (!s.independent_ref) {
            cfg.coupled_reference = true;
            cfg.h_ref = s.h_ref;
        }
        const Ensemble coarse = run_ensemble(cfg);
        const Ensemble reference = run_reference(cfg, s.h_ref);
        total_divergences += coarse.diverged_count + reference.diverged_count;
        if (!s.dump_path.empty() && !dumped) {
            dump_ensemble_csv(reference, s.dump_path);
            dumped = true;
        }
        if (detail::cell_failed(coarse)) {
            rep.any_cell_failed = true;
            failed.emplace_back(d, h);
        }
        for (const TestFunction& phi : phis) {
            const ErrorRecord rec = weak_error(coarse, reference, phi);
            ReportRow row;
            row.scheme = scheme_name(Scheme::PLMC);
            row.model = model.name;
            row.alpha = s.alpha;
            row.beta = s.beta;
            row.d = d;
            row.h = h;
            row.phi = phi.name;
            row.estimate = rec.estimate;
            row.reference = rec.reference;
            row.abs_error = rec.abs_error;
            row.std_error = rec.std_error;
            rep.rows.push_back(row);
        }
    }

    // Dimension slopes: ln(error) against ln(d), one fit per phi.
    const auto is_failed = [&failed](int dd, double hh) {
        for (const auto& [fd, fh] : failed)
            if (fd == dd && fh == hh) return true;
        return false;
    };
    for (const TestFunction& phi : phis) {
        std::vector<std::pair<double, double>> points;
        for (const ReportRow& row : rep.rows) {
            if (row.phi != phi.name) continue;
            if (is_failed(row.d, row.h)) continue;
            if (row.abs_error > 0.0)
                points.emplace_back(static_cast<double>(row.d), row.abs_error);
        }
        if (points.size() < 2) continue;
        const OrderFit fit = fit_order(points);
        rep.orders.push_back({phi.name, fit.slope, fit.residual_rms});
    }

    std::string failed_cells;
    for (const auto& [fd, fh] : failed) {
        if (!failed_cells.empty()) failed_cells += ";";
        failed_cells += std::to_string(fd) + ":" + fmt17(fh);
    }
    rep.add_meta("divergences", std::to_string(total_divergences));
    rep.add_meta("failed_cells", failed_cells.empty() ? "none" : failed_cells);
    rep.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

// ---------------------------------------------------------------------------
// Verification suite (assumptions + scheme/metric properties as CHECK rows)
// ---------------------------------------------------------------------------

namespace detail {

inline CheckRow band_check(const std::string& id, double value, double lo, double hi,
                           std::int64_t samples) {
    CheckRow c;
    c.id = id;
    c.samples = samples;
    c.worst_margin = std::max(lo - value, value - hi);
    c.violations = (c.worst_margin > 0.0) ? 1 : 0;
    c.pass = (c.violations == 0);
    return c;
}

inline CheckRow report_check(const std::string& id, const AssumptionReport& a) {
    CheckRow c;
    c.id = id;
    c.samples = a.samples;
    c.violations = a.violations;
    c.worst_margin = a.worst_margin;
    c.pass = a.pass;
    return c;
}

/// Random rotation via Gram-Schmidt of a Gaussian matrix (deterministic given
/// the stream).
inline std::vector<double> random_rotation(NoiseStream& stream, std::size_t d) {
    std::vector<double> q(d * d);
    stream.next_gaussian_vector(std::span<double>(q));
    for (std::size_t col = 0; col < d; ++col) {
        for (std::size_t prev = 0; prev < col; ++prev) {
            double proj = 0.0;
            for (std::size_t r = 0; r < d; ++r) proj += q[r * d + col] * q[r * d + prev];
            for (std::size_t r = 0; r < d; ++r) q[r * d + col] -= proj * q[r * d + prev];
        }
        double nrm = 0.0;
        for (std::size_t r = 0; r < d; ++r) nrm += q[r * d + col] * q[r * d + col];
        nrm = std::sqrt(nrm);
        if (nrm == 0.0) { q[col * d + col] = 1.0; nrm = 1.0; }  // measure-zero fallback
        for (std::size_t r = 0; r < d; ++r) q[r * d + col] /= nrm;
    }
    return q;
}

inline void apply_matrix(const std::vector<double>& q, std::span<const double> x,
                         std::span<double> out) {
    const std::size_t d = x.size();
    for (std::size_t r = 0; r < d; ++r) {
        double s = 0.0;
        for (std::size_t cidx = 0; cidx < d; ++cidx) s += q[r * d + cidx] * x[cidx];
        out[r] = s;
    }
}

} // namespace detail

inline ExperimentReport run_verify(const ExperimentSpec& raw) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentSpec s = detail::resolve_defaults(raw);
    if (s.kind != ExperimentSpec::Kind::Verify)
        throw invalid_parameter_error("run_verify: spec kind mismatch");
    const int d0 = s.dims.front();
    const std::uint64_t seed = s.seed;

    ExperimentReport rep;
    rep.kind = "verify";
    detail::stamp_common_meta(rep, s);
    const double h_fine = s.h_ref > 0.0 ? s.h_ref : (s.paper_scale ? detail::dyadic(13) : detail::dyadic(11));
    rep.add_meta("h_fine", fmt17(h_fine));

    const DriftModel dw = make_double_well(1.0, 1.0, d0);
    const DriftModel ou = make_ou(d0);

    // --- structural assumption checks (documented sampling radii) ---
    rep.checks.push_back(detail::report_check(
        "dw_dissipativity", check_dissipativity(dw, 100000, 10.0, seed + 1)));
    rep.checks.push_back(detail::report_check(
        "dw_contractivity_at_infinity",
        check_contractivity_at_infinity(dw, 100000, 60.0, seed + 2)));
    rep.checks.push_back(detail::report_check(
        "dw_one_sided_lipschitz", check_one_sided_lipschitz(dw, 1.0, 100000, 60.0, seed + 3)));
    rep.checks.push_back(detail::report_check(
        "ou_one_sided_lipschitz", check_one_sided_lipschitz(ou, 1.0, 100000, 60.0, seed + 4)));
    rep.checks.push_back(detail::report_check(
        "dw_gradient_consistency", check_gradient_consistency(dw, 100, seed + 5)));
    rep.checks.push_back(detail::report_check(
        "ou_gradient_consistency", check_gradient_consistency(ou, 100, seed + 6)));

    // --- projection invariants ---
    {
        const std::vector<double> gammas = {1.5, 3.0};
        const std::vector<int> dims = {2, 8, 32};
        const std::vector<double> hs = {detail::dyadic(3), detail::dyadic(6), detail::dyadic(9)};
        CheckRow norms{"projection_norm_bounds", 0, 0, -std::numeric_limits<double>::infinity(), true};
        CheckRow idem{"projection_idempotence", 0, 0, 0.0, true};
        CheckRow lip{"projection_lipschitz", 0, 0, -std::numeric_limits<double>::infinity(), true};
        const std::int64_t per_cell = 10000 / static_cast<std::int64_t>(
                                          gammas.size() * dims.size() * hs.size()) + 1;
        std::uint64_t case_idx = 0;
        for (double g : gammas)
            for (int dd : dims)
                for (double h : hs) {
                    const ProjectionParams pp{g, s.theta, dd, h};
                    const double cap = pp.cap_radius();
                    std::vector<double> x(static_cast<std::size_t>(dd));
                    std::vector<double> y(static_cast<std::size_t>(dd));
                    for (std::int64_t k = 0; k < per_cell; ++k) {
                        NoiseStream st = derive_stream(seed + 10, case_idx++);
                        detail::uniform_in_ball(st, 3.0 * cap, x);
                        detail::uniform_in_ball(st, 3.0 * cap, y);
                        const std::vector<double> px = project(x, pp);
                        const std::vector<double> py = project(y, pp);
                        // norm bounds
                        const double m1 = norm(px) - std::min(norm(x), cap);
                        norms.worst_margin = std::max(norms.worst_margin, m1);
                        if (m1 > 0.0) ++norms.violations;
                        ++norms.samples;
                        // exact idempotence
                        const std::vector<double> ppx = project(px, pp);
                        if (ppx != px) ++idem.violations;
                        ++idem.samples;
                        // 1-Lipschitz (nonexpansive) within 1e-12
                        std::vector<double> dxy(x.size()), dpxy(x.size());
                        for (std::size_t j = 0; j < x.size(); ++j) {
                            dxy[j] = x[j] - y[j];
                            dpxy[j] = px[j] - py[j];
                        }
                        const double m3 = norm(dpxy) - norm(dxy) - 1e-12;
                        lip.worst_margin = std::max(lip.worst_margin, m3);
                        if (m3 > 0.0) ++lip.violations;
                        ++lip.samples;
                    }
                }
        norms.pass = norms.violations == 0;
        idem.pass = idem.violations == 0;
        lip.pass = lip.violations == 0;
        rep.checks.push_back(norms);
        rep.checks.push_back(idem);
        rep.checks.push_back(lip);
    }
    {
        // orthogonal equivariance: P(Qx) = Q P(x) within 1e-10 (1 + ||x||)
        CheckRow eq{"projection_equivariance", 0, 0, -std::numeric_limits<double>::infinity(), true};
        const std::vector<int> dims = {2, 8};
        for (int dd : dims) {
            const ProjectionParams pp{3.0, s.theta, dd, detail::dyadic(5)};
            std::vector<double> x(static_cast<std::size_t>(dd)), qx(x.size()), pqx(x.size()),
                qpx(x.size());
            for (std::int64_t k = 0; k < 5000; ++k) {
                NoiseStream st = derive_stream(seed + 11, static_cast<std::uint64_t>(dd) * 100000 +
                                                              static_cast<std::uint64_t>(k));
                detail::uniform_in_ball(st, 3.0 * pp.cap_radius(), x);
                const std::vector<double> q = detail::random_rotation(st, x.size());
                detail::apply_matrix(q, x, std::span<double>(qx));
                const std::vector<double> p_qx = project(qx, pp);
                const std::vector<double> px = project(x, pp);
                detail::apply_matrix(q, px, std::span<double>(qpx));
                std::vector<double> diff(x.size());
                for (std::size_t j = 0; j < x.size(); ++j) diff[j] = p_qx[j] - qpx[j];
                const double m = norm(diff) - 1e-10 * (1.0 + norm(x));
                eq.worst_margin = std::max(eq.worst_margin, m);
                if (m > 0.0) ++eq.violations;
                ++eq.samples;
            }
        }
        eq.pass = eq.violations == 0;
        rep.checks.push_back(eq);
    }
    {
        // projection-error lemma: ||x - P(x)|| <= 2 theta^{-4g} d^{-2} h^2 ||x||^{4g+1}
        CheckRow lem{"projection_error_lemma", 0, 0, -std::numeric_limits<double>::infinity(), true};
        const std::vector<double> gammas = {1.5, 3.0};
        const std::vector<int> dims = {2, 8, 32};
        std::uint64_t case_idx = 0;
        for (double g : gammas)
            for (int dd : dims)
                for (int k = 3; k <= 9; ++k) {
                    const double h = detail::dyadic(k);
                    const ProjectionParams pp{g, s.theta, dd, h};
                    const double cap = pp.cap_radius();
                    const double bound_coeff =
                        2.0 * std::pow(s.theta, -4.0 * g) * std::pow(static_cast<double>(dd), -2.0) *
                        h * h;
                    std::vector<double> x(static_cast<std::size_t>(dd));
                    for (std::int64_t c = 0; c < 10000; ++c) {
                        NoiseStream st = derive_stream(seed + 12, case_idx++);
                        detail::uniform_in_ball(st, 4.0 * cap, x);
                        const std::vector<double> px = project(x, pp);
                        std::vector<double> diff(x.size());
                        for (std::size_t j = 0; j < x.size(); ++j) diff[j] = x[j] - px[j];
                        const double nx = norm(x);
                        const double rhs = bound_coeff * std::pow(nx, 4.0 * g + 1.0);
                        const double m = norm(diff) - rhs;
                        lem.worst_margin = std::max(lem.worst_margin, m);
                        if (m > 0.0) ++lem.violations;
                        ++lem.samples;
                    }
                }
        lem.pass = lem.violations == 0;
        rep.checks.push_back(lem);
    }

    // --- scheme coincidence: PLMC == LMC bit-for-bit when gamma = 1 ---
    {
        CheckRow co{"plmc_lmc_coincidence_gamma1", 0, 0, 0.0, true};
        const DriftModel ou5 = make_ou(5);
        NoiseStream st = derive_stream(seed + 13, 0);
        std::vector<double> y1(5, 0.7), y2(5, 0.7);
        for (int n = 0; n < 1000; ++n) {
            const std::vector<double> xi = st.next_gaussian_vector(5);
            y1 = plmc_step(y1, ou5, detail::dyadic(4), s.theta, xi);
            y2 = lmc_step(y2, ou5, detail::dyadic(4), xi);
            if (y1 != y2) ++co.violations;
            ++co.samples;
        }
        co.pass = co.violations == 0;
        rep.checks.push_back(co);
    }

    // --- moment boundedness + instability contrast (Lemma 3.4 behavior) ---
    {
        SamplerConfig cfg;
        cfg.scheme = Scheme::PLMC;
        cfg.model = make_double_well(1.0, 1.0, 10);
        cfg.h = 0.125;
        cfg.n_steps = 800;
        cfg.n_trajectories = 2000;
        cfg.master_seed = seed;
        cfg.checkpoint_every = 1;
        cfg.checkpoint_store_states = false;
        cfg.n_threads = s.n_threads;
        const Ensemble e = run_ensemble(cfg);

        CheckRow fin{"plmc_moments_finite", e.size(), e.diverged_count,
                     static_cast<double>(e.diverged_count), e.diverged_count == 0};
        rep.checks.push_back(fin);

        // Lyapunov sequence m_n = mean (1 + ||Y_n||^2)^2, second-half slope
        std::vector<double> vals;
        std::vector<std::pair<double, double>> seq;
        const std::size_t n_ck = e.checkpoint_sqnorms.size();
        for (std::size_t k = n_ck / 2; k < n_ck; ++k) {
            vals.clear();
            for (std::int64_t i = 0; i < e.size(); ++i) {
                if (e.trajectory_diverged(i)) continue;
                const double q = e.checkpoint_sqnorms[k][static_cast<std::size_t>(i)];
                vals.push_back((1.0 + q) * (1.0 + q));
            }
            seq.emplace_back(static_cast<double>(e.checkpoint_steps[k]), pairwise_mean(vals));
        }
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (const auto& [x, y] : seq) { sx += x; sy += y; sxx += x * x; sxy += x * y; }
        const double n = static_cast<double>(seq.size());
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        rep.checks.push_back(detail::band_check("plmc_lyapunov_trend_slope", slope, -1e-3, 1e-3,
                                                static_cast<std::int64_t>(seq.size())));

        // matched instability contrast from x0 = 10 * ones
        SamplerConfig bad = cfg;
        bad.checkpoint_every = 0;
        bad.x0.assign(10, 10.0);
        bad.scheme = Scheme::LMC;
        const Ensemble lmc = run_ensemble(bad);
        const double frac =
            static_cast<double>(lmc.diverged_count) / static_cast<double>(lmc.size());
        CheckRow ub{"lmc_divergence_contrast", lmc.size(), lmc.size() - lmc.diverged_count,
                    0.95 - frac, frac >= 0.95};
        rep.checks.push_back(ub);

        bad.scheme = Scheme::PLMC;
        const Ensemble plmc_matched = run_ensemble(bad);
        CheckRow ok{"plmc_matched_all_finite", plmc_matched.size(), plmc_matched.diverged_count,
                    static_cast<double>(plmc_matched.diverged_count),
                    plmc_matched.diverged_count == 0};
        rep.checks.push_back(ok);
    }

    // --- increment scaling: E||Y_{n+1} - P(Y_n)||^2 ~ 2hd ---
    {
        std::vector<std::pair<double, double>> points;
        for (int k = 5; k <= 9; ++k) {
            const double h = detail::dyadic(k);
            SamplerConfig cfg;
            cfg.scheme = Scheme::PLMC;
            cfg.model = make_double_well(1.0, 1.0, 10);
            cfg.h = h;
            cfg.n_steps = detail::integral_steps(4.0, h, "run_verify (increments)");
            cfg.n_trajectories = 2000;
            cfg.master_seed = seed;
            cfg.n_threads = s.n_threads;
            const Ensemble e = run_ensemble(cfg);
            const ProjectionParams pp = projection_params(cfg);
            std::vector<double> vals;
            vals.reserve(static_cast<std::size_t>(e.size()));
            std::vector<double> fx(10), xi(10);
            for (std::int64_t i = 0; i < e.size(); ++i) {
                if (e.trajectory_diverged(i)) continue;
                std::vector<double> p(e.state(i).begin(), e.state(i).end());
                project_in_place(std::span<double>(p), pp);
                cfg.model.drift(p, fx);
                NoiseStream st =
                    derive_stream(seed ^ 0x696e637273746570ULL, static_cast<std::uint64_t>(i));
                st.next_gaussian_vector(std::span<double>(xi));
                double acc = 0.0;
                const double s2h = std::sqrt(2.0 * h);
                for (std::size_t j = 0; j < 10; ++j) {
                    const double inc = fx[j] * h + s2h * xi[j];
                    acc += inc * inc;
                }
                vals.push_back(acc);
            }
            points.emplace_back(h, pairwise_mean(vals));
        }
        const OrderFit fit = fit_order(points);
        rep.checks.push_back(detail::band_check("increment_scaling_slope", fit.slope, 0.8, 1.2,
                                                static_cast<std::int64_t>(points.size())));
    }

    // --- SDE-surrogate moment inequality (Lemma 3.1) ---
    for (int dd : {4, 10}) {
        SamplerConfig cfg;
        cfg.scheme = Scheme::Reference;
        cfg.model = make_double_well(1.0, 1.0, dd);
        cfg.h = h_fine;
        cfg.n_steps = detail::integral_steps(4.0, h_fine, "run_verify (surrogate)");
        cfg.n_trajectories = s.n_traj;
        cfg.master_seed = seed;
        cfg.checkpoint_every = detail::integral_steps(1.0, h_fine, "run_verify (surrogate)");
        cfg.checkpoint_store_states = false;
        cfg.n_threads = s.n_threads;
        const Ensemble e = run_ensemble(cfg);
        for (std::size_t k : {std::size_t{0}, std::size_t{1}, std::size_t{3}}) {
            const double t = static_cast<double>(e.checkpoint_steps[k]) * h_fine;
            std::vector<double> vals;
            for (std::int64_t i = 0; i < e.size(); ++i) {
                if (e.trajectory_diverged(i)) continue;
                vals.push_back(e.checkpoint_sqnorms[k][static_cast<std::size_t>(i)]);
            }
            const double mean = pairwise_mean(vals);
            const double se = std::sqrt(pairwise_sample_variance(vals, mean) /
                                        static_cast<double>(vals.size()));
            const double bound = sde_moment_bound(1, 1.0, 1.0, 1.0, dd, t, 0.0);
            CheckRow c;
            c.id = "sde_moment_bound_d" + std::to_string(dd) + "_t" +
                   std::to_string(static_cast<int>(std::lround(t)));
            c.samples = static_cast<std::int64_t>(vals.size());
            c.worst_margin = mean - bound - 3.0 * se;
            c.violations = (c.worst_margin > 0.0) ? 1 : 0;
            c.pass = c.violations == 0;
            rep.checks.push_back(c);
        }
    }

    // --- TV ergodicity decay (paper-convention lower bound) ---
    {
        SamplerConfig cfg;
        cfg.scheme = Scheme::PLMC;
        cfg.model = make_double_well(1.0, 1.0, 4);
        cfg.h = detail::dyadic(6);
        cfg.n_steps = 512;  // T = 8
        cfg.n_trajectories = 2000;
        cfg.master_seed = seed;
        cfg.checkpoint_every = 64;  // physical times 1..8
        cfg.n_threads = s.n_threads;
        const Ensemble from_origin = run_ensemble(cfg);
        cfg.x0.assign(4, 5.0);
        cfg.master_seed = seed + 77;  // independent start
        const Ensemble from_far = run_ensemble(cfg);
        const std::vector<TestFunction> phis = paper_test_functions();
        CheckRow c{"tv_paper_convention_decay", 0, 0, -std::numeric_limits<double>::infinity(),
                   true};
        double prev = 0.0, prev_se = 0.0;
        bool first = true;
        for (std::size_t k : {std::size_t{0}, std::size_t{1}, std::size_t{3}, std::size_t{7}}) {
            const TvBound tv = tv_lower_bound_detail(from_far, from_origin, phis,
                                                     static_cast<int>(k));
            if (!first) {
                const double tol =
                    2.0 * std::sqrt(tv.std_error * tv.std_error + prev_se * prev_se);
                const double m = tv.value - prev - tol;
                c.worst_margin = std::max(c.worst_margin, m);
                if (m > 0.0) ++c.violations;
            }
            first = false;
            prev = tv.value;
            prev_se = tv.std_error;
            ++c.samples;
        }
        c.pass = c.violations == 0;
        rep.checks.push_back(c);
    }

    // --- metric sanity: sup bounds, radiality, oracle monotonicity, fits ---
    {
        CheckRow sup{"test_function_sup_bounds", 0, 0, -std::numeric_limits<double>::infinity(),
                     true};
        const std::vector<TestFunction> phis = paper_test_functions();
        std::vector<double> x(3);
        for (std::int64_t k = 0; k < 10000; ++k) {
            NoiseStream st = derive_stream(seed + 14, static_cast<std::uint64_t>(k));
            detail::uniform_in_ball(st, 8.0, x);
            for (const TestFunction& phi : phis) {
                const double m = std::fabs(phi(x)) - phi.sup_norm;
                sup.worst_margin = std::max(sup.worst_margin, m);
                if (m > 0.0) ++sup.violations;
                ++sup.samples;
            }
        }
        sup.pass = sup.violations == 0;
        rep.checks.push_back(sup);

        CheckRow rad{"test_function_radiality", 0, 0, 0.0, true};
        const TestFunction p1 = make_test_function(TestFunctionId::Phi1);
        const TestFunction p2 = make_test_function(TestFunctionId::Phi2);
        std::vector<double> x6(6), qx6(6);
        for (std::int64_t k = 0; k < 1000; ++k) {
            NoiseStream st = derive_stream(seed + 15, static_cast<std::uint64_t>(k));
            detail::uniform_in_ball(st, 5.0, x6);
            const std::vector<double> q = detail::random_rotation(st, 6);
            detail::apply_matrix(q, x6, std::span<double>(qx6));
            const double m =
                std::max(std::fabs(p1(qx6) - p1(x6)), std::fabs(p2(qx6) - p2(x6)));
            rad.worst_margin = std::max(rad.worst_margin, m);
            if (m > 0.0) ++rad.violations;
            ++rad.samples;
        }
        rad.pass = rad.violations == 0;
        rep.checks.push_back(rad);

        CheckRow mono{"gaussian_tv_oracle_monotone", 0, 0,
                      -std::numeric_limits<double>::infinity(), true};
        double last = 0.0;
        for (double ratio : {1.1, 1.2, 1.5, 2.0}) {
            const double v = gaussian_tv_oracle(1.0, ratio);
            const double m = last - v;
            mono.worst_margin = std::max(mono.worst_margin, m);
            if (m > 0.0) ++mono.violations;
            ++mono.samples;
            last = v;
        }
        mono.pass = mono.violations == 0;
        rep.checks.push_back(mono);

        std::vector<std::pair<double, double>> synth;
        for (int k = 2; k <= 7; ++k) {
            const double h = detail::dyadic(k);
            synth.emplace_back(h, 3.0 * std::pow(h, 1.7));
        }
        const OrderFit fit = fit_order(synth);
        rep.checks.push_back(detail::band_check("fit_order_synthetic_recovery", fit.slope,
                                                1.7 - 1e-10, 1.7 + 1e-10,
                                                static_cast<std::int64_t>(synth.size())));
    }

    // --- mixing-plan invariant over random tuples ---
    {
        CheckRow mix{"mixing_plan_invariant", 0, 0, -std::numeric_limits<double>::infinity(),
                     true};
        NoiseStream st = derive_stream(seed + 16, 0);
        for (int k = 0; k < 1000; ++k) {
            MixingConstants mc;
            mc.C = 0.5 + 4.5 * st.next_uniform01();
            mc.C_star = 0.5 + 4.5 * st.next_uniform01();
            mc.c_star = 0.5 + 4.5 * st.next_uniform01();
            mc.phi_norm = 0.5 + 1.5 * st.next_uniform01();
            mc.x0_mean_norm = 5.0 * st.next_uniform01();
            const double eps = 0.01 + 0.49 * st.next_uniform01();
            const double gamma = (k % 2 == 0) ? 1.0 : 1.0 + 3.0 * st.next_uniform01();
            const int dd = 1 + static_cast<int>(st.next_uniform01() * 20.0);
            const MixingPlan plan = plan_mixing(eps, gamma, dd, mc);
            const double need =
                std::log(2.0 * mc.C_star * mc.phi_norm * (1.0 + mc.x0_mean_norm) / eps) /
                mc.c_star;
            const double m = need - static_cast<double>(plan.iterations) * plan.h;
            mix.worst_margin = std::max(mix.worst_margin, m);
            if (m > 1e-12) ++mix.violations;
            // halving epsilon must not decrease the budget
            const MixingPlan plan2 = plan_mixing(eps / 2.0, gamma, dd, mc);
            if (plan2.iterations < plan.iterations) ++mix.violations;
            ++mix.samples;
        }
        mix.pass = mix.violations == 0;
        rep.checks.push_back(mix);
    }

    for (const CheckRow& c : rep.checks)
        if (!c.pass) rep.any_check_failed = true;
    rep.add_meta("checks", std::to_string(rep.checks.size()));
    rep.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

// ---------------------------------------------------------------------------
// Raw sampling + mixing drivers
// ---------------------------------------------------------------------------

inline ExperimentReport run_sample(const ExperimentSpec& raw, Ensemble* out_ensemble = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentSpec s = detail::resolve_defaults(raw);
    if (s.kind != ExperimentSpec::Kind::Sample)
        throw invalid_parameter_error("run_sample: spec kind mismatch");
    detail::require_decreasing(s.h_grid, "run_sample");
    if (s.h_grid.size() != 1) throw invalid_parameter_error("run_sample: exactly one h required");
    const double h = s.h_grid.front();
    const int d = s.dims.front();

    SamplerConfig cfg;
    cfg.scheme = s.scheme;
    cfg.model = detail::make_model(s, d);
    cfg.h = h;
    cfg.n_steps = s.iterations > 0 ? s.iterations : detail::integral_steps(s.T, h, "run_sample");
    cfg.theta = s.theta;
    if (s.x0_value != 0.0) cfg.x0.assign(static_cast<std::size_t>(d), s.x0_value);
    cfg.n_trajectories = s.n_traj;
    cfg.master_seed = s.seed;
    cfg.n_threads = s.n_threads;
    const Ensemble e = run_ensemble(cfg);
    if (!s.dump_path.empty()) dump_ensemble_csv(e, s.dump_path);

    ExperimentReport rep;
    rep.kind = "sample";
    detail::stamp_common_meta(rep, s);
    rep.add_meta("scheme", scheme_name(s.scheme));
    rep.add_meta("h", fmt17(h));
    rep.add_meta("steps", std::to_string(cfg.n_steps));
    rep.add_meta("traj", std::to_string(s.n_traj));
    rep.add_meta("divergences", std::to_string(e.diverged_count));
    CheckRow c{"divergence_free", e.size(), e.diverged_count,
               static_cast<double>(e.diverged_count), e.diverged_count == 0};
    rep.checks.push_back(c);
    rep.any_cell_failed = e.diverged_count > 0;
    if (out_ensemble) *out_ensemble = e;
    rep.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

inline ExperimentReport run_mixing(const ExperimentSpec& raw, MixingPlan* out_plan = nullptr) {
    ExperimentSpec s = detail::resolve_defaults(raw);
    if (s.kind != ExperimentSpec::Kind::Mixing)
        throw invalid_parameter_error("run_mixing: spec kind mismatch");
    const MixingPlan plan = plan_mixing(s.mix_epsilon, s.mix_gamma, s.dims.front(), s.mix_constants);
    ExperimentReport rep;
    rep.kind = "mixing";
    rep.add_meta("version", kVersion);
    rep.add_meta("epsilon", fmt17(plan.epsilon));
    rep.add_meta("gamma", fmt17(plan.gamma));
    rep.add_meta("d", std::to_string(plan.d));
    rep.add_meta("C", fmt17(plan.constants.C));
    rep.add_meta("Cstar", fmt17(plan.constants.C_star));
    rep.add_meta("cstar", fmt17(plan.constants.c_star));
    rep.add_meta("phi_norm", fmt17(plan.constants.phi_norm));
    rep.add_meta("x0_mean_norm", fmt17(plan.constants.x0_mean_norm));
    rep.add_meta("h", fmt17(plan.h));
    rep.add_meta("iterations", std::to_string(plan.iterations));
    rep.add_meta("note", "up_to_unknown_constants");
    if (out_plan) *out_plan = plan;
    return rep;
}

/// Kind-based dispatch used by the CLI.
inline ExperimentReport run_experiment(const ExperimentSpec& spec) {
    switch (spec.kind) {
        case ExperimentSpec::Kind::Sample: return run_sample(spec);
        case ExperimentSpec::Kind::Converge: return run_convergence(spec);
        case ExperimentSpec::Kind::Density: return run_density(spec);
        case ExperimentSpec::Kind::DimDep: return run_dimdep(spec);
        case ExperimentSpec::Kind::Verify: return run_verify(spec);
        case ExperimentSpec::Kind::Mixing: return run_mixing(spec);
    }
    throw invalid_parameter_error("run_experiment: unknown kind");
}

} // namespace plmc
