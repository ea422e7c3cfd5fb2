#pragma once

// Sampling kernels (projected / plain / tamed Euler-Maruyama) and the
// deterministic parallel ensemble runner. Noise is keyed by trajectory index,
// so results are byte-identical for any worker count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "plmc/errors.hpp"
#include "plmc/model.hpp"
#include "plmc/projection.hpp"
#include "plmc/rng.hpp"
#include "plmc/vec.hpp"

namespace plmc {

enum class Scheme { LMC, PLMC, MTLMC, Reference };

inline std::string scheme_name(Scheme s) {
    switch (s) {
        case Scheme::LMC: return "LMC";
        case Scheme::PLMC: return "PLMC";
        case Scheme::MTLMC: return "MTLMC";
        case Scheme::Reference: return "REFERENCE";
    }
    return "?";
}

inline Scheme parse_scheme(const std::string& s) {
    if (s == "LMC" || s == "lmc") return Scheme::LMC;
    if (s == "PLMC" || s == "plmc") return Scheme::PLMC;
    if (s == "MTLMC" || s == "mtlmc") return Scheme::MTLMC;
    if (s == "REFERENCE" || s == "reference") return Scheme::Reference;
    throw invalid_parameter_error("unknown scheme: " + s);
}

/// A state is treated as diverged once any coordinate is non-finite or the
/// norm exceeds 1e150; this catches overflow before it poisons reductions.
inline constexpr double kDivergenceNorm = 1e150;

inline bool is_diverged(std::span<const double> x) {
    if (!all_finite(x)) return true;
    return squared_norm(x) > kDivergenceNorm * kDivergenceNorm;
}

struct SamplerConfig {
    Scheme scheme = Scheme::PLMC;
    DriftModel model;
    double h = 0.0;
    std::int64_t n_steps = 0;
    double theta = 1.0;
    std::vector<double> x0;  // empty = origin
    std::int64_t n_trajectories = 0;
    std::uint64_t master_seed = 42;
    std::int64_t checkpoint_every = 0;    // 0 = terminal only
    bool checkpoint_store_states = true;  // false: squared norms only
    bool coupled_reference = false;       // drive with aggregated fine noise
    double h_ref = 0.0;                   // fine step the noise is drawn at (coupled mode)
    int n_threads = 0;                    // 0 = hardware concurrency
};

namespace detail {

inline std::int64_t coupling_factor(double h, double h_ref) {
    if (!(h_ref > 0.0) || h_ref > h)
        throw invalid_parameter_error("coupling: h_ref must lie in (0, h]");
    const double ratio = h / h_ref;
    const double rounded = std::round(ratio);
    if (std::fabs(ratio - rounded) > 1e-9 * ratio)
        throw invalid_parameter_error("coupling: h_ref must divide h");
    return static_cast<std::int64_t>(rounded);
}

inline void validate_sampler_config(const SamplerConfig& c) {
    validate_model_constants(c.model);
    if (!c.model.drift_eval) throw config_error("sampler: model has no drift");
    if (!(c.h > 0.0 && c.h < 1.0)) throw invalid_parameter_error("sampler: h must be in (0,1)");
    if (c.n_steps < 1) throw invalid_parameter_error("sampler: n_steps must be >= 1");
    if (c.n_trajectories < 1)
        throw invalid_parameter_error("sampler: n_trajectories must be >= 1");
    if (!(c.theta >= 1.0)) throw invalid_parameter_error("sampler: theta must be >= 1");
    if (!c.x0.empty() && static_cast<int>(c.x0.size()) != c.model.dimension)
        throw invalid_parameter_error("sampler: x0 dimension mismatch");
    if (c.checkpoint_every < 0)
        throw invalid_parameter_error("sampler: checkpoint_every must be >= 0");
    if (c.scheme == Scheme::MTLMC && !c.model.double_well)
        throw config_error("sampler: MTLMC is defined only for the double-well family");
    if (c.coupled_reference) (void)coupling_factor(c.h, c.h_ref);
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

inline std::string hex_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

inline std::uint64_t config_hash(const SamplerConfig& c) {
    std::string s = scheme_name(c.scheme) + ";" + c.model.name + ";";
    if (c.model.double_well)
        s += hex_double(c.model.double_well->alpha) + ";" + hex_double(c.model.double_well->beta) + ";";
    s += std::to_string(c.model.dimension) + ";" + hex_double(c.model.gamma) + ";";
    s += hex_double(c.h) + ";" + std::to_string(c.n_steps) + ";" + hex_double(c.theta) + ";";
    for (double v : c.x0) s += hex_double(v) + ",";
    s += ";" + std::to_string(c.n_trajectories) + ";" + std::to_string(c.master_seed) + ";";
    s += std::to_string(c.checkpoint_every) + ";" + (c.checkpoint_store_states ? "1" : "0") + ";";
    s += (c.coupled_reference ? "1" : "0") + std::string(";") + hex_double(c.h_ref);
    return fnv1a64(s);
}

} // namespace detail

struct Ensemble {
    SamplerConfig config;             // normalized (x0 filled in)
    std::vector<double> terminal;     // M x d, row-major; rows frozen at divergence
    std::vector<std::int64_t> checkpoint_steps;
    std::vector<std::vector<double>> checkpoint_states;   // per checkpoint: M x d
    std::vector<std::vector<double>> checkpoint_sqnorms;  // per checkpoint: M
    std::vector<std::int64_t> divergence_step;  // per trajectory; -1 = never
    std::int64_t diverged_count = 0;
    std::uint64_t config_hash = 0;
    double wall_seconds = 0.0;  // informational only; never serialized

    std::int64_t size() const { return config.n_trajectories; }
    int dimension() const { return config.model.dimension; }
    double physical_time() const { return config.h * static_cast<double>(config.n_steps); }
    bool diverged() const { return diverged_count > 0; }
    bool trajectory_diverged(std::int64_t i) const {
        return divergence_step[static_cast<std::size_t>(i)] >= 0;
    }
    std::span<const double> state(std::int64_t i) const {
        const std::size_t d = static_cast<std::size_t>(dimension());
        return std::span<const double>(terminal.data() + static_cast<std::size_t>(i) * d, d);
    }
    std::span<const double> checkpoint_state(std::size_t ck, std::int64_t i) const {
        const std::size_t d = static_cast<std::size_t>(dimension());
        return std::span<const double>(checkpoint_states[ck].data() + static_cast<std::size_t>(i) * d,
                                       d);
    }
};

inline ProjectionParams projection_params(const SamplerConfig& c) {
    return ProjectionParams{c.model.gamma, c.theta, c.model.dimension, c.h};
}

namespace detail {

// out = p + f(p) h + sqrt(2h) xi; fx holds f(p).
inline void em_update(std::span<const double> p, std::span<const double> fx, double h,
                      double sqrt_2h, std::span<const double> xi, std::span<double> out) {
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] + fx[i] * h + sqrt_2h * xi[i];
}

inline void mtlmc_update(std::span<const double> y, const DoubleWellParams& pw, double h,
                         double sqrt_2h, std::span<const double> xi, std::span<double> out) {
    const double r2 = squared_norm(y);
    const double denom = std::sqrt(1.0 + h * r2 * r2 * r2);
    const double s = (pw.alpha - pw.beta * r2) / denom;
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] + h * s * y[i] + sqrt_2h * xi[i];
}

} // namespace detail

/// One plain Euler-Maruyama step: y + f(y) h + sqrt(2h) xi.
inline std::vector<double> lmc_step(std::span<const double> y, const DriftModel& model, double h,
                                    std::span<const double> xi) {
    if (!(h > 0.0 && h < 1.0)) throw invalid_parameter_error("lmc_step: h must be in (0,1)");
    if (y.size() != xi.size() || static_cast<int>(y.size()) != model.dimension)
        throw invalid_parameter_error("lmc_step: dimension mismatch");
    std::vector<double> fx(y.size()), out(y.size());
    model.drift(y, fx);
    detail::em_update(y, fx, h, std::sqrt(2.0 * h), xi, out);
    return out;
}

/// One projected step: P(y) + f(P(y)) h + sqrt(2h) xi. For gamma = 1 the
/// projection is the identity and the result matches lmc_step bit-for-bit.
inline std::vector<double> plmc_step(std::span<const double> y, const DriftModel& model, double h,
                                     double theta, std::span<const double> xi) {
    if (!(h > 0.0 && h < 1.0)) throw invalid_parameter_error("plmc_step: h must be in (0,1)");
    if (y.size() != xi.size() || static_cast<int>(y.size()) != model.dimension)
        throw invalid_parameter_error("plmc_step: dimension mismatch");
    std::vector<double> p = project(y, ProjectionParams{model.gamma, theta, model.dimension, h});
    std::vector<double> fx(y.size()), out(y.size());
    model.drift(p, fx);
    detail::em_update(p, fx, h, std::sqrt(2.0 * h), xi, out);
    return out;
}

/// One modified tamed step (double-well drift only):
/// y + h (alpha y - beta ||y||^2 y)/(1 + h ||y||^6)^{1/2} + sqrt(2h) xi.
inline std::vector<double> mtlmc_step(std::span<const double> y, const DoubleWellParams& params,
                                      double h, std::span<const double> xi) {
    if (!(h > 0.0 && h < 1.0)) throw invalid_parameter_error("mtlmc_step: h must be in (0,1)");
    if (y.size() != xi.size()) throw invalid_parameter_error("mtlmc_step: dimension mismatch");
    std::vector<double> out(y.size());
    detail::mtlmc_update(y, params, h, std::sqrt(2.0 * h), xi, out);
    return out;
}

namespace detail {

struct RunnerPlan {
    double sqrt_2h = 0.0;
    double cap = 0.0;           // projection cap; 0 = projection inactive
    std::int64_t couple_m = 1;  // fine vectors aggregated per step
    double inv_sqrt_m = 1.0;
    std::int64_t n_checkpoints = 0;
};

inline void run_trajectory(const SamplerConfig& c, const RunnerPlan& plan, std::int64_t traj,
                           Ensemble& out) {
    const std::size_t d = static_cast<std::size_t>(c.model.dimension);
    std::vector<double> state(c.x0.begin(), c.x0.end());
    std::vector<double> next(d), fx(d), xi(d), fine(d), scaled(d);
    NoiseStream stream = derive_stream(c.master_seed, static_cast<std::uint64_t>(traj));

    std::int64_t diverged_at = -1;
    if (is_diverged(state)) diverged_at = 0;

    std::int64_t next_ck = (plan.n_checkpoints > 0) ? c.checkpoint_every : -1;
    std::size_t ck_index = 0;
    const auto record_checkpoint = [&]() {
        if (c.checkpoint_store_states)
            std::copy(state.begin(), state.end(),
                      out.checkpoint_states[ck_index].begin() +
                          static_cast<std::ptrdiff_t>(static_cast<std::size_t>(traj) * d));
        out.checkpoint_sqnorms[ck_index][static_cast<std::size_t>(traj)] = squared_norm(state);
        ++ck_index;
    };

    for (std::int64_t n = 0; n < c.n_steps && diverged_at < 0; ++n) {
        // Gather the step's Gaussian vector (possibly aggregated fine noise).
        if (plan.couple_m == 1) {
            stream.next_gaussian_vector(std::span<double>(xi));
        } else {
            stream.next_gaussian_vector(std::span<double>(xi));
            for (std::int64_t k = 1; k < plan.couple_m; ++k) {
                stream.next_gaussian_vector(std::span<double>(fine));
                for (std::size_t j = 0; j < d; ++j) xi[j] += fine[j];
            }
            for (std::size_t j = 0; j < d; ++j) xi[j] *= plan.inv_sqrt_m;
        }

        switch (c.scheme) {
            case Scheme::LMC:
                c.model.drift(state, fx);
                em_update(state, fx, c.h, plan.sqrt_2h, xi, next);
                break;
            case Scheme::PLMC:
            case Scheme::Reference: {
                if (plan.cap > 0.0) {
                    const double nrm = norm(state);
                    if (nrm > plan.cap) {
                        double s = plan.cap / nrm;
                        for (;;) {
                            for (std::size_t j = 0; j < d; ++j) scaled[j] = state[j] * s;
                            if (norm(scaled) <= plan.cap) break;
                            s = std::nextafter(s, 0.0);
                        }
                        std::copy(scaled.begin(), scaled.end(), state.begin());
                    }
                }
                c.model.drift(state, fx);
                em_update(state, fx, c.h, plan.sqrt_2h, xi, next);
                break;
            }
            case Scheme::MTLMC:
                mtlmc_update(state, *c.model.double_well, c.h, plan.sqrt_2h, xi, next);
                break;
        }
        std::swap(state, next);
        if (is_diverged(state)) diverged_at = n + 1;

        if (next_ck > 0 && n + 1 == next_ck) {
            record_checkpoint();
            next_ck = (ck_index < static_cast<std::size_t>(plan.n_checkpoints))
                          ? next_ck + c.checkpoint_every
                          : -1;
        }
    }
    // Diverged trajectories stop stepping; remaining checkpoints freeze the
    // diverged state so the ragged shape stays rectangular.
    while (ck_index < static_cast<std::size_t>(plan.n_checkpoints)) record_checkpoint();

    std::copy(state.begin(), state.end(),
              out.terminal.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(traj) * d));
    out.divergence_step[static_cast<std::size_t>(traj)] = diverged_at;
}

} // namespace detail

/// Advances M trajectories N steps; trajectory i is driven by
/// derive_stream(master_seed, i). Deterministic for any worker count.
inline Ensemble run_ensemble(const SamplerConfig& config) {
    detail::validate_sampler_config(config);
    const auto t0 = std::chrono::steady_clock::now();

    Ensemble out;
    out.config = config;
    if (out.config.x0.empty())
        out.config.x0.assign(static_cast<std::size_t>(config.model.dimension), 0.0);
    const SamplerConfig& c = out.config;

    if (c.scheme == Scheme::PLMC && c.model.a1 && c.model.cf) {
        const double hmax = admissible_h_max(c.model);
        if (c.h >= hmax)
            std::cerr << "warning: h = " << c.h << " is at or above the admissible window "
                      << hmax << "; moment bounds are not guaranteed\n";
    }

    detail::RunnerPlan plan;
    plan.sqrt_2h = std::sqrt(2.0 * c.h);
    plan.cap = (c.model.gamma > 1.0 && (c.scheme == Scheme::PLMC || c.scheme == Scheme::Reference))
                   ? projection_params(c).cap_radius()
                   : 0.0;
    if (c.coupled_reference) {
        plan.couple_m = detail::coupling_factor(c.h, c.h_ref);
        plan.inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(plan.couple_m));
    }
    plan.n_checkpoints = (c.checkpoint_every > 0) ? c.n_steps / c.checkpoint_every : 0;

    const std::size_t d = static_cast<std::size_t>(c.model.dimension);
    const std::size_t m = static_cast<std::size_t>(c.n_trajectories);
    out.terminal.assign(m * d, 0.0);
    out.divergence_step.assign(m, -1);
    out.checkpoint_steps.clear();
    for (std::int64_t k = 1; k <= plan.n_checkpoints; ++k)
        out.checkpoint_steps.push_back(k * c.checkpoint_every);
    out.checkpoint_states.assign(c.checkpoint_store_states
                                     ? static_cast<std::size_t>(plan.n_checkpoints)
                                     : 0,
                                 std::vector<double>());
    out.checkpoint_sqnorms.assign(static_cast<std::size_t>(plan.n_checkpoints),
                                  std::vector<double>());
    for (std::int64_t k = 0; k < plan.n_checkpoints; ++k) {
        if (c.checkpoint_store_states)
            out.checkpoint_states[static_cast<std::size_t>(k)].assign(m * d, 0.0);
        out.checkpoint_sqnorms[static_cast<std::size_t>(k)].assign(m, 0.0);
    }

    unsigned workers = (c.n_threads > 0) ? static_cast<unsigned>(c.n_threads)
                                         : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(
        std::min<std::int64_t>(static_cast<std::int64_t>(workers), c.n_trajectories));

    if (workers <= 1) {
        for (std::int64_t i = 0; i < c.n_trajectories; ++i)
            detail::run_trajectory(c, plan, i, out);
    } else {
        const std::int64_t chunk = (c.n_trajectories + workers - 1) / workers;
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned t = 0; t < workers; ++t) {
            const std::int64_t lo = static_cast<std::int64_t>(t) * chunk;
            const std::int64_t hi = std::min<std::int64_t>(lo + chunk, c.n_trajectories);
            if (lo >= hi) break;
            pool.emplace_back([&, lo, hi]() {
                for (std::int64_t i = lo; i < hi; ++i) detail::run_trajectory(c, plan, i, out);
            });
        }
        for (auto& th : pool) th.join();
    }

    for (std::int64_t v : out.divergence_step)
        if (v >= 0) ++out.diverged_count;
    out.config_hash = detail::config_hash(c);
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

inline constexpr std::uint64_t kIndependentRefSeedOffset = 0xa5a5f00dfeed5eedULL;

/// Fine-step companion run serving as the surrogate exact law at the same
/// physical time T = h * n_steps. When the coarse config is coupled, the
/// reference consumes the very fine streams the coarse run aggregates; when
/// independent, the reference seed is offset so the streams are distinct.
inline Ensemble run_reference(const SamplerConfig& config, double h_ref) {
    const std::int64_t m = detail::coupling_factor(config.h, h_ref);
    SamplerConfig fine = config;
    fine.scheme = Scheme::Reference;
    fine.h = h_ref;
    fine.n_steps = config.n_steps * m;
    fine.coupled_reference = false;
    fine.h_ref = 0.0;
    fine.checkpoint_every = config.checkpoint_every * m;
    if (!config.coupled_reference) fine.master_seed = config.master_seed ^ kIndependentRefSeedOffset;
    return run_ensemble(fine);
}

/// CSV dump of terminal states: one row per trajectory, d columns, 17
/// significant digits.
inline void dump_ensemble_csv(const Ensemble& e, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw config_error("dump_ensemble_csv: cannot open " + path);
    f << "# scheme,model,d,h,N,M,seed\n";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", e.config.h);
    f << "# " << scheme_name(e.config.scheme) << "," << e.config.model.name << ","
      << e.config.model.dimension << "," << buf << "," << e.config.n_steps << ","
      << e.config.n_trajectories << "," << e.config.master_seed << "\n";
    const std::size_t d = static_cast<std::size_t>(e.config.model.dimension);
    for (std::int64_t i = 0; i < e.config.n_trajectories; ++i) {
        const auto row = e.state(i);
        for (std::size_t j = 0; j < d; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", row[j]);
            f << buf << (j + 1 < d ? "," : "");
        }
        f << "\n";
    }
    if (!f) throw config_error("dump_ensemble_csv: write failure on " + path);
}

} // namespace plmc
