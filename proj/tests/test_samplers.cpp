#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "plmc/samplers.hpp"

using plmc::Scheme;

namespace {

plmc::SamplerConfig base_config(plmc::DriftModel model, double h, std::int64_t steps,
                                std::int64_t traj) {
    plmc::SamplerConfig c;
    c.model = std::move(model);
    c.h = h;
    c.n_steps = steps;
    c.n_trajectories = traj;
    return c;
}

} // namespace

TEST_CASE("scheme names round-trip") {
    for (Scheme s : {Scheme::LMC, Scheme::PLMC, Scheme::MTLMC, Scheme::Reference})
        CHECK(plmc::parse_scheme(plmc::scheme_name(s)) == s);
    CHECK_THROWS_AS(plmc::parse_scheme("euler"), plmc::invalid_parameter_error);
}

TEST_CASE("single-step formulas") {
    const plmc::DriftModel ou = plmc::make_ou(3);
    const std::vector<double> y = {1.0, -2.0, 0.5};
    const std::vector<double> xi = {0.3, 0.1, -0.7};
    const double h = 0.25;
    const double s2h = std::sqrt(2.0 * h);

    const std::vector<double> lmc = plmc::lmc_step(y, ou, h, xi);
    for (int i = 0; i < 3; ++i)
        CHECK(lmc[static_cast<std::size_t>(i)] ==
              Catch::Approx((1.0 - h) * y[static_cast<std::size_t>(i)] +
                            s2h * xi[static_cast<std::size_t>(i)]));

    // gamma = 1: plmc_step coincides bitwise
    const std::vector<double> pl = plmc::plmc_step(y, ou, h, 1.0, xi);
    CHECK(pl == lmc);

    // gamma = 3 with a state beyond the cap: projection acts first
    const plmc::DriftModel dw = plmc::make_double_well(1.0, 1.0, 3);
    std::vector<double> far = {50.0, 0.0, 0.0};
    const double cap = std::pow(3.0 / h, 1.0 / 6.0);
    const std::vector<double> pfar = plmc::plmc_step(far, dw, h, 1.0, xi);
    // expected: p = (cap, 0, 0) (up to the nudge), then p + h f(p) + s2h xi
    const double p0 = plmc::project(far, plmc::ProjectionParams{3.0, 1.0, 3, h})[0];
    CHECK(std::fabs(p0 - cap) <= 1e-12 * cap);
    const double drift0 = (1.0 - p0 * p0) * p0;
    CHECK(pfar[0] == Catch::Approx(p0 + h * drift0 + s2h * xi[0]));

    // MTLMC at the origin: pure noise; at ||y||=1 with alpha=beta: drift cancels
    const plmc::DoubleWellParams pw{1.0, 1.0};
    const std::vector<double> zero(3, 0.0);
    const std::vector<double> m0 = plmc::mtlmc_step(zero, pw, h, xi);
    for (int i = 0; i < 3; ++i)
        CHECK(m0[static_cast<std::size_t>(i)] ==
              Catch::Approx(s2h * xi[static_cast<std::size_t>(i)]));
    const std::vector<double> e1 = {1.0, 0.0, 0.0};
    const std::vector<double> m1 = plmc::mtlmc_step(e1, pw, h, xi);
    CHECK(m1[0] == Catch::Approx(1.0 + s2h * xi[0]));

    // taming: the drift increment stays O(sqrt(h)) even for huge states
    std::vector<double> huge = {1e4, 0.0, 0.0};
    const std::vector<double> mh = plmc::mtlmc_step(huge, pw, h, xi);
    CHECK(std::fabs(mh[0] - huge[0]) < 2.0);
}

TEST_CASE("config validation") {
    plmc::SamplerConfig c = base_config(plmc::make_ou(2), 0.1, 10, 4);
    CHECK_NOTHROW(plmc::run_ensemble(c));

    c.h = 0.0;
    CHECK_THROWS_AS(plmc::run_ensemble(c), plmc::invalid_parameter_error);
    c.h = 0.1;
    c.n_steps = 0;
    CHECK_THROWS_AS(plmc::run_ensemble(c), plmc::invalid_parameter_error);
    c.n_steps = 10;
    c.n_trajectories = 0;
    CHECK_THROWS_AS(plmc::run_ensemble(c), plmc::invalid_parameter_error);
    c.n_trajectories = 4;
    c.x0 = {1.0};  // wrong dimension
    CHECK_THROWS_AS(plmc::run_ensemble(c), plmc::invalid_parameter_error);
    c.x0.clear();
    c.scheme = Scheme::MTLMC;  // OU has no double-well parameters
    CHECK_THROWS_AS(plmc::run_ensemble(c), plmc::config_error);
    c.scheme = Scheme::PLMC;
    c.theta = 0.5;
    CHECK_THROWS_AS(plmc::run_ensemble(c), plmc::invalid_parameter_error);
}

TEST_CASE("PLMC equals LMC bitwise for gamma = 1") {
    plmc::SamplerConfig c = base_config(plmc::make_ou(5), 0.0625, 200, 16);
    c.scheme = Scheme::LMC;
    const plmc::Ensemble lmc = plmc::run_ensemble(c);
    c.scheme = Scheme::PLMC;
    const plmc::Ensemble plmc_e = plmc::run_ensemble(c);
    REQUIRE(lmc.terminal == plmc_e.terminal);
    c.scheme = Scheme::Reference;
    const plmc::Ensemble ref = plmc::run_ensemble(c);
    REQUIRE(ref.terminal == plmc_e.terminal);
}

TEST_CASE("one-step ensemble matches the closed form") {
    plmc::SamplerConfig c = base_config(plmc::make_ou(4), 0.125, 1, 3);
    c.x0.assign(4, 2.0);
    c.master_seed = 97;
    const plmc::Ensemble e = plmc::run_ensemble(c);
    for (std::int64_t i = 0; i < 3; ++i) {
        plmc::NoiseStream s = plmc::derive_stream(97, static_cast<std::uint64_t>(i));
        const std::vector<double> xi = s.next_gaussian_vector(4);
        for (std::size_t j = 0; j < 4; ++j) {
            const double expect = 2.0 + 0.125 * (-2.0) + std::sqrt(0.25) * xi[j];
            REQUIRE(e.state(i)[j] == expect);
        }
    }
}

TEST_CASE("instability contrast: LMC explodes, PLMC stays finite") {
    plmc::DriftModel dw = plmc::make_double_well(1.0, 1.0, 4);
    plmc::SamplerConfig c = base_config(dw, 0.125, 100, 100);
    c.x0.assign(4, 10.0);
    c.scheme = Scheme::LMC;
    const plmc::Ensemble lmc = plmc::run_ensemble(c);
    CHECK(lmc.diverged_count >= 95);
    // divergence indices are recorded and small
    std::int64_t recorded = 0;
    for (std::int64_t i = 0; i < lmc.size(); ++i)
        if (lmc.trajectory_diverged(i)) {
            ++recorded;
            CHECK(lmc.divergence_step[static_cast<std::size_t>(i)] <= 20);
        }
    CHECK(recorded == lmc.diverged_count);

    c.scheme = Scheme::PLMC;
    const plmc::Ensemble pl = plmc::run_ensemble(c);
    CHECK(pl.diverged_count == 0);
    for (std::int64_t i = 0; i < pl.size(); ++i)
        CHECK(plmc::all_finite(pl.state(i)));
}

TEST_CASE("bad initial state is flagged at step zero") {
    plmc::SamplerConfig c = base_config(plmc::make_double_well(1.0, 1.0, 2), 0.125, 5, 2);
    c.scheme = Scheme::LMC;
    c.x0 = {1e200, 1e200};
    const plmc::Ensemble e = plmc::run_ensemble(c);
    CHECK(e.diverged_count == 2);
    CHECK(e.divergence_step == std::vector<std::int64_t>{0, 0});
}

TEST_CASE("thread count never changes results") {
    plmc::SamplerConfig c = base_config(plmc::make_double_well(1.0, 4.0, 6), 0.03125, 64, 37);
    c.scheme = Scheme::PLMC;
    c.checkpoint_every = 16;
    c.n_threads = 1;
    const plmc::Ensemble a = plmc::run_ensemble(c);
    c.n_threads = 4;
    const plmc::Ensemble b = plmc::run_ensemble(c);
    c.n_threads = 16;
    const plmc::Ensemble d = plmc::run_ensemble(c);
    REQUIRE(a.terminal == b.terminal);
    REQUIRE(a.terminal == d.terminal);
    REQUIRE(a.checkpoint_sqnorms == b.checkpoint_sqnorms);
    REQUIRE(a.checkpoint_states == d.checkpoint_states);
    CHECK(a.config_hash == b.config_hash);
    CHECK(a.divergence_step == d.divergence_step);
}

TEST_CASE("trajectory prefix is stable under M changes") {
    plmc::SamplerConfig c = base_config(plmc::make_double_well(1.0, 4.0, 3), 0.0625, 32, 64);
    const plmc::Ensemble small = plmc::run_ensemble(c);
    c.n_trajectories = 256;
    const plmc::Ensemble big = plmc::run_ensemble(c);
    for (std::int64_t i = 0; i < 64; ++i) {
        const auto a = small.state(i);
        const auto b = big.state(i);
        REQUIRE(std::equal(a.begin(), a.end(), b.begin()));
    }
}

TEST_CASE("checkpoint cadence and shapes") {
    plmc::SamplerConfig c = base_config(plmc::make_ou(2), 0.125, 10, 5);
    c.checkpoint_every = 3;
    const plmc::Ensemble e = plmc::run_ensemble(c);
    CHECK(e.checkpoint_steps == std::vector<std::int64_t>{3, 6, 9});
    REQUIRE(e.checkpoint_states.size() == 3);
    REQUIRE(e.checkpoint_sqnorms.size() == 3);
    for (const auto& ck : e.checkpoint_states) CHECK(ck.size() == 5 * 2);
    for (const auto& ck : e.checkpoint_sqnorms) CHECK(ck.size() == 5);
    // sqnorms agree with stored states
    for (std::size_t k = 0; k < 3; ++k)
        for (std::int64_t i = 0; i < 5; ++i)
            CHECK(e.checkpoint_sqnorms[k][static_cast<std::size_t>(i)] ==
                  plmc::squared_norm(e.checkpoint_state(k, i)));

    c.checkpoint_store_states = false;
    const plmc::Ensemble lean = plmc::run_ensemble(c);
    CHECK(lean.checkpoint_states.empty());
    CHECK(lean.checkpoint_sqnorms == e.checkpoint_sqnorms);
}

TEST_CASE("coupled driving aggregates the fine stream exactly") {
    // m = 2: each coarse step must consume two fine vectors and use
    // (v1 + v2)/sqrt(2) as its Gaussian input.
    const double h_ref = 0.0625;
    const double h = 2.0 * h_ref;
    plmc::SamplerConfig c = base_config(plmc::make_double_well(1.0, 1.0, 3), h, 4, 1);
    c.scheme = Scheme::PLMC;
    c.coupled_reference = true;
    c.h_ref = h_ref;
    c.master_seed = 1234;
    const plmc::Ensemble e = plmc::run_ensemble(c);

    plmc::NoiseStream s = plmc::derive_stream(1234, 0);
    const plmc::ProjectionParams pp{3.0, 1.0, 3, h};
    std::vector<double> state(3, 0.0), fx(3), xi(3), v2(3);
    const double inv_sqrt_m = 1.0 / std::sqrt(2.0);
    for (int n = 0; n < 4; ++n) {
        s.next_gaussian_vector(std::span<double>(xi));
        s.next_gaussian_vector(std::span<double>(v2));
        for (int j = 0; j < 3; ++j) xi[static_cast<std::size_t>(j)] += v2[static_cast<std::size_t>(j)];
        for (int j = 0; j < 3; ++j) xi[static_cast<std::size_t>(j)] *= inv_sqrt_m;
        plmc::project_in_place(std::span<double>(state), pp);
        plmc::make_double_well(1.0, 1.0, 3).drift(state, fx);
        std::vector<double> next(3);
        plmc::detail::em_update(state, fx, h, std::sqrt(2.0 * h), xi, next);
        state = next;
    }
    for (std::size_t j = 0; j < 3; ++j) REQUIRE(e.state(0)[j] == state[j]);

    // m must divide evenly
    c.h_ref = h / 3.0 * 0.99;
    CHECK_THROWS_AS(plmc::run_ensemble(c), plmc::invalid_parameter_error);
}

TEST_CASE("run_reference builds the matched fine companion") {
    plmc::SamplerConfig c = base_config(plmc::make_double_well(1.0, 4.0, 2), 0.125, 8, 6);
    c.scheme = Scheme::PLMC;
    c.coupled_reference = true;
    c.h_ref = 0.015625;  // m = 8
    const plmc::Ensemble ref = plmc::run_reference(c, c.h_ref);
    CHECK(ref.config.scheme == Scheme::Reference);
    CHECK(ref.config.h == 0.015625);
    CHECK(ref.config.n_steps == 64);
    CHECK(ref.config.master_seed == c.master_seed);  // shared noise
    CHECK(ref.physical_time() == Catch::Approx(c.h * 8));

    plmc::SamplerConfig indep = c;
    indep.coupled_reference = false;
    const plmc::Ensemble ref2 = plmc::run_reference(indep, indep.h_ref);
    CHECK(ref2.config.master_seed == (c.master_seed ^ plmc::kIndependentRefSeedOffset));
}

TEST_CASE("LMC stationary variance on OU matches 1/(1 - h/2)") {
    const double h = 0.25;
    plmc::SamplerConfig c = base_config(plmc::make_ou(1), h, 400, 20000);
    c.scheme = Scheme::LMC;
    const plmc::Ensemble e = plmc::run_ensemble(c);
    double sum = 0.0, sum2 = 0.0;
    for (std::int64_t i = 0; i < e.size(); ++i) {
        const double x = e.state(i)[0];
        sum += x;
        sum2 += x * x;
    }
    const double n = static_cast<double>(e.size());
    const double var = sum2 / n - (sum / n) * (sum / n);
    CHECK(var == Catch::Approx(1.0 / (1.0 - h / 2.0)).margin(0.04));
}

TEST_CASE("dump format and precision") {
    plmc::SamplerConfig c = base_config(plmc::make_double_well(1.0, 4.0, 3), 0.03125, 12, 7);
    c.scheme = Scheme::PLMC;
    const plmc::Ensemble e = plmc::run_ensemble(c);
    const std::string path = "test_dump_tmp.csv";
    plmc::dump_ensemble_csv(e, path);

    std::ifstream f(path);
    REQUIRE(f.good());
    std::string line;
    std::getline(f, line);
    CHECK(line == "# scheme,model,d,h,N,M,seed");
    std::getline(f, line);
    CHECK(line == "# PLMC,doublewell,3,0.03125,12,7,42");
    std::size_t rows = 0;
    while (std::getline(f, line)) {
        std::istringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        REQUIRE(vals.size() == 3);
        for (std::size_t j = 0; j < 3; ++j)
            REQUIRE(vals[j] == e.state(static_cast<std::int64_t>(rows))[j]);  // %.17g round-trips
        ++rows;
    }
    CHECK(rows == 7);
    std::filesystem::remove(path);
}

TEST_CASE("config hash separates configs") {
    plmc::SamplerConfig a = base_config(plmc::make_ou(2), 0.125, 10, 4);
    plmc::SamplerConfig b = a;
    const plmc::Ensemble ea = plmc::run_ensemble(a);
    plmc::Ensemble eb = plmc::run_ensemble(b);
    CHECK(ea.config_hash == eb.config_hash);
    b.h = 0.0625;
    b.n_steps = 20;
    eb = plmc::run_ensemble(b);
    CHECK(ea.config_hash != eb.config_hash);
    b = a;
    b.master_seed = 43;
    eb = plmc::run_ensemble(b);
    CHECK(ea.config_hash != eb.config_hash);
}
