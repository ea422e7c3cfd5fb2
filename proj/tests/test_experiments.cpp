#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "plmc/plmc.hpp"

using Kind = plmc::ExperimentSpec::Kind;

namespace {

plmc::ExperimentSpec tiny_converge() {
    plmc::ExperimentSpec s;
    s.kind = Kind::Converge;
    s.model = "doublewell";
    s.alpha = 1.0;
    s.beta = 1.0;
    s.dims = {2};
    s.h_grid = {0.125, 0.0625, 0.03125};
    s.h_ref = 1.0 / 128.0;
    s.T = 1.0;
    s.n_traj = 200;
    return s;
}

} // namespace

TEST_CASE("mixing plan worked example is exact") {
    const plmc::MixingPlan plan = plmc::plan_mixing(0.1, 1.0, 1, plmc::MixingConstants{});
    CHECK(plan.h == 0.05);        // 0.1/2 is exact in binary
    CHECK(plan.iterations == 60); // ceil(ln(20)/0.05) = ceil(59.91...)

    // halving epsilon halves h (gamma = 1) and strictly increases k
    const plmc::MixingPlan half = plmc::plan_mixing(0.05, 1.0, 1, plmc::MixingConstants{});
    CHECK(half.h == 0.025);
    CHECK(half.iterations > plan.iterations);

    // gamma = 1 dimension scaling: h ~ d^{-3/2}
    const plmc::MixingPlan d4 = plmc::plan_mixing(0.1, 1.0, 4, plmc::MixingConstants{});
    CHECK(d4.h == Catch::Approx(plan.h / 8.0));

    // gamma = 3: q = max{4.5, 5} = 5, so doubling d shrinks h by more than 2^5
    const plmc::MixingPlan g3a = plmc::plan_mixing(0.1, 3.0, 1, plmc::MixingConstants{});
    const plmc::MixingPlan g3b = plmc::plan_mixing(0.1, 3.0, 2, plmc::MixingConstants{});
    CHECK(g3b.h < g3a.h / 32.0);
    CHECK(g3b.iterations > g3a.iterations);
}

TEST_CASE("mixing plan validation") {
    const plmc::MixingConstants ok{};
    CHECK_THROWS_AS(plmc::plan_mixing(0.0, 1.0, 1, ok), plmc::invalid_parameter_error);
    CHECK_THROWS_AS(plmc::plan_mixing(1.0, 1.0, 1, ok), plmc::invalid_parameter_error);
    CHECK_THROWS_AS(plmc::plan_mixing(0.1, 0.5, 1, ok), plmc::invalid_parameter_error);
    CHECK_THROWS_AS(plmc::plan_mixing(0.1, 1.0, 0, ok), plmc::invalid_parameter_error);
    plmc::MixingConstants bad{};
    bad.C = 0.0;
    CHECK_THROWS_AS(plmc::plan_mixing(0.1, 1.0, 1, bad), plmc::invalid_parameter_error);
    bad = plmc::MixingConstants{};
    bad.phi_norm = -1.0;
    CHECK_THROWS_AS(plmc::plan_mixing(0.1, 1.0, 1, bad), plmc::invalid_parameter_error);
    bad = plmc::MixingConstants{};
    bad.x0_mean_norm = -0.5;
    CHECK_THROWS_AS(plmc::plan_mixing(0.1, 1.0, 1, bad), plmc::invalid_parameter_error);
    // gamma > 1 needs 2 C d^q / eps > 1 for the log to make sense
    plmc::MixingConstants small{};
    small.C = 0.2;
    CHECK_THROWS_AS(plmc::plan_mixing(0.5, 2.0, 1, small), plmc::invalid_parameter_error);
}

TEST_CASE("mixing plan invariant over random tuples") {
    plmc::NoiseStream s = plmc::derive_stream(77, 0);
    std::vector<double> u(6);
    int planned = 0;
    for (int rep = 0; rep < 200; ++rep) {
        s.next_gaussian_vector(std::span<double>(u));
        plmc::MixingConstants k;
        k.C = std::exp(u[0]);
        k.C_star = std::exp(u[1]);
        k.c_star = std::exp(0.5 * u[2]);
        k.phi_norm = std::exp(0.5 * u[3]);
        k.x0_mean_norm = std::fabs(u[4]);
        const double eps = 0.5 / (1.0 + u[5] * u[5]);  // in (0, 0.5]
        const double gamma = (rep % 2 == 0) ? 1.0 : 1.0 + std::fabs(u[0]);
        const int d = 1 + (rep % 7);
        plmc::MixingPlan plan;
        try {
            plan = plmc::plan_mixing(eps, gamma, d, k);
        } catch (const plmc::invalid_parameter_error&) {
            continue;  // outside the planning regime
        }
        ++planned;
        const double need =
            std::log(2.0 * k.C_star * k.phi_norm * (1.0 + k.x0_mean_norm) / eps) / k.c_star;
        const double got = static_cast<double>(plan.iterations) * plan.h;
        REQUIRE(got >= need - 1e-12 * std::max(1.0, std::fabs(need)));
        // ceil is tight: one fewer iteration would undershoot (unless clamped to 1)
        if (plan.iterations > 1 && need > 0.0)
            REQUIRE((static_cast<double>(plan.iterations) - 1.0) * plan.h <
                    need + 1e-9 * std::max(1.0, need));
        REQUIRE(plan.h > 0.0);
        REQUIRE(plan.h < 1.0);
    }
    CHECK(planned > 100);
}

TEST_CASE("defaults resolution") {
    plmc::ExperimentSpec s;
    s.kind = Kind::Converge;
    plmc::ExperimentSpec r = plmc::detail::resolve_defaults(s);
    CHECK(r.dims == std::vector<int>{6});
    CHECK(r.h_grid.size() == 5);
    CHECK(r.h_grid.front() == std::ldexp(1.0, -5));
    CHECK(r.h_ref == std::ldexp(1.0, -11));
    CHECK(r.n_traj == 1000);
    s.paper_scale = true;
    r = plmc::detail::resolve_defaults(s);
    CHECK(r.h_ref == std::ldexp(1.0, -13));
    CHECK(r.n_traj == 3000);

    plmc::ExperimentSpec dd;
    dd.kind = Kind::DimDep;
    dd.model = "ou";  // ignored: the dimension study is pinned to doublewell(1,1)
    dd.alpha = 3.0;
    dd.beta = 7.0;
    r = plmc::detail::resolve_defaults(dd);
    CHECK(r.model == "doublewell");
    CHECK(r.alpha == 1.0);
    CHECK(r.beta == 1.0);
    CHECK(r.dims == std::vector<int>{10, 20, 50, 100});
    CHECK(r.h_grid == std::vector<double>{0.0625});
    CHECK(r.iterations == 80);

    plmc::ExperimentSpec dens;
    dens.kind = Kind::Density;
    r = plmc::detail::resolve_defaults(dens);
    CHECK(r.n_traj == 3000);  // density keeps the paper count at both scales

    // dims come back sorted
    plmc::ExperimentSpec multi = tiny_converge();
    multi.dims = {5, 2};
    r = plmc::detail::resolve_defaults(multi);
    CHECK(r.dims == std::vector<int>{2, 5});
}

TEST_CASE("spec validation") {
    plmc::ExperimentSpec s = tiny_converge();
    s.h_grid = {0.0625, 0.125};  // increasing
    CHECK_THROWS_AS(plmc::run_experiment(s), plmc::invalid_parameter_error);
    s = tiny_converge();
    s.h_grid = {0.125, 0.125};
    CHECK_THROWS_AS(plmc::run_experiment(s), plmc::invalid_parameter_error);
    s = tiny_converge();
    s.model = "gauss";
    CHECK_THROWS_AS(plmc::run_experiment(s), plmc::invalid_parameter_error);
    s = tiny_converge();
    s.h_ref = 0.3;  // larger than the coarsest h
    CHECK_THROWS_AS(plmc::run_experiment(s), plmc::invalid_parameter_error);
    s = tiny_converge();
    s.T = 1.0;
    s.h_grid = {0.3};  // does not divide T integrally
    CHECK_THROWS_AS(plmc::run_experiment(s), plmc::invalid_parameter_error);
    plmc::ExperimentSpec mism = tiny_converge();
    mism.kind = Kind::Density;
    CHECK_THROWS_AS(plmc::run_convergence(mism), plmc::invalid_parameter_error);
}

TEST_CASE("convergence report shape, round-trip, and refit") {
    const plmc::ExperimentSpec s = tiny_converge();
    const plmc::ExperimentReport rep = plmc::run_convergence(s);
    CHECK(rep.kind == "converge");
    REQUIRE(rep.rows.size() == 12);  // 3 h x 4 phi
    REQUIRE(rep.orders.size() == 4);
    CHECK(rep.rows[0].phi == "phi1");
    CHECK(rep.rows[0].h == 0.125);
    CHECK(rep.rows[0].scheme == "PLMC");
    CHECK(rep.rows[0].alpha == 1.0);
    CHECK(rep.rows[0].beta == 1.0);
    CHECK(!rep.any_cell_failed);
    CHECK(!rep.any_check_failed);

    auto meta = [&rep](const std::string& key) -> std::string {
        for (const auto& [k, v] : rep.meta)
            if (k == key) return v;
        return "<missing>";
    };
    CHECK(meta("model") == "doublewell");
    CHECK(meta("reference") == "coupled");
    CHECK(meta("failed_cells") == "none");
    CHECK(meta("phi2_gap_fill") == "0.25");
    CHECK(meta("h_grid") == "0.125,0.0625,0.03125");

    // CSV round-trip is exact, and refitting the parsed rows reproduces the
    // ORDER rows bit for bit.
    const std::string path = "test_report_tmp.csv";
    plmc::write_report(rep, path, "csv");
    const plmc::ExperimentReport back = plmc::parse_report_csv(path);
    CHECK(back.kind == rep.kind);
    REQUIRE(back.rows.size() == rep.rows.size());
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        CHECK(back.rows[i].phi == rep.rows[i].phi);
        CHECK(back.rows[i].h == rep.rows[i].h);
        CHECK(back.rows[i].estimate == rep.rows[i].estimate);
        CHECK(back.rows[i].reference == rep.rows[i].reference);
        CHECK(back.rows[i].abs_error == rep.rows[i].abs_error);
        CHECK(back.rows[i].std_error == rep.rows[i].std_error);
        CHECK(back.rows[i].alpha == rep.rows[i].alpha);
    }
    REQUIRE(back.orders.size() == rep.orders.size());
    for (std::size_t i = 0; i < rep.orders.size(); ++i) {
        CHECK(back.orders[i].phi == rep.orders[i].phi);
        CHECK(back.orders[i].slope == rep.orders[i].slope);
        CHECK(back.orders[i].residual_rms == rep.orders[i].residual_rms);
    }
    for (const plmc::OrderRow& o : back.orders) {
        std::vector<std::pair<double, double>> pts;
        for (const plmc::ReportRow& row : back.rows)
            if (row.phi == o.phi && row.abs_error > 0.0) pts.emplace_back(row.h, row.abs_error);
        const plmc::OrderFit fit = plmc::fit_order(pts);
        CHECK(fit.slope == o.slope);
        CHECK(fit.residual_rms == o.residual_rms);
    }
    std::filesystem::remove(path);

    // JSON mirrors the same content
    const std::string js = plmc::report_to_json(rep);
    const auto j = nlohmann::json::parse(js);
    CHECK(j["kind"] == "converge");
    CHECK(j["rows"].size() == 12);
    CHECK(j["orders"].size() == 4);
    CHECK(j["meta"]["reference"] == "coupled");
    CHECK(j["rows"][0]["alpha"] == 1.0);
}

TEST_CASE("report bytes are independent of the thread count") {
    plmc::ExperimentSpec s = tiny_converge();
    s.n_threads = 1;
    const std::string one = plmc::report_to_csv(plmc::run_convergence(s));
    s.n_threads = 4;
    const std::string four = plmc::report_to_csv(plmc::run_convergence(s));
    REQUIRE(one == four);
}

TEST_CASE("independent reference decouples the noise") {
    plmc::ExperimentSpec s = tiny_converge();
    const plmc::ExperimentReport coupled = plmc::run_convergence(s);
    s.independent_ref = true;
    const plmc::ExperimentReport indep = plmc::run_convergence(s);
    bool meta_says_independent = false;
    for (const auto& [k, v] : indep.meta)
        if (k == "reference" && v == "independent") meta_says_independent = true;
    CHECK(meta_says_independent);
    // the reference stream is reseeded, so its estimates move
    CHECK(indep.rows[0].reference != coupled.rows[0].reference);
    // common random numbers shrink the error bars on the smooth competitor
    CHECK(coupled.rows[1].phi == "exp_neg_norm");
    CHECK(coupled.rows[1].std_error < indep.rows[1].std_error);
}

TEST_CASE("ou rows leave alpha and beta empty") {
    plmc::ExperimentSpec s;
    s.kind = Kind::Converge;
    s.model = "ou";
    s.dims = {2};
    s.h_grid = {0.125, 0.0625};
    s.h_ref = 0.03125;
    s.T = 0.5;
    s.n_traj = 100;
    const plmc::ExperimentReport rep = plmc::run_convergence(s);
    REQUIRE(!rep.rows.empty());
    CHECK(!rep.rows[0].alpha.has_value());
    CHECK(!rep.rows[0].beta.has_value());
    const std::string path = "test_report_ou_tmp.csv";
    plmc::write_report(rep, path, "csv");
    const plmc::ExperimentReport back = plmc::parse_report_csv(path);
    CHECK(!back.rows[0].alpha.has_value());
    CHECK(!back.rows[0].beta.has_value());
    std::filesystem::remove(path);
}

TEST_CASE("sample driver") {
    plmc::ExperimentSpec s;
    s.kind = Kind::Sample;
    s.model = "ou";
    s.dims = {2};
    s.h_grid = {0.0625};
    s.iterations = 8;
    s.n_traj = 16;
    plmc::Ensemble e;
    const plmc::ExperimentReport rep = plmc::run_sample(s, &e);
    CHECK(rep.kind == "sample");
    REQUIRE(rep.checks.size() == 1);
    CHECK(rep.checks[0].id == "divergence_free");
    CHECK(rep.checks[0].pass);
    CHECK(!rep.any_cell_failed);
    CHECK(e.terminal.size() == 16 * 2);
    CHECK(e.config.n_steps == 8);

    // an exploding LMC run is flagged through any_cell_failed, not a check
    plmc::ExperimentSpec bad;
    bad.kind = Kind::Sample;
    bad.model = "doublewell";
    bad.alpha = 1.0;
    bad.beta = 1.0;
    bad.dims = {4};
    bad.h_grid = {0.125};
    bad.iterations = 60;
    bad.n_traj = 50;
    bad.scheme = plmc::Scheme::LMC;
    bad.x0_value = 10.0;
    const plmc::ExperimentReport rb = plmc::run_sample(bad);
    CHECK(rb.any_cell_failed);
    REQUIRE(!rb.checks.empty());
    CHECK(!rb.checks[0].pass);
    CHECK(!rb.any_check_failed);
}

TEST_CASE("density driver") {
    plmc::ExperimentSpec s;
    s.kind = Kind::Density;
    s.model = "doublewell";
    s.alpha = 1.0;
    s.beta = 1.0;
    s.dims = {4};
    s.h_grid = {0.03125};
    s.T = 2.0;
    s.n_traj = 400;
    const plmc::ExperimentReport rep = plmc::run_density(s);
    CHECK(rep.kind == "density");
    REQUIRE(rep.hist.size() == 160);  // 80 bins per scheme
    std::size_t n_plmc = 0, n_mtlmc = 0;
    for (const plmc::HistRow& h : rep.hist) {
        if (h.scheme == "PLMC") ++n_plmc;
        if (h.scheme == "MTLMC") ++n_mtlmc;
        CHECK(h.density >= 0.0);
    }
    CHECK(n_plmc == 80);
    CHECK(n_mtlmc == 80);
    REQUIRE(rep.checks.size() == 1);
    CHECK(rep.checks[0].id == "density_ks_first_coordinate");
    bool has_ks = false;
    for (const auto& [k, v] : rep.meta)
        if (k == "ks_first_coordinate") has_ks = true;
    CHECK(has_ks);

    plmc::ExperimentSpec ou = s;
    ou.model = "ou";
    CHECK_THROWS_AS(plmc::run_density(ou), plmc::invalid_parameter_error);
}

TEST_CASE("dimension dependence driver") {
    plmc::ExperimentSpec s;
    s.kind = Kind::DimDep;
    // dims far enough apart that every phi sees a nonzero error at both d
    // (at d = 2 the coupled chains can agree on every indicator draw)
    s.dims = {4, 10};
    s.h_grid = {0.0625};
    s.iterations = 20;
    s.n_traj = 200;
    s.h_ref = 0.0625 / 8.0;
    const plmc::ExperimentReport rep = plmc::run_dimdep(s);
    CHECK(rep.kind == "dimdep");
    REQUIRE(rep.rows.size() == 8);  // 2 d x 4 phi
    CHECK(rep.rows[0].d == 4);
    CHECK(rep.rows[4].d == 10);
    REQUIRE(rep.orders.size() == 4);  // slope of error vs d per phi
    for (const plmc::OrderRow& o : rep.orders) CHECK(std::isfinite(o.slope));
    bool model_pinned = false;
    for (const auto& [k, v] : rep.meta)
        if (k == "alpha" && v == "1") model_pinned = true;
    CHECK(model_pinned);
}

TEST_CASE("mixing driver mirrors the plan") {
    plmc::ExperimentSpec s;
    s.kind = Kind::Mixing;
    s.mix_epsilon = 0.1;
    s.mix_gamma = 1.0;
    s.dims = {1};
    plmc::MixingPlan plan;
    const plmc::ExperimentReport rep = plmc::run_mixing(s, &plan);
    CHECK(rep.kind == "mixing");
    CHECK(plan.h == 0.05);
    CHECK(plan.iterations == 60);
    auto meta = [&rep](const std::string& key) -> std::string {
        for (const auto& [k, v] : rep.meta)
            if (k == key) return v;
        return "<missing>";
    };
    CHECK(std::stod(meta("h")) == 0.05);  // 17-digit round-trip of fl(0.05)
    CHECK(meta("iterations") == "60");
    CHECK(meta("note") == "up_to_unknown_constants");
    CHECK(std::stod(meta("epsilon")) == 0.1);
}

TEST_CASE("verify driver runs clean") {
    plmc::ExperimentSpec s;
    s.kind = Kind::Verify;
    const plmc::ExperimentReport rep = plmc::run_verify(s);
    CHECK(rep.kind == "verify");
    CHECK(rep.checks.size() == 29);
    for (const plmc::CheckRow& c : rep.checks) {
        INFO(c.id << " worst_margin=" << c.worst_margin);
        CHECK(c.pass);
    }
    CHECK(!rep.any_check_failed);
}
