// Command-line harness: sample | converge | density | dimdep | verify | mixing.
// Exit codes: 0 success, 1 validation error, 2 property failure, 3 divergence.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "plmc/plmc.hpp"

namespace {

double parse_h_token(const std::string& tok) {
    if (tok.rfind("2^-", 0) == 0) {
        std::size_t pos = 0;
        const int k = std::stoi(tok.substr(3), &pos);
        if (pos != tok.size() - 3 || k < 0)
            throw plmc::invalid_parameter_error("bad step-size token: " + tok);
        return std::ldexp(1.0, -k);
    }
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw plmc::invalid_parameter_error("bad step-size token: " + tok);
    return v;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t comma = s.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

std::vector<double> parse_h_list(const std::string& csv) {
    std::vector<double> out;
    for (const std::string& tok : split_csv(csv)) out.push_back(parse_h_token(tok));
    return out;
}

std::vector<int> parse_d_list(const std::string& csv) {
    std::vector<int> out;
    for (const std::string& tok : split_csv(csv)) {
        std::size_t pos = 0;
        const int d = std::stoi(tok, &pos);
        if (pos != tok.size() || d < 1)
            throw plmc::invalid_parameter_error("bad dimension token: " + tok);
        out.push_back(d);
    }
    return out;
}

struct CommonFlags {
    std::string model = "doublewell";
    double alpha = 1.0;
    double beta = 4.0;
    std::string d_list;
    std::string h_list;
    std::string href;
    double T = 6.0;
    long long traj = 0;
    double theta = 1.0;
    unsigned long long seed = 42;
    std::string out;
    std::string format = "csv";
    std::string dump;
    bool paper = false;
    bool desk = false;
    bool indep = false;
    int threads = 0;
};

void register_common(CLI::App* sub, CommonFlags& f) {
    sub->set_help_flag("--help", "print this help message and exit");
    sub->add_option("--model", f.model, "target model")
        ->check(CLI::IsMember({"doublewell", "ou"}));
    sub->add_option("--alpha", f.alpha, "double-well linear coefficient");
    sub->add_option("--beta", f.beta, "double-well cubic coefficient");
    sub->add_option("--d", f.d_list, "dimension(s), comma separated");
    sub->add_option("--h", f.h_list, "step size(s), comma separated; 2^-k literals allowed");
    sub->add_option("--href", f.href, "reference (fine) step size; 2^-k allowed");
    sub->add_option("--T", f.T, "physical time horizon");
    sub->add_option("--traj", f.traj, "trajectories per ensemble");
    sub->add_option("--theta", f.theta, "projection radius multiplier (>= 1)");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--out", f.out, "report output path");
    sub->add_option("--format", f.format, "report format")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--dump", f.dump, "terminal-state dump path (CSV)");
    sub->add_option("--threads", f.threads, "worker threads (0 = hardware)");
    auto* paper = sub->add_flag("--paper-scale", f.paper,
                                "paper presets (M=3000, h_ref=2^-13)");
    auto* desk = sub->add_flag("--desk-scale", f.desk,
                               "desk presets (default: M=1000, h_ref=2^-11)");
    paper->excludes(desk);
    desk->excludes(paper);
    sub->add_flag("--independent-ref", f.indep,
                  "draw reference noise independently (no common random numbers)");
}

plmc::ExperimentSpec to_spec(const CommonFlags& f, plmc::ExperimentSpec::Kind kind) {
    plmc::ExperimentSpec s;
    s.kind = kind;
    s.model = f.model;
    s.alpha = f.alpha;
    s.beta = f.beta;
    if (!f.d_list.empty()) s.dims = parse_d_list(f.d_list);
    if (!f.h_list.empty()) s.h_grid = parse_h_list(f.h_list);
    if (!f.href.empty()) s.h_ref = parse_h_token(f.href);
    s.T = f.T;
    s.n_traj = f.traj;
    s.theta = f.theta;
    s.seed = f.seed;
    s.paper_scale = f.paper;
    s.independent_ref = f.indep;
    s.out_path = f.out;
    s.format = f.format;
    s.dump_path = f.dump;
    s.n_threads = f.threads;
    return s;
}

std::string get_meta(const plmc::ExperimentReport& rep, const std::string& key) {
    for (const auto& [k, v] : rep.meta)
        if (k == key) return v;
    return "";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Projected Langevin Monte Carlo experiment harness"};
    app.set_help_flag("--help", "print this help message and exit");
    app.set_version_flag("--version", plmc::kVersion);
    app.require_subcommand(1);

    CommonFlags f;
    std::string scheme = "PLMC";
    long long steps = 0;
    double x0 = 0.0;
    double mix_eps = 0.1, mix_gamma = 1.0;
    plmc::MixingConstants mix;
    std::string mix_d = "1", mix_out, mix_format = "csv";

    CLI::App* sample = app.add_subcommand("sample", "run one ensemble, optionally dump states");
    register_common(sample, f);
    sample->add_option("--scheme", scheme, "LMC | PLMC | MTLMC | REFERENCE");
    sample->add_option("--steps", steps, "iteration count (overrides T/h)");
    sample->add_option("--x0", x0, "initial coordinate value, replicated across dimensions");

    CLI::App* converge = app.add_subcommand("converge", "weak-error convergence study over an h grid");
    register_common(converge, f);
    CLI::App* density = app.add_subcommand("density", "PLMC vs MTLMC terminal density comparison");
    register_common(density, f);
    CLI::App* dimdep = app.add_subcommand("dimdep", "error growth across dimensions");
    register_common(dimdep, f);
    CLI::App* verify = app.add_subcommand("verify", "assumption and scheme property suite");
    register_common(verify, f);

    CLI::App* mixing = app.add_subcommand("mixing", "step-size/iteration planner for epsilon-accuracy");
    mixing->add_option("--eps", mix_eps, "target accuracy in (0,1)");
    mixing->add_option("--gamma", mix_gamma, "drift growth exponent (>= 1)");
    mixing->add_option("--d", mix_d, "dimension");
    mixing->add_option("--C", mix.C, "step-size rule constant");
    mixing->add_option("--Cstar", mix.C_star, "convergence prefactor");
    mixing->add_option("--cstar", mix.c_star, "convergence rate");
    mixing->add_option("--phinorm", mix.phi_norm, "||phi||_0");
    mixing->add_option("--x0norm", mix.x0_mean_norm, "E||x0||");
    mixing->add_option("--out", mix_out, "report output path");
    mixing->add_option("--format", mix_format, "report format")
        ->check(CLI::IsMember({"csv", "json"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 1;
    }

    try {
        using Kind = plmc::ExperimentSpec::Kind;
        plmc::ExperimentReport rep;

        if (mixing->parsed()) {
            plmc::ExperimentSpec s;
            s.kind = Kind::Mixing;
            s.mix_epsilon = mix_eps;
            s.mix_gamma = mix_gamma;
            s.dims = parse_d_list(mix_d);
            s.mix_constants = mix;
            s.out_path = mix_out;
            s.format = mix_format;
            plmc::MixingPlan plan;
            rep = plmc::run_mixing(s, &plan);
            if (!s.out_path.empty()) plmc::write_report(rep, s.out_path, s.format);
            std::printf("mixing plan: h=%g, k=%lld (up to unknown constants)\n", plan.h,
                        static_cast<long long>(plan.iterations));
            return 0;
        }

        Kind kind = Kind::Verify;
        if (sample->parsed()) kind = Kind::Sample;
        else if (converge->parsed()) kind = Kind::Converge;
        else if (density->parsed()) kind = Kind::Density;
        else if (dimdep->parsed()) kind = Kind::DimDep;
        else if (verify->parsed()) kind = Kind::Verify;

        plmc::ExperimentSpec spec = to_spec(f, kind);
        if (kind == Kind::Sample) {
            spec.scheme = plmc::parse_scheme(scheme);
            spec.iterations = steps;
            spec.x0_value = x0;
        }
        rep = plmc::run_experiment(spec);
        if (!spec.out_path.empty()) plmc::write_report(rep, spec.out_path, spec.format);

        std::int64_t checks_failed = 0;
        for (const plmc::CheckRow& c : rep.checks)
            if (!c.pass) ++checks_failed;
        std::printf("%s: rows=%zu orders=%zu hist=%zu checks=%zu failed_checks=%lld "
                    "divergences=%s (%.2f s)\n",
                    rep.kind.c_str(), rep.rows.size(), rep.orders.size(), rep.hist.size(),
                    rep.checks.size(), static_cast<long long>(checks_failed),
                    get_meta(rep, "divergences").empty() ? "0" : get_meta(rep, "divergences").c_str(),
                    rep.runtime_seconds);

        if (rep.any_check_failed) return 2;
        if (rep.any_cell_failed) return 3;
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
