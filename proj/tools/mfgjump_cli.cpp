// mfgjump: command-line front end for the solvers and experiments.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mfgjump/config.hpp"
#include "mfgjump/convergence.hpp"
#include "mfgjump/hjb.hpp"
#include "mfgjump/kinetic.hpp"
#include "mfgjump/mfg.hpp"
#include "mfgjump/model.hpp"
#include "mfgjump/mollify.hpp"
#include "mfgjump/particle.hpp"

namespace fs = std::filesystem;
using namespace mfgjump;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitInvalidConfig = 2;
constexpr int kExitNotConverged = 3;

struct Options {
    std::string command;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::size_t workers = default_workers();
    std::string out_dir = ".";
    std::string N;
    std::optional<std::size_t> reps;
    std::optional<double> control;
    std::vector<std::string> sets;
};

struct Run {
    Options opt;
    ScenarioConfig cfg;
    Scenario scenario;
    nlohmann::json manifest;
    std::vector<std::string> outputs;

    std::ofstream open(const std::string& name) {
        const auto path = fs::path(opt.out_dir) / name;
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot write " + path.string());
        outputs.push_back(name);
        return os;
    }
};

std::vector<std::size_t> parse_counts(const std::string& s) {
    std::vector<std::size_t> v;
    for (const auto& tok : detail::split_inputs({s})) v.push_back(static_cast<std::size_t>(detail::parse_uint("--N", tok)));
    return v;
}

EquilibriumSolution equilibrium_or_throw(Run& run) {
    auto eq = solve_equilibrium(run.scenario);
    run.manifest["equilibrium"] = {{"converged", eq.converged}, {"iterations", eq.iterations}, {"residual", eq.residual}};
    if (!eq.converged) {
        auto os = run.open("residuals.csv");
        write_csv(os, eq.history);
    }
    return eq;
}

int cmd_hypcheck(Run& run) {
    const auto r = hypothesis_probe(run.scenario.model, run.cfg.probe_samples, run.cfg.seed);
    auto os = run.open("hypcheck.csv");
    os.precision(17);
    os << "quantity,value\n"
       << "lambda_max," << r.lambda_max << '\n'
       << "lipschitz_x," << r.lipschitz_x << '\n'
       << "lipschitz_mu," << r.lipschitz_mu << '\n'
       << "lipschitz_u," << r.lipschitz_u << '\n'
       << "curvature_uu," << r.curvature_uu << '\n'
       << "gronwall_constant," << r.gronwall_constant() << '\n'
       << "passed," << (r.passed() ? 1 : 0) << '\n';
    run.manifest["passed"] = r.passed();
    std::cout << "hypotheses " << (r.passed() ? "hold" : "VIOLATED") << "; Gronwall constant " << r.gronwall_constant()
              << '\n';
    return r.passed() ? 0 : kExitCheckFailed;
}

FeedbackControl constant_control(const Run& run) {
    const auto& U = run.scenario.model.controls;
    const double u = run.opt.control.value_or(0.5 * (U.u_min + U.u_max));
    if (!U.contains(u)) throw ConfigError("--control", "must lie in the control set");
    return FeedbackControl::constant(run.scenario.times(), run.scenario.model.lattice.size(), u);
}

int cmd_kinetic(Run& run) {
    const auto gamma = constant_control(run);
    ClipLog log;
    const auto curve = solve_kinetic(run.scenario.model, run.scenario.initial, gamma, run.scenario.kinetic,
                                     run.scenario.horizon, &log);
    auto os = run.open("curve.csv");
    write_csv(os, curve);
    run.manifest["clipped_mass"] = log.total;
    std::cout << "kinetic flow: " << curve.size() << " snapshots, final mean "
              << mean_position(curve.snapshots.back()) << '\n';
    return 0;
}

int cmd_hjb(Run& run) {
    const auto gamma = constant_control(run);
    const auto curve =
        solve_kinetic(run.scenario.model, run.scenario.initial, gamma, run.scenario.kinetic, run.scenario.horizon);
    const auto vg = solve_hjb(run.scenario.model, curve);
    const double res = duhamel_residual(run.scenario.model, vg, curve);
    auto os = run.open("value.csv");
    write_csv(os, vg);
    run.manifest["duhamel_residual"] = res;
    std::cout << "value solved; Duhamel residual " << res << '\n';
    return 0;
}

int cmd_equilibrium(Run& run) {
    const auto eq = solve_equilibrium(run.scenario);
    {
        auto os = run.open("curve.csv");
        write_csv(os, eq.curve);
    }
    {
        auto os = run.open("value.csv");
        write_csv(os, eq.value);
    }
    {
        auto os = run.open("residuals.csv");
        write_csv(os, eq.history);
    }
    run.manifest["equilibrium"] = {{"converged", eq.converged}, {"iterations", eq.iterations}, {"residual", eq.residual}};
    if (!eq.converged) {
        std::cerr << "fixed point did not converge: best residual " << eq.residual << " after " << eq.history.size()
                  << " iterations (tol " << run.scenario.fixed_point.tol << ")\n";
        return kExitNotConverged;
    }
    std::cout << "converged in " << eq.iterations << " iterations, residual " << eq.residual << '\n';
    return 0;
}

int cmd_simulate(Run& run) {
    const auto eq = equilibrium_or_throw(run);
    if (!eq.converged) return kExitNotConverged;
    auto sim = sim_config(run.cfg, run.opt.workers);
    if (!run.opt.N.empty()) {
        const auto n = parse_counts(run.opt.N);
        if (n.size() != 1) throw ConfigError("--N", "simulate takes a single N");
        sim.N = n[0];
    }
    if (run.opt.reps) sim.reps = *run.opt.reps;
    sim.sampling = InitialSampling::iid;
    const auto recs = simulate_nplayer(run.scenario.model, eq.policy(), sim, run.scenario.horizon, run.scenario.initial);
    {
        auto os = run.open("paths.csv");
        write_paths_csv(os, recs);
    }
    {
        auto os = run.open("payoffs.csv");
        write_payoffs_csv(os, recs);
    }
    if (recs.size() >= 2) {
        const auto e = payoff_estimate(recs);
        run.manifest["payoff"] = {{"mean", e.mean}, {"se", e.se}};
        std::cout << "player 0 payoff " << e.mean << " +- " << e.se << " (W(0, x0) = "
                  << eq.value.value(0, run.scenario.model.lattice.nearest_node({run.cfg.x0})) << ")\n";
    }
    return 0;
}

void write_fit(Run& run, const std::string& experiment, const std::vector<RatePoint>& pts) {
    std::optional<RateFit> fit;
    try {
        fit = rate_fit(pts, run.cfg.seed, 1000, &std::cerr);
    } catch (const std::invalid_argument& e) {
        std::cerr << "no rate fit: " << e.what() << '\n';
    }
    auto os = run.open("results.csv");
    write_results_csv(os, experiment, pts, fit ? &*fit : nullptr);
    if (fit) {
        run.manifest["fit"] = {{"slope", fit->slope}, {"ci_lo", fit->ci_lo}, {"ci_hi", fit->ci_hi}};
        std::cout << experiment << " slope " << fit->slope << " [" << fit->ci_lo << ", " << fit->ci_hi << "]\n";
    } else {
        run.manifest["fit"] = nullptr;
    }
}

int cmd_functional_gap(Run& run) {
    const auto eq = equilibrium_or_throw(run);
    if (!eq.converged) return kExitNotConverged;
    const auto Ns = run.opt.N.empty() ? run.cfg.functional_N : parse_counts(run.opt.N);
    const auto F = centered_quadratic(run.scenario, eq.policy());
    GapOptions g;
    g.seed = run.cfg.seed;
    g.workers = run.opt.workers;
    g.max_reps = run.cfg.functional_max_reps;
    std::vector<RatePoint> pts;
    for (std::size_t N : Ns) {
        const auto e = functional_gap(F, N, run.opt.reps.value_or(run.cfg.functional_reps), run.scenario, eq.policy(), g);
        pts.push_back({static_cast<double>(N), e.gap, e.se});
        std::cout << "N=" << N << " gap " << e.gap << " se " << e.se << " reps " << e.reps << (e.capped ? " (capped)" : "")
                  << '\n';
    }
    write_fit(run, "functional_gap", pts);
    return 0;
}

int cmd_nash_gap(Run& run) {
    const auto eq = equilibrium_or_throw(run);
    if (!eq.converged) return kExitNotConverged;
    const auto Ns = run.opt.N.empty() ? run.cfg.nash_N : parse_counts(run.opt.N);
    const auto devs = default_deviations(eq.policy(), run.scenario.model.controls, run.cfg.deviation_shifts);
    std::vector<RatePoint> pts;
    for (std::size_t N : Ns) {
        const auto r = nash_gap(N, run.opt.reps.value_or(run.cfg.nash_reps), run.scenario, eq.policy(), devs,
                                run.cfg.x0, run.cfg.seed, run.opt.workers);
        pts.push_back({static_cast<double>(N), r.gap, r.se});
        std::cout << "N=" << N << " gap " << r.gap << " (raw " << r.raw_gap << ") se " << r.se << '\n';
    }
    write_fit(run, "nash_gap", pts);
    return 0;
}

int cmd_mollify_check(Run& run) {
    std::vector<BoundCheck> all;
    for (std::size_t d : run.cfg.mollify_dims) {
        auto part = d == 1 ? approximation_bound_report<1>(run.cfg.mollify_j, run.cfg.mollify_delta, run.cfg.seed)
                           : approximation_bound_report<2>(run.cfg.mollify_j, run.cfg.mollify_delta, run.cfg.seed);
        all.insert(all.end(), part.begin(), part.end());
    }
    auto os = run.open("bounds.csv");
    write_csv(os, all);
    std::size_t failed = 0;
    for (const auto& c : all) failed += c.holds() ? 0 : 1;
    run.manifest["bounds_checked"] = all.size();
    run.manifest["bounds_failed"] = failed;
    std::cout << all.size() - failed << " of " << all.size() << " bounds hold\n";
    return failed == 0 ? 0 : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mean-field jump game solver and Monte-Carlo checks"};
    app.set_version_flag("--version", std::string(MFGJUMP_VERSION));
    Options opt;
    const std::vector<std::string> commands{"hypcheck", "kinetic", "hjb", "equilibrium", "simulate",
                                            "functional-gap", "nash-gap", "mollify-check"};
    app.add_option("command", opt.command, "Subcommand")->required()->check(CLI::IsMember(commands));
    auto* pos_cfg = app.add_option("config_file", opt.config, "Scenario file");
    app.add_option("-c,--config", opt.config, "Scenario file")->excludes(pos_cfg);
    app.add_option("--seed", opt.seed, "Root seed (overrides sim.seed)");
    app.add_option("--workers", opt.workers, "Worker threads (default: MFGJUMP_WORKERS or 1)")->check(CLI::PositiveNumber);
    app.add_option("--out-dir", opt.out_dir, "Directory for CSV and manifest output");
    app.add_option("--N", opt.N, "Comma-separated player counts");
    app.add_option("--reps", opt.reps, "Replicas per N");
    app.add_option("--control", opt.control, "Constant control for kinetic/hjb");
    app.add_option("--set", opt.sets, "Override a config key: section.key=value");
    CLI11_PARSE(app, argc, argv);

    const auto start = std::chrono::steady_clock::now();
    ScenarioConfig cfg;
    std::optional<Scenario> scenario;
    try {
        cfg = opt.config.empty() ? ScenarioConfig{} : load_config(opt.config);
        for (const auto& s : opt.sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("--set", "expected section.key=value, got '" + s + "'");
            apply_override(cfg, s.substr(0, eq), s.substr(eq + 1));
        }
        if (opt.seed) cfg.seed = *opt.seed;
        scenario.emplace(to_scenario(cfg));
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid configuration: " << e.what() << '\n';
        return kExitInvalidConfig;
    }
    Run run{opt, cfg, std::move(*scenario), {}, {}};
    int code = 0;
    fs::create_directories(opt.out_dir);
    run.manifest = {{"command", opt.command},
                    {"config", opt.config},
                    {"config_hash", hex64(config_hash(run.cfg))},
                    {"seed", run.cfg.seed},
                    {"workers", opt.workers},
                    {"version", MFGJUMP_VERSION}};
    try {
        if (opt.command == "hypcheck") code = cmd_hypcheck(run);
        else if (opt.command == "kinetic") code = cmd_kinetic(run);
        else if (opt.command == "hjb") code = cmd_hjb(run);
        else if (opt.command == "equilibrium") code = cmd_equilibrium(run);
        else if (opt.command == "simulate") code = cmd_simulate(run);
        else if (opt.command == "functional-gap") code = cmd_functional_gap(run);
        else if (opt.command == "nash-gap") code = cmd_nash_gap(run);
        else code = cmd_mollify_check(run);
    } catch (const ConfigError& e) {
        std::cerr << "invalid configuration: " << e.what() << '\n';
        return kExitInvalidConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        code = kExitCheckFailed;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    run.manifest["wall_time_s"] = wall;
    run.manifest["exit_code"] = code;
    run.manifest["outputs"] = run.outputs;
    run.manifest["modules"] = {{"measures", MFGJUMP_VERSION}, {"model", MFGJUMP_VERSION},  {"kinetic", MFGJUMP_VERSION},
                               {"hjb", MFGJUMP_VERSION},      {"mfg", MFGJUMP_VERSION},    {"particle", MFGJUMP_VERSION},
                               {"convergence", MFGJUMP_VERSION}, {"mollify", MFGJUMP_VERSION}};
    std::ofstream mf(fs::path(opt.out_dir) / "manifest.json");
    mf << run.manifest.dump(2) << '\n';
    return code;
}
