// Unified command-line entry point: single-scenario RBSDE solves, the
// second-order backward-sup solver, robust American pricing, the appendix
// laboratory, and the verification suites.

#include <chrono>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rbsdelab/io.hpp"

namespace {

using namespace rbsdelab;

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    for (const auto& tok : split(s, ',')) out.push_back(std::stod(tok));
    return out;
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

int run_rbsde_solve(const std::string& instance_path, const std::string& scenario_token,
                    double penalty, const std::string& out_path) {
    Timer timer;
    const auto cfg = load_instance_config(instance_path);
    const auto inst = build_instance(cfg);
    const auto report = validate_instance(inst);
    for (const auto& issue : report.issues)
        std::cerr << "validation: " << issue.code << ": " << issue.detail << "\n";
    const auto lat = build_lattice(inst.grid, inst.interval, inst.x0);
    const auto sc = parse_scenario(scenario_token, inst.grid);
    const auto sol = penalty > 0.0 ? solve_penalized(inst, lat, sc, penalty)
                                   : solve_rbsde(inst, lat, sc);
    if (!out_path.empty()) write_solution_csv(out_path, inst, lat, sol);
    std::cout << "y0=" << sol.y.at(0, lat.center)
              << " skorohod_residual=" << skorohod_residual(sol, inst, lat)
              << " picard_iters=" << sol.max_picard_iters << " runtime_s=" << timer.seconds()
              << "\n";
    return 0;
}

int run_soref_solve(const std::string& instance_path, const std::string& a_grid_arg,
                    const std::string& family_arg, const std::string& out_path,
                    const std::string& surfaces_path) {
    Timer timer;
    const auto cfg = load_instance_config(instance_path);
    const auto inst = build_instance(cfg);
    const auto lat = build_lattice(inst.grid, inst.interval, inst.x0);
    const auto a_grid =
        a_grid_arg.empty() ? default_a_grid(inst.interval) : parse_doubles(a_grid_arg);
    auto so = solve_2rbsde_dpp(inst, lat, a_grid);
    ScenarioFamily family;
    if (!family_arg.empty()) {
        for (const auto& tok : split(family_arg, ','))
            family.scenarios.push_back(parse_scenario(tok, inst.grid, &so));
    } else {
        for (double a : a_grid) family.scenarios.push_back(constant_scenario(a));
    }
    fill_diagnostics(so, inst, lat, family);
    if (!out_path.empty()) write_text_file(out_path, soref_report_json(so, lat).dump(2) + "\n");
    if (!surfaces_path.empty()) write_soref_surfaces_csv(surfaces_path, inst, lat, so);
    std::cout << "Y0=" << so.Y.at(0, lat.center) << " min_condition_gap=" << so.min_condition_gap
              << " contact_set_mismatch=" << so.contact_set_mismatch
              << " runtime_s=" << timer.seconds() << "\n";
    return 0;
}

int run_price_american(const std::string& market_path, const std::string& band_arg, double eps,
                       const std::string& a_grid_arg, const std::string& out_path) {
    Timer timer;
    const auto mkt = load_market(market_path);
    const auto band_parts = split(band_arg, ':');
    if (band_parts.size() != 2) throw InvalidInstanceError("band must be a_low:a_high");
    const UncertaintyInterval interval{std::stod(band_parts[0]), std::stod(band_parts[1])};
    const auto a_grid = a_grid_arg.empty() ? default_a_grid(interval) : parse_doubles(a_grid_arg);
    const auto rep = price_american(mkt, interval, a_grid, eps);
    if (!out_path.empty()) write_text_file(out_path, price_report_json(rep).dump(2) + "\n");
    std::cout << "price=" << rep.price << " hedge0=" << rep.hedge0
              << " dominance_violations=" << rep.dominance_violations
              << " min_condition_gap=" << rep.min_condition_gap << " runtime_s=" << timer.seconds()
              << "\n";
    return 0;
}

int run_doob_meyer(const std::string& instance_path, const std::string& scenario_token,
                   const std::string& n_arg, double ramp, const std::string& input_path,
                   const std::string& out_path) {
    Timer timer;
    const auto cfg = load_instance_config(instance_path);
    const auto inst = build_instance(cfg);
    const auto lat = build_lattice(inst.grid, inst.interval, inst.x0);
    const auto sc = parse_scenario(scenario_token, inst.grid);
    Surface Y;
    if (!input_path.empty()) {
        Y = read_surface_csv(input_path, inst.grid.steps + 1, lat.node_count());
    } else {
        const auto sol = solve_rbsde(inst, lat, sc);
        Y = sol.y;
        for (int i = 0; i < Y.rows(); ++i)
            for (int j = 0; j < Y.cols(); ++j)
                Y.at(i, j) += ramp * (inst.grid.horizon - inst.grid.t(i));
    }
    const auto dm = doob_meyer(Y, inst, lat, sc, parse_doubles(n_arg));
    json doc;
    doc["reconstruction_residual"] = dm.reconstruction_residual;
    doc["v_terminal_expected"] = dm.v_terminal_expected;
    doc["k_terminal_expected"] = dm.k_terminal_expected;
    doc["by_n"] = json::array();
    for (const auto& d : dm.by_n)
        doc["by_n"].push_back({{"n", d.n},
                               {"max_gap", d.max_gap},
                               {"v_terminal_estimate", d.v_terminal_estimate}});
    if (!out_path.empty()) write_text_file(out_path, doc.dump(2) + "\n");
    std::cout << "V_T=" << dm.v_terminal_expected << " k_T=" << dm.k_terminal_expected
              << " residual=" << dm.reconstruction_residual << " runtime_s=" << timer.seconds()
              << "\n";
    return 0;
}

int run_downcross(const std::string& paths_path, const std::string& band_arg, int simulate,
                  unsigned long long seed, const std::string& out_path) {
    Timer timer;
    const auto band_parts = split(band_arg, ':');
    if (band_parts.size() != 2) throw InvalidInstanceError("band must be a:b");
    const double a = std::stod(band_parts[0]);
    const double b = std::stod(band_parts[1]);
    json doc;
    if (!paths_path.empty()) {
        const auto paths = read_paths_csv(paths_path);
        json counts = json::array();
        double sum = 0.0;
        for (const auto& p : paths) {
            const int c = downcrossings(p, a, b);
            counts.push_back(c);
            sum += c;
        }
        doc["counts"] = counts;
        doc["empirical_mean"] = paths.empty() ? 0.0 : sum / paths.size();
        std::cout << "paths=" << paths.size() << " mean_downcrossings=" << doc["empirical_mean"]
                  << " runtime_s=" << timer.seconds() << "\n";
    } else {
        DowncrossingExperimentConfig cfg;
        cfg.n_paths = simulate;
        cfg.seed = seed;
        const auto rep = downcrossing_bound_experiment(a, b, cfg);
        doc["empirical_mean"] = rep.empirical_mean;
        doc["bound_value"] = rep.bound_value;
        doc["clt_margin"] = rep.clt_margin;
        doc["pass"] = rep.pass;
        std::cout << "mean=" << rep.empirical_mean << " bound=" << rep.bound_value
                  << " margin=" << rep.clt_margin << " pass=" << rep.pass
                  << " runtime_s=" << timer.seconds() << "\n";
    }
    if (!out_path.empty()) write_text_file(out_path, doc.dump(2) + "\n");
    return 0;
}

int run_verify(const std::string& suite, unsigned long long seed, const std::string& report_path) {
    Timer timer;
    const auto rep = run_suite(suite, seed);
    if (!report_path.empty()) write_text_file(report_path, suite_report_json(rep).dump(2) + "\n");
    for (const auto& c : rep.checks)
        std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << "\n";
    std::cout << "suite=" << suite << " all_pass=" << rep.all_pass()
              << " runtime_s=" << timer.seconds() << "\n";
    return rep.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reflected BSDE / 2RBSDE lattice laboratory"};
    app.require_subcommand(1);
    bool deterministic = false;
    app.add_flag("--deterministic", deterministic, "force serial reductions");

    // rbsde solve
    auto* rbsde_cmd = app.add_subcommand("rbsde", "single-scenario solves");
    rbsde_cmd->require_subcommand(1);
    auto* rbsde_solve = rbsde_cmd->add_subcommand("solve", "solve a reflected BSDE");
    std::string rb_instance, rb_scenario = "const:0.04", rb_out;
    double rb_penalty = 0.0;
    rbsde_solve->add_option("--instance", rb_instance, "instance JSON")->required();
    rbsde_solve->add_option("--scenario", rb_scenario, "const:<a>, ramp:<a0>:<a1>");
    rbsde_solve->add_option("--penalty", rb_penalty, "penalty level n (0: reflected solve)");
    rbsde_solve->add_option("--out", rb_out, "CSV output (t,x,y,z,k_cum)");

    // soref solve
    auto* soref_cmd = app.add_subcommand("soref", "second-order solves");
    soref_cmd->require_subcommand(1);
    auto* soref_solve = soref_cmd->add_subcommand("solve", "backward-sup 2RBSDE solve");
    std::string so_instance, so_a_grid, so_family, so_out, so_surfaces;
    soref_solve->add_option("--instance", so_instance, "instance JSON")->required();
    soref_solve->add_option("--a-grid", so_a_grid, "comma-separated variance grid");
    soref_solve->add_option("--family", so_family, "comma-separated scenarios (incl. dpp-star)");
    soref_solve->add_option("--out", so_out, "report JSON");
    soref_solve->add_option("--surfaces-out", so_surfaces, "surface CSV");

    // price american
    auto* price_cmd = app.add_subcommand("price", "robust option pricing");
    price_cmd->require_subcommand(1);
    auto* price_american_cmd = price_cmd->add_subcommand("american", "American option under a volatility band");
    std::string pr_market, pr_band = "0.01:0.09", pr_a_grid, pr_out;
    double pr_eps = 0.01;
    price_american_cmd->add_option("--market", pr_market, "market JSON")->required();
    price_american_cmd->add_option("--band", pr_band, "a_low:a_high");
    price_american_cmd->add_option("--eps", pr_eps, "exercise tolerance");
    price_american_cmd->add_option("--a-grid", pr_a_grid, "comma-separated variance grid");
    price_american_cmd->add_option("--out", pr_out, "report JSON");

    // glab
    auto* glab_cmd = app.add_subcommand("glab", "appendix laboratory");
    glab_cmd->require_subcommand(1);
    auto* dm_cmd = glab_cmd->add_subcommand("doob-meyer", "nonlinear Doob-Meyer decomposition");
    std::string dm_instance, dm_scenario = "const:0.04", dm_n = "16,64,256", dm_input, dm_out;
    double dm_ramp = 0.0;
    dm_cmd->add_option("--instance", dm_instance, "instance JSON")->required();
    dm_cmd->add_option("--scenario", dm_scenario, "scenario token");
    dm_cmd->add_option("--n", dm_n, "penalty schedule");
    dm_cmd->add_option("--ramp", dm_ramp, "add c*(T-t) to the reflected solution");
    dm_cmd->add_option("--input", dm_input, "surface CSV (step,node,value); overrides --ramp");
    dm_cmd->add_option("--out", dm_out, "report JSON");
    auto* dc_cmd = glab_cmd->add_subcommand("downcross", "downcrossing counts and bound");
    std::string dc_paths, dc_band = "0.5:1.5", dc_out;
    int dc_simulate = 10000;
    unsigned long long dc_seed = 42;
    dc_cmd->add_option("--paths", dc_paths, "paths CSV (one path per row)");
    dc_cmd->add_option("--band", dc_band, "a:b");
    dc_cmd->add_option("--simulate", dc_simulate, "simulated path count when --paths is absent");
    dc_cmd->add_option("--seed", dc_seed, "simulation seed");
    dc_cmd->add_option("--out", dc_out, "report JSON");

    // verify run
    auto* verify_cmd = app.add_subcommand("verify", "oracle and property suites");
    verify_cmd->require_subcommand(1);
    auto* verify_run = verify_cmd->add_subcommand("run", "run a named suite");
    std::string vf_suite = "all", vf_report;
    unsigned long long vf_seed = 42;
    verify_run->add_option("--suite", vf_suite, "suite name or 'all'");
    verify_run->add_option("--seed", vf_seed, "stream seed");
    verify_run->add_option("--report", vf_report, "report JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    if (deterministic) {
#if defined(_WIN32)
#else
        setenv("RBSDE_LAB_THREADS", "1", 1);
#endif
    }

    try {
        if (rbsde_solve->parsed()) return run_rbsde_solve(rb_instance, rb_scenario, rb_penalty, rb_out);
        if (soref_solve->parsed()) return run_soref_solve(so_instance, so_a_grid, so_family, so_out, so_surfaces);
        if (price_american_cmd->parsed()) return run_price_american(pr_market, pr_band, pr_eps, pr_a_grid, pr_out);
        if (dm_cmd->parsed()) return run_doob_meyer(dm_instance, dm_scenario, dm_n, dm_ramp, dm_input, dm_out);
        if (dc_cmd->parsed()) return run_downcross(dc_paths, dc_band, dc_simulate, dc_seed, dc_out);
        if (verify_run->parsed()) return run_verify(vf_suite, vf_seed, vf_report);
    } catch (const InvalidInstanceError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
