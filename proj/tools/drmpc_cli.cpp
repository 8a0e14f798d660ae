// Command-line front end: scenario runs, theta sweeps, scenario inspection.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drmpc/runner.hpp"
#include "drmpc/scenario.hpp"

using namespace drmpc;

int main(int argc, char** argv) {
    CLI::App app{"Distributionally robust MPC simulator"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir;
    std::string controller;
    double theta = -1.0;
    std::uint64_t seed = 0;
    bool have_seed = false;
    bool strict = false;
    bool no_timing = false;
    int log_level = 1;

    auto* run_cmd = app.add_subcommand("run", "run one closed-loop simulation");
    run_cmd->add_option("--scenario", scenario_path, "scenario file")->required();
    run_cmd->add_option("--controller", controller, "drmpc|saa");
    run_cmd->add_option("--theta", theta, "Wasserstein radius override");
    run_cmd->add_option("--seed", seed, "master seed override")
        ->each([&](const std::string&) { have_seed = true; });
    run_cmd->add_option("--out", out_dir, "output directory for trace/summary");
    run_cmd->add_flag("--strict", strict, "abort on the first infeasible stage");
    run_cmd->add_flag("--no-timing", no_timing,
                      "write zeros into the trace solve_ms column");
    run_cmd->add_option("--log-level", log_level, "0 quiet, 1 summary, 2 chatty");

    std::vector<double> thetas;
    std::vector<std::uint64_t> seeds;
    std::string table_path;
    auto* sweep_cmd = app.add_subcommand("sweep", "run a theta x seed grid");
    sweep_cmd->add_option("--scenario", scenario_path, "scenario file")->required();
    sweep_cmd->add_option("--thetas", thetas, "Wasserstein radii")->required();
    sweep_cmd->add_option("--seeds", seeds, "master seeds");
    sweep_cmd->add_option("--controller", controller, "drmpc|saa");
    sweep_cmd->add_option("--out", out_dir, "output directory");
    sweep_cmd->add_option("--table", table_path, "sweep table CSV path");
    sweep_cmd->add_flag("--no-timing", no_timing,
                        "write zeros into trace solve_ms columns");
    sweep_cmd->add_option("--log-level", log_level, "0 quiet, 1 summary");

    auto* print_cmd =
        app.add_subcommand("print", "validate and echo a scenario in canonical form");
    print_cmd->add_option("--scenario", scenario_path, "scenario file")->required();

    std::string init_path = "paper_like.scenario";
    auto* init_cmd =
        app.add_subcommand("init", "write the bundled paper-like scenario");
    init_cmd->add_option("--out", init_path, "destination path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (init_cmd->parsed()) {
            cli::write_scenario(cli::paper_like_scenario(), init_path);
            std::fprintf(stderr, "wrote %s\n", init_path.c_str());
            return 0;
        }

        cli::Scenario scenario = cli::load_scenario(scenario_path);

        if (print_cmd->parsed()) {
            std::cout << cli::scenario_to_json(scenario);
            return 0;
        }

        cli::RunOptions opts;
        if (!controller.empty()) opts.controller = controller;
        if (theta >= 0.0) opts.theta = theta;
        if (have_seed) opts.seed = seed;
        if (strict) opts.strict = true;
        opts.out_dir = out_dir;
        opts.include_timing = !no_timing;
        opts.log_level = log_level;

        if (run_cmd->parsed()) {
            return cli::run_scenario(scenario, opts).exit_code;
        }

        // sweep
        auto result = cli::sweep(scenario, thetas, seeds, opts);
        if (table_path.empty()) {
            cli::write_sweep_csv(result, std::cout);
        } else {
            std::ofstream out(table_path);
            if (!out) {
                std::fprintf(stderr, "error: cannot write '%s'\n",
                             table_path.c_str());
                return cli::ExitIo;
            }
            cli::write_sweep_csv(result, out);
        }
        for (const auto& cell : result.cells)
            if (cell.exit_code != cli::ExitLap) return cell.exit_code;
        return 0;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return cli::ExitUsage;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return cli::ExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return cli::ExitIo;
    }
}
