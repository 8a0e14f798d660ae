#include "drmpc/runner.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace drmpc::cli {

namespace fs = std::filesystem;

RunResult run_scenario(const Scenario& scenario, const RunOptions& opts) {
    RunResult result;
    Scenario s = scenario;
    if (opts.controller) s.controller = *opts.controller;
    if (opts.theta) s.theta = *opts.theta;
    if (opts.seed) s.seed = *opts.seed;
    if (opts.strict) s.fallback = *opts.strict ? "strict" : "brake";

    sim::RunSetup setup;
    try {
        setup = s.to_run_setup();
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        result.exit_code = ExitUsage;
        return result;
    }

    try {
        result.trace = sim::run_closed_loop(setup);
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        result.exit_code = ExitNumeric;
        return result;
    }

    const auto& summary = result.trace.summary;
    if (summary.collision)
        result.exit_code = ExitCollision;
    else if (summary.end_reason == "abort")
        result.exit_code = ExitAbort;
    else if (summary.lap_completed)
        result.exit_code = ExitLap;
    else
        result.exit_code = ExitTimeout;

    if (!opts.out_dir.empty()) {
        std::error_code ec;
        fs::create_directories(opts.out_dir, ec);
        const std::string base = opts.out_dir + "/" + s.name + "_" +
                                 s.controller + "_theta" +
                                 std::to_string(s.theta) + "_seed" +
                                 std::to_string(s.seed);
        result.trace_path = base + "_trace.csv";
        result.summary_path = base + "_summary.txt";
        std::ofstream trace_out(result.trace_path);
        std::ofstream summary_out(result.summary_path);
        if (!trace_out || !summary_out) {
            std::fprintf(stderr, "error: cannot write outputs under '%s'\n",
                         opts.out_dir.c_str());
            result.exit_code = ExitIo;
            return result;
        }
        sim::write_trace_csv(result.trace, trace_out, opts.include_timing);
        sim::write_summary(summary, summary_out);
    }

    if (opts.log_level >= 1) {
        std::fprintf(stderr,
                     "run %s/%s theta=%g seed=%llu: %s (%d stages, cost %.2f, "
                     "min clearance %.3f, avg solve %.1f ms)\n",
                     s.name.c_str(), s.controller.c_str(), s.theta,
                     static_cast<unsigned long long>(s.seed),
                     summary.end_reason.c_str(), summary.stages,
                     summary.accumulated_cost, summary.min_clearance,
                     summary.avg_solve_ms);
    }
    return result;
}

SweepResult sweep(const Scenario& scenario, const std::vector<double>& thetas,
                  const std::vector<std::uint64_t>& seeds,
                  const RunOptions& opts) {
    if (thetas.empty())
        throw std::invalid_argument("sweep: need at least one theta");
    std::vector<std::uint64_t> seed_list = seeds;
    if (seed_list.empty()) seed_list.push_back(scenario.seed);

    SweepResult result;
    for (const double theta : thetas) {
        for (const std::uint64_t seed : seed_list) {
            RunOptions cell_opts = opts;
            cell_opts.theta = theta;
            cell_opts.seed = seed;
            SweepCell cell;
            cell.theta = theta;
            cell.seed = seed;
            Scenario cell_scenario = scenario;
            cell_scenario.theta = theta;
            cell_scenario.seed = seed;
            cell.scenario_hash = scenario_hash(cell_scenario);
            try {
                const auto run = run_scenario(scenario, cell_opts);
                cell.exit_code = run.exit_code;
                cell.summary = run.trace.summary;
            } catch (const std::exception& e) {
                std::fprintf(stderr, "sweep cell theta=%g seed=%llu failed: %s\n",
                             theta, static_cast<unsigned long long>(seed),
                             e.what());
                cell.exit_code = ExitNumeric;
            }
            result.cells.push_back(std::move(cell));
        }
    }
    return result;
}

void write_sweep_csv(const SweepResult& result, std::ostream& os) {
    os << "theta,seed,exit_code,accumulated_cost,lap_time_s,avg_solve_ms,"
          "collision,min_clearance,scenario_hash\n";
    char buf[64];
    for (const auto& c : result.cells) {
        std::snprintf(buf, sizeof(buf), "%.17g", c.theta);
        os << buf << "," << c.seed << "," << c.exit_code << ",";
        std::snprintf(buf, sizeof(buf), "%.17g", c.summary.accumulated_cost);
        os << buf << ",";
        std::snprintf(buf, sizeof(buf), "%.17g", c.summary.lap_time_s);
        os << buf << ",";
        std::snprintf(buf, sizeof(buf), "%.17g", c.summary.avg_solve_ms);
        os << buf << "," << (c.summary.collision ? 1 : 0) << ",";
        std::snprintf(buf, sizeof(buf), "%.17g", c.summary.min_clearance);
        os << buf << "," << c.scenario_hash << "\n";
    }
}

} // namespace drmpc::cli
