#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "drmpc/scenario.hpp"
#include "drmpc/sim.hpp"

namespace drmpc::cli {

// Exit-code contract (stable, documented in the README):
//   0 lap completed     1 usage/config error   2 collision
//   3 infeasible abort  4 numeric failure      5 I/O error
//   6 timeout (lap not completed in time)
enum ExitCode : int {
    ExitLap = 0,
    ExitUsage = 1,
    ExitCollision = 2,
    ExitAbort = 3,
    ExitNumeric = 4,
    ExitIo = 5,
    ExitTimeout = 6,
};

struct RunOptions {
    std::optional<std::string> controller;   // override scenario controller
    std::optional<double> theta;             // override Wasserstein radius
    std::optional<std::uint64_t> seed;       // override master seed
    std::string out_dir;                     // empty: no files written
    std::optional<bool> strict;              // override fallback mode
    bool include_timing = true;              // solve_ms column in the trace
    int log_level = 1;                       // 0 quiet, 1 summary, 2 chatty
};

struct RunResult {
    int exit_code = ExitUsage;
    sim::SimTrace trace;
    std::string trace_path;    // written files, when out_dir was given
    std::string summary_path;
};

/// Applies overrides, runs the closed loop, writes trace + summary files.
RunResult run_scenario(const Scenario& scenario, const RunOptions& opts);

struct SweepCell {
    double theta = 0.0;
    std::uint64_t seed = 0;
    int exit_code = ExitUsage;
    sim::SimSummary summary;
    std::uint64_t scenario_hash = 0;
};

struct SweepResult {
    std::vector<SweepCell> cells;
};

/// Runs every (theta, seed) cell; per-cell failures land in the table
/// without aborting the sweep.
SweepResult sweep(const Scenario& scenario, const std::vector<double>& thetas,
                  const std::vector<std::uint64_t>& seeds,
                  const RunOptions& opts);

/// Machine-readable comparison table, one row per cell:
/// theta,seed,exit_code,accumulated_cost,lap_time_s,avg_solve_ms,collision,
/// min_clearance,scenario_hash
void write_sweep_csv(const SweepResult& result, std::ostream& os);

} // namespace drmpc::cli
