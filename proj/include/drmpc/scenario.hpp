#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "drmpc/sim.hpp"
#include "drmpc/types.hpp"

namespace drmpc::cli {

/// Fully validated scenario: track, vehicle, obstacle scripts, GP and MPC
/// parameters, seeds. One human-readable JSON file per scenario.
struct Scenario {
    std::string name = "scenario";
    std::uint64_t seed = 1;

    double track_center_x = 0.0, track_center_y = 0.0;
    double straight_length = 10.0, radius = 5.0;

    sim::VehicleParams vehicle;
    std::optional<sim::VehicleState> robot_start;

    // one RBF hyperparameter set shared by the output dimensions
    Vec gp_length_scales;  // per obstacle-state dimension
    double gp_signal_variance = 1.0;
    double gp_noise_variance = 1e-4;
    double gp_prior_mean = 0.0;
    int gp_window = 20;
    bool gp_zero_fill_window = false;
    std::string gp_empty_window_policy = "prior";  // prior | error

    int horizon = 5;
    double ts = 0.01, to = 0.01;
    Vec q_diag, r_diag, p_diag;
    double alpha = 0.95, delta = 0.01, theta = 5e-5;
    int samples = 50;
    std::string controller = "drmpc";  // drmpc | saa
    std::string fallback = "brake";    // brake | strict
    double v_nominal = 1.0;
    double lookahead_cap = 2.0;  // reference marker lead limit (meters)
    double solver_tol = 1e-6, solver_feas_tol = 1e-6;
    int solver_max_iter = 200;

    std::vector<sim::ObstacleScript> obstacles;
    double max_time = 60.0;

    void validate() const;
    sim::RunSetup to_run_setup() const;
    mpc::MPCConfig to_mpc_config() const;
};

bool operator==(const Scenario& a, const Scenario& b);

/// Parses and validates; unknown keys warn on stderr, missing required
/// fields raise invalid_argument naming the field.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& json_text);

/// Canonical JSON form; load(write(s)) == s.
std::string scenario_to_json(const Scenario& s);
void write_scenario(const Scenario& s, const std::string& path);

/// The bundled desk-scale scenario carrying the published parameter set
/// (K=5, alpha=0.95, delta=0.01, N=50, M=20, Ts=To=0.01) on a short oval
/// with one swerving and one parked obstacle.
Scenario paper_like_scenario();

/// FNV-1a hash of the canonical form, for sweep bookkeeping.
std::uint64_t scenario_hash(const Scenario& s);

} // namespace drmpc::cli
