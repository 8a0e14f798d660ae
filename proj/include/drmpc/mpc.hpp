#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "drmpc/gp.hpp"
#include "drmpc/nlp.hpp"
#include "drmpc/predict.hpp"
#include "drmpc/risk.hpp"
#include "drmpc/types.hpp"

namespace drmpc::mpc {

enum class ControllerKind { DrMpc, Saa };
enum class FallbackMode { Brake, Strict };

struct VehicleLimits {
    double l_f = 2.0, l_r = 2.0;
    double v_min = 0.0, v_max = 30.0;
    double steer_max = M_PI / 6.0;
};

struct MPCConfig {
    int K = 5;
    double T_s = 0.01, T_o = 0.01;
    Mat Q, R, P;  // tracking, control and terminal weights (quadratic forms)
    risk::RiskSpec risk;
    int M = 20;  // GP window capacity
    int N = 50;  // samples per prediction step
    ControllerKind kind = ControllerKind::DrMpc;
    FallbackMode fallback = FallbackMode::Brake;
    VehicleLimits limits;
    std::vector<gp::GPHyperparams> gp_hyper;  // one per obstacle-state dim
    gp::GPFitOptions gp_options;
    nlp::SolveOptions solver;
    double nominal_speed = 1.0;  // cold-start control guess
    std::uint64_t master_seed = 1;

    void validate() const;
};

/// Kinematic bicycle step shared by the simulator and the MPC dynamics
/// constraints (no input clamping, no angle wrap: the NLP needs smoothness).
Vec bicycle_step(const Vec& state, double v, double steer, double l_f,
                 double l_r, double T_s);

/// Samples for one prediction step: N normalized half-space draws.
using StepSamples = std::vector<predict::NormalizedHalfspaceSample>;

/// Assembled stage problem plus the block bookkeeping needed for warm starts
/// and risk audits.
struct StageProblem {
    nlp::NLProblem problem;
    int u_offset = 0, xi_offset = 0, y_offset = 0;
    int n_u = 2, n_xi = 4, n_y = 2;
    int K = 0;
    // risk blocks indexed [k-1][obstacle]
    std::vector<std::vector<risk::DrConstraintBlock>> blocks;
    risk::RiskSpec risk;
    bool robust = true;
};

/// Tracking objective per the quadratic stage cost. `ref_path` must hold K+1
/// positions aligned with the horizon.
nlp::Objective build_cost(const std::vector<Vec>& ref_path, const Mat& Q,
                          const Mat& R, const Mat& P, int u_offset, int y_offset,
                          int K);

/// Full distributionally robust stage problem: dynamics, output, initial
/// condition, per-step risk blocks, and control bounds.
/// `samples[o][k-1]` holds the step-(k) draws for obstacle o.
StageProblem build_drmpc(const Vec& xi_t,
                         const std::vector<std::vector<StepSamples>>& samples,
                         const std::vector<Vec>& ref_path, const MPCConfig& cfg);

/// Sample-average baseline: identical except the risk blocks drop the
/// Wasserstein terms (no lambda, no quadratic coupling).
StageProblem build_saampc(const Vec& xi_t,
                          const std::vector<std::vector<StepSamples>>& samples,
                          const std::vector<Vec>& ref_path, const MPCConfig& cfg);

/// Shifts the previous solution one step forward (u, xi, y), rolls the tail,
/// and re-initializes the risk blocks. Falls back to the problem's cold start
/// on shape mismatch.
Vec warm_start(const nlp::NLSolution& prev, const StageProblem& stage,
               const Vec& xi_t,
               const std::vector<std::vector<StepSamples>>& samples,
               const MPCConfig& cfg);

struct Observation {
    Vec state;     // obstacle state (x, y, heading)
    Vec velocity;  // measured velocity, same dimension
};

struct StageDiagnostics {
    nlp::SolveStatus status = nlp::SolveStatus::NumericFailure;
    bool fallback_applied = false;
    double objective = 0.0;
    double kkt_residual = 0.0;
    double feasibility = 0.0;
    int iterations = 0;
    double solve_seconds = 0.0;
    Mat risk_lhs;           // K x L budget left-hand sides at the solution
    double risk_lhs_max = 0.0;
};

struct ControllerState {
    std::vector<gp::GPDataset> windows;  // one sliding window per obstacle
    std::optional<nlp::NLSolution> previous;
    int stage = 0;
};

/// Receding-horizon controller: per stage it updates the GP windows, fits,
/// propagates beliefs, samples half-spaces, assembles the stage problem
/// (warm-started) and returns the first control input.
class Controller {
public:
    Controller(MPCConfig cfg,
               std::vector<predict::ObstacleGeometry> obstacle_geometry);

    std::pair<Vec, StageDiagnostics> step(const Vec& robot_state,
                                          const std::vector<Observation>& obs,
                                          const std::vector<Vec>& ref_window);

    const ControllerState& state() const { return state_; }
    const MPCConfig& config() const { return cfg_; }

private:
    MPCConfig cfg_;
    std::vector<predict::ObstacleGeometry> geometry_;
    ControllerState state_;
};

} // namespace drmpc::mpc
