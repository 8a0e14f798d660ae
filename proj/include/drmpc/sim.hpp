#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "drmpc/mpc.hpp"
#include "drmpc/predict.hpp"
#include "drmpc/types.hpp"

namespace drmpc::sim {

/// Vehicle pose with angles wrapped to (-pi, pi].
struct VehicleState {
    double x = 0.0, y = 0.0;
    double theta = 0.0;  // heading
    double beta = 0.0;   // velocity angle

    Vec as_vec() const;
};

struct VehicleParams {
    double l_f = 2.0, l_r = 2.0;
    double v_min = 0.0, v_max = 30.0;
    double steer_max = M_PI / 6.0;
};

double wrap_angle(double a);

/// One bicycle-dynamics step. Inputs outside the bounds are clamped;
/// `clamped` reports that when non-null.
VehicleState vehicle_step(const VehicleState& s, double v, double steer,
                          const VehicleParams& p, double T_s,
                          bool* clamped = nullptr);

/// Closed oval centerline: two straights joined by semicircular arcs,
/// parameterized by arc length starting at the beginning of the bottom
/// straight, running counterclockwise.
class OvalTrack {
public:
    OvalTrack() = default;
    OvalTrack(double center_x, double center_y, double straight_length,
              double radius);

    double length() const { return 2.0 * straight_ + 2.0 * M_PI * radius_; }
    Vec point_at(double s) const;
    double heading_at(double s) const;
    double nearest_s(const Vec& p) const;

    double center_x() const { return cx_; }
    double center_y() const { return cy_; }
    double straight_length() const { return straight_; }
    double radius() const { return radius_; }

private:
    double cx_ = 0.0, cy_ = 0.0;
    double straight_ = 10.0;
    double radius_ = 5.0;
};

struct Waypoint {
    double t = 0.0;
    double x = 0.0, y = 0.0;
    std::optional<double> theta;  // derived from motion when absent
};

/// Piecewise-linear scripted obstacle trajectory; heading follows the segment
/// direction unless waypoints pin it explicitly.
struct ObstacleScript {
    std::vector<Waypoint> waypoints;          // strictly increasing timestamps
    predict::ObstacleGeometry geometry;       // true footprint
    double inflation = 0.0;                   // controller-side footprint margin
    double velocity_noise_variance = 1e-4;    // per-axis observation noise

    void validate() const;
};

/// True state (x, y, theta) at time t; out-of-span times hold the end states.
Vec obstacle_state_at(const ObstacleScript& script, double t);

/// (state, velocity) with velocity as a backward finite difference of the
/// script over dt (forward at the script start).
std::pair<Vec, Vec> obstacle_truth(const ObstacleScript& script, double t,
                                   double dt);

/// True iff the position lies in the open interior of any polytope.
bool collision_check(const Vec& y_robot,
                     const std::vector<predict::ObstaclePolytope>& polys);

/// Signed Euclidean clearance to a rectangle footprint: positive outside,
/// negative of the interior depth inside (matches -distance_to_safe_region).
double rectangle_clearance(const Vec& p, const Vec& obstacle_state,
                           const predict::ObstacleGeometry& geom);

struct StageRecord {
    int stage = 0;
    double t = 0.0;
    VehicleState state;
    double v_cmd = 0.0, steer_cmd = 0.0;
    double clearance = 0.0;
    double risk_lhs_max = 0.0;
    nlp::SolveStatus status = nlp::SolveStatus::OptimalLocal;
    bool fallback = false;
    double solve_ms = 0.0;
    std::vector<Vec> obstacle_states;
};

struct SimSummary {
    int stages = 0;
    double accumulated_cost = 0.0;
    bool lap_completed = false;
    double lap_time_s = 0.0;
    bool collision = false;
    int collision_stage = -1;
    int infeasible_stages = 0;
    int clamped_inputs = 0;
    double avg_solve_ms = 0.0;
    double max_solve_ms = 0.0;
    double min_clearance = std::numeric_limits<double>::infinity();
    double max_risk_lhs = 0.0;  // over solved stages
    std::string end_reason;     // lap | collision | timeout | abort
};

struct SimTrace {
    std::vector<StageRecord> records;
    SimSummary summary;
};

struct RunSetup {
    OvalTrack track;
    VehicleParams vehicle;
    std::optional<VehicleState> start;  // defaults to the track origin pose
    std::vector<ObstacleScript> obstacles;
    mpc::MPCConfig mpc;
    double v_nominal = 1.0;       // reference advance speed
    double lookahead_cap = 2.0;   // max lead of the reference over the robot
    double max_time = 60.0;       // simulated seconds
    bool strict = false;          // abort on the first non-optimal solve
    std::uint64_t seed = 1;
};

/// Closed loop: observe, solve, step, record. Deterministic per seed.
SimTrace run_closed_loop(const RunSetup& setup);

/// Time-indexed reference progression: an arc-length marker advances at the
/// nominal speed and is clamped to at most `lookahead_cap` ahead of the
/// robot's nearest centerline point, so detours cannot leave the reference
/// unreachably far ahead.
class ReferenceScheduler {
public:
    ReferenceScheduler(const OvalTrack& track, const Vec& start_position,
                       double v_nominal, double lookahead_cap);

    /// K+1 reference points from the current marker; advances the marker by
    /// one control period.
    std::vector<Vec> window(const Vec& position, int K, double T_s);

    double marker_s() const { return marker_s_; }

private:
    const OvalTrack* track_;
    double marker_s_;
    double v_nom_;
    double cap_;
};

/// Fixed-schema CSV: stage,t,x,y,theta,beta,v_cmd,steer_cmd,clearance,
/// risk_lhs_max,status,solve_ms followed by per-obstacle state columns.
/// `include_timing` off writes zeros into solve_ms for byte-reproducible runs.
void write_trace_csv(const SimTrace& trace, std::ostream& os,
                     bool include_timing = true);

void write_summary(const SimSummary& summary, std::ostream& os);

} // namespace drmpc::sim
