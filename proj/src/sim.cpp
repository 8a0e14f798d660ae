#include "drmpc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "drmpc/risk.hpp"
#include "drmpc/rng.hpp"

namespace drmpc::sim {

double wrap_angle(double a) {
    a = std::fmod(a + M_PI, 2.0 * M_PI);
    if (a <= 0.0) a += 2.0 * M_PI;
    return a - M_PI;
}

Vec VehicleState::as_vec() const {
    Vec v(4);
    v << x, y, theta, beta;
    return v;
}

VehicleState vehicle_step(const VehicleState& s, double v, double steer,
                          const VehicleParams& p, double T_s, bool* clamped) {
    const double vc = std::clamp(v, p.v_min, p.v_max);
    const double dc = std::clamp(steer, -p.steer_max, p.steer_max);
    if (clamped) *clamped = (vc != v) || (dc != steer);
    const Vec next = mpc::bicycle_step(s.as_vec(), vc, dc, p.l_f, p.l_r, T_s);
    VehicleState out;
    out.x = next(0);
    out.y = next(1);
    out.theta = wrap_angle(next(2));
    out.beta = wrap_angle(next(3));
    return out;
}

// ============================================================
// Track
// ============================================================

OvalTrack::OvalTrack(double center_x, double center_y, double straight_length,
                     double radius)
    : cx_(center_x), cy_(center_y), straight_(straight_length), radius_(radius) {
    if (straight_ < 0.0 || radius_ <= 0.0)
        throw std::invalid_argument("OvalTrack: bad geometry");
}

Vec OvalTrack::point_at(double s) const {
    const double L = length();
    s = std::fmod(s, L);
    if (s < 0.0) s += L;
    const double half = straight_ / 2.0;
    const double arc = M_PI * radius_;
    Vec p(2);
    if (s < straight_) {  // bottom straight, heading +x
        p << cx_ - half + s, cy_ - radius_;
    } else if (s < straight_ + arc) {  // right arc, ccw from -pi/2
        const double phi = -M_PI / 2.0 + (s - straight_) / radius_;
        p << cx_ + half + radius_ * std::cos(phi), cy_ + radius_ * std::sin(phi);
    } else if (s < 2.0 * straight_ + arc) {  // top straight, heading -x
        const double d = s - straight_ - arc;
        p << cx_ + half - d, cy_ + radius_;
    } else {  // left arc, ccw from pi/2
        const double phi = M_PI / 2.0 + (s - 2.0 * straight_ - arc) / radius_;
        p << cx_ - half + radius_ * std::cos(phi), cy_ + radius_ * std::sin(phi);
    }
    return p;
}

double OvalTrack::heading_at(double s) const {
    const double L = length();
    s = std::fmod(s, L);
    if (s < 0.0) s += L;
    const double arc = M_PI * radius_;
    if (s < straight_) return 0.0;
    if (s < straight_ + arc) return (s - straight_) / radius_;
    if (s < 2.0 * straight_ + arc) return M_PI;
    return wrap_angle(M_PI + (s - 2.0 * straight_ - arc) / radius_);
}

double OvalTrack::nearest_s(const Vec& p) const {
    const double half = straight_ / 2.0;
    const double arc = M_PI * radius_;
    double best_d = std::numeric_limits<double>::infinity();
    double best_s = 0.0;
    auto consider = [&](double s, const Vec& q) {
        const double d = (p - q).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best_s = s;
        }
    };
    // bottom straight
    {
        const double u = std::clamp(p(0) - (cx_ - half), 0.0, straight_);
        Vec q(2);
        q << cx_ - half + u, cy_ - radius_;
        consider(u, q);
    }
    // top straight
    {
        const double u = std::clamp((cx_ + half) - p(0), 0.0, straight_);
        Vec q(2);
        q << cx_ + half - u, cy_ + radius_;
        consider(straight_ + arc + u, q);
    }
    // right arc: angles in [-pi/2, pi/2]
    {
        const double dx = p(0) - (cx_ + half), dy = p(1) - cy_;
        double phi = std::atan2(dy, dx);
        phi = std::clamp(phi, -M_PI / 2.0, M_PI / 2.0);
        Vec q(2);
        q << cx_ + half + radius_ * std::cos(phi), cy_ + radius_ * std::sin(phi);
        consider(straight_ + (phi + M_PI / 2.0) * radius_, q);
    }
    // left arc: angles in [pi/2, 3pi/2]
    {
        const double dx = p(0) - (cx_ - half), dy = p(1) - cy_;
        double phi = std::atan2(dy, dx);
        if (phi < 0.0) phi += 2.0 * M_PI;  // into [0, 2pi)
        phi = std::clamp(phi, M_PI / 2.0, 3.0 * M_PI / 2.0);
        Vec q(2);
        q << cx_ - half + radius_ * std::cos(phi), cy_ + radius_ * std::sin(phi);
        consider(2.0 * straight_ + arc + (phi - M_PI / 2.0) * radius_, q);
    }
    return best_s;
}

ReferenceScheduler::ReferenceScheduler(const OvalTrack& track,
                                       const Vec& start_position,
                                       double v_nominal, double lookahead_cap)
    : track_(&track),
      // start the marker at the cruise-equilibrium lead so the loop does not
      // open with a stop-and-chase transient
      marker_s_(track.nearest_s(start_position) +
                std::min(lookahead_cap, v_nominal / 3.0)),
      v_nom_(v_nominal),
      cap_(lookahead_cap) {}

std::vector<Vec> ReferenceScheduler::window(const Vec& position, int K,
                                            double T_s) {
    const double L = track_->length();
    // unwrap the nearest point onto the marker's lap
    const double s_near_wrapped = track_->nearest_s(position);
    double delta = std::fmod(s_near_wrapped - marker_s_, L);
    if (delta > L / 2.0) delta -= L;
    if (delta < -L / 2.0) delta += L;
    const double s_near = marker_s_ + delta;
    // the marker advances on its own clock and is only held back, never
    // dragged forward by the robot's drift
    marker_s_ = std::min(marker_s_, s_near + cap_);

    std::vector<Vec> refs;
    refs.reserve(K + 1);
    for (int k = 0; k <= K; ++k)
        refs.push_back(track_->point_at(marker_s_ + k * T_s * v_nom_));
    marker_s_ += v_nom_ * T_s;
    return refs;
}

// ============================================================
// Scripted obstacles
// ============================================================

void ObstacleScript::validate() const {
    if (waypoints.size() < 1)
        throw std::invalid_argument("ObstacleScript: needs waypoints");
    for (std::size_t i = 1; i < waypoints.size(); ++i)
        if (waypoints[i].t <= waypoints[i - 1].t)
            throw std::invalid_argument(
                "ObstacleScript: timestamps must be strictly increasing");
    if (geometry.half_length <= 0.0 || geometry.half_width <= 0.0)
        throw std::invalid_argument("ObstacleScript: bad geometry");
}

namespace {

double segment_heading(const ObstacleScript& script, std::size_t i) {
    // heading of the segment starting at waypoint i; falls back to the
    // previous moving segment for stationary stretches
    const auto& w = script.waypoints;
    for (std::size_t j = i + 1; j-- > 0;) {
        const std::size_t a = std::min(j, w.size() - 2);
        if (w.size() < 2) break;
        const double dx = w[a + 1].x - w[a].x;
        const double dy = w[a + 1].y - w[a].y;
        if (std::abs(dx) > 1e-12 || std::abs(dy) > 1e-12)
            return std::atan2(dy, dx);
        if (j == 0) break;
    }
    return w[i].theta.value_or(0.0);
}

} // namespace

Vec obstacle_state_at(const ObstacleScript& script, double t) {
    const auto& w = script.waypoints;
    Vec state(3);
    if (t <= w.front().t) {
        state << w.front().x, w.front().y,
            w.front().theta ? *w.front().theta : segment_heading(script, 0);
        return state;
    }
    if (t >= w.back().t) {
        state << w.back().x, w.back().y,
            w.back().theta ? *w.back().theta
                           : segment_heading(script, w.size() - 1);
        return state;
    }
    std::size_t hi = 1;
    while (w[hi].t < t) ++hi;
    const auto& a = w[hi - 1];
    const auto& b = w[hi];
    const double r = (t - a.t) / (b.t - a.t);
    const double x = a.x + r * (b.x - a.x);
    const double y = a.y + r * (b.y - a.y);
    double theta;
    if (a.theta && b.theta) {
        theta = *a.theta + r * wrap_angle(*b.theta - *a.theta);
    } else {
        const double dx = b.x - a.x, dy = b.y - a.y;
        theta = (std::abs(dx) > 1e-12 || std::abs(dy) > 1e-12)
                    ? std::atan2(dy, dx)
                    : segment_heading(script, hi - 1);
    }
    state << x, y, wrap_angle(theta);
    return state;
}

std::pair<Vec, Vec> obstacle_truth(const ObstacleScript& script, double t,
                                   double dt) {
    const Vec now = obstacle_state_at(script, t);
    const bool forward = t - dt < script.waypoints.front().t;
    const Vec other = obstacle_state_at(script, forward ? t + dt : t - dt);
    Vec vel(3);
    vel(0) = (forward ? other(0) - now(0) : now(0) - other(0)) / dt;
    vel(1) = (forward ? other(1) - now(1) : now(1) - other(1)) / dt;
    vel(2) = wrap_angle(forward ? other(2) - now(2) : now(2) - other(2)) / dt;
    return {now, vel};
}

bool collision_check(const Vec& y_robot,
                     const std::vector<predict::ObstaclePolytope>& polys) {
    for (const auto& poly : polys)
        if (risk::distance_to_safe_region(y_robot, poly) > 0.0) return true;
    return false;
}

double rectangle_clearance(const Vec& p, const Vec& obstacle_state,
                           const predict::ObstacleGeometry& geom) {
    return predict::rectangle_clearance(p, obstacle_state, geom);
}

// ============================================================
// Closed loop
// ============================================================

SimTrace run_closed_loop(const RunSetup& setup) {
    for (const auto& script : setup.obstacles) script.validate();
    const int L = static_cast<int>(setup.obstacles.size());

    mpc::MPCConfig cfg = setup.mpc;
    cfg.master_seed = setup.seed;
    cfg.validate();

    std::vector<predict::ObstacleGeometry> controller_geom;
    for (const auto& script : setup.obstacles) {
        auto geom = script.geometry;
        geom.half_length += script.inflation;
        geom.half_width += script.inflation;
        controller_geom.push_back(geom);
    }
    mpc::Controller controller(cfg, controller_geom);

    VehicleState state;
    if (setup.start) {
        state = *setup.start;
    } else {
        const Vec p = setup.track.point_at(0.0);
        state.x = p(0);
        state.y = p(1);
        state.theta = setup.track.heading_at(0.0);
        state.beta = 0.0;
    }

    SimTrace trace;
    auto& summary = trace.summary;
    summary.end_reason = "timeout";

    double progress = 0.0;
    double s_prev = setup.track.nearest_s(state.as_vec().head(2));
    const double track_len = setup.track.length();
    ReferenceScheduler refs_sched(setup.track, state.as_vec().head(2),
                                  setup.v_nominal, setup.lookahead_cap);
    const int max_stages =
        static_cast<int>(std::ceil(setup.max_time / cfg.T_s)) + 1;
    double solve_ms_total = 0.0;
    bool warned_clamp = false;

    for (int stage = 0; stage < max_stages; ++stage) {
        const double t = stage * cfg.T_s;

        std::vector<mpc::Observation> observations(L);
        std::vector<Vec> true_states(L);
        for (int o = 0; o < L; ++o) {
            auto [obs_state, obs_vel] =
                obstacle_truth(setup.obstacles[o], t, cfg.T_o);
            true_states[o] = obs_state;
            GaussianStream noise(derive_seed(setup.seed, stage, 900 + o));
            const double sd =
                std::sqrt(setup.obstacles[o].velocity_noise_variance);
            Vec measured = obs_vel;
            for (int d = 0; d < measured.size(); ++d)
                measured(d) += sd * noise.gaussian();
            observations[o] = {obs_state, measured};
        }

        const Vec pos = state.as_vec().head(2);
        const auto refs = refs_sched.window(pos, cfg.K, cfg.T_s);
        auto [u, diag] = controller.step(state.as_vec(), observations, refs);

        double clearance = std::numeric_limits<double>::infinity();
        std::vector<predict::ObstaclePolytope> polys;
        for (int o = 0; o < L; ++o) {
            clearance = std::min(
                clearance,
                predict::rectangle_clearance(pos, true_states[o],
                                             setup.obstacles[o].geometry));
            polys.push_back(predict::polytope_from_state(
                setup.obstacles[o].geometry, true_states[o]));
        }

        StageRecord rec;
        rec.stage = stage;
        rec.t = t;
        rec.state = state;
        rec.v_cmd = u(0);
        rec.steer_cmd = u(1);
        rec.clearance = L > 0 ? clearance : 0.0;
        rec.risk_lhs_max = diag.risk_lhs_max;
        rec.status = diag.status;
        rec.fallback = diag.fallback_applied;
        rec.solve_ms = diag.solve_seconds * 1e3;
        rec.obstacle_states = true_states;
        trace.records.push_back(rec);

        ++summary.stages;
        solve_ms_total += rec.solve_ms;
        summary.max_solve_ms = std::max(summary.max_solve_ms, rec.solve_ms);
        if (L > 0) summary.min_clearance = std::min(summary.min_clearance, clearance);
        if (diag.status == nlp::SolveStatus::OptimalLocal)
            summary.max_risk_lhs = std::max(summary.max_risk_lhs, diag.risk_lhs_max);
        else
            ++summary.infeasible_stages;

        if (L > 0 && collision_check(pos, polys)) {
            summary.collision = true;
            summary.collision_stage = stage;
            summary.end_reason = "collision";
            break;
        }
        if (diag.fallback_applied && setup.strict) {
            summary.end_reason = "abort";
            break;
        }

        // stage cost against the current reference point
        const Vec err = pos - refs[0];
        summary.accumulated_cost += err.dot(cfg.Q * err) + u.dot(cfg.R * u);

        bool clamped = false;
        state = vehicle_step(state, u(0), u(1), setup.vehicle, cfg.T_s, &clamped);
        if (clamped) {
            ++summary.clamped_inputs;
            if (!warned_clamp) {
                std::fprintf(stderr,
                             "sim: control input clamped to bounds at stage %d\n",
                             stage);
                warned_clamp = true;
            }
        }

        const double s_now = setup.track.nearest_s(state.as_vec().head(2));
        double ds = s_now - s_prev;
        if (ds > track_len / 2.0) ds -= track_len;
        if (ds < -track_len / 2.0) ds += track_len;
        progress += ds;
        s_prev = s_now;
        if (progress >= track_len) {
            summary.lap_completed = true;
            summary.lap_time_s = (stage + 1) * cfg.T_s;
            summary.end_reason = "lap";
            break;
        }
    }

    if (summary.stages > 0) summary.avg_solve_ms = solve_ms_total / summary.stages;
    if (!std::isfinite(summary.min_clearance)) summary.min_clearance = 0.0;
    return trace;
}

// ============================================================
// Serialization
// ============================================================

namespace {
void put_double(std::ostream& os, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
}
} // namespace

void write_trace_csv(const SimTrace& trace, std::ostream& os,
                     bool include_timing) {
    const std::size_t n_obs =
        trace.records.empty() ? 0 : trace.records.front().obstacle_states.size();
    os << "stage,t,x,y,theta,beta,v_cmd,steer_cmd,clearance,risk_lhs_max,"
          "status,solve_ms";
    for (std::size_t o = 0; o < n_obs; ++o)
        os << ",ox" << o << ",oy" << o << ",otheta" << o;
    os << "\n";
    for (const auto& r : trace.records) {
        os << r.stage << ",";
        put_double(os, r.t);
        for (double v : {r.state.x, r.state.y, r.state.theta, r.state.beta,
                         r.v_cmd, r.steer_cmd, r.clearance, r.risk_lhs_max}) {
            os << ",";
            put_double(os, v);
        }
        os << "," << nlp::to_string(r.status) << ",";
        put_double(os, include_timing ? r.solve_ms : 0.0);
        for (const auto& obs : r.obstacle_states)
            for (int d = 0; d < 3; ++d) {
                os << ",";
                put_double(os, obs(d));
            }
        os << "\n";
    }
}

void write_summary(const SimSummary& s, std::ostream& os) {
    os << "stages: " << s.stages << "\n";
    os << "accumulated_cost: ";
    put_double(os, s.accumulated_cost);
    os << "\nlap_completed: " << (s.lap_completed ? "true" : "false") << "\n";
    os << "lap_time_s: ";
    put_double(os, s.lap_time_s);
    os << "\ncollision: " << (s.collision ? "true" : "false") << "\n";
    os << "collision_stage: " << s.collision_stage << "\n";
    os << "infeasible_stages: " << s.infeasible_stages << "\n";
    os << "clamped_inputs: " << s.clamped_inputs << "\n";
    os << "avg_solve_ms: ";
    put_double(os, s.avg_solve_ms);
    os << "\nmax_solve_ms: ";
    put_double(os, s.max_solve_ms);
    os << "\nmin_clearance: ";
    put_double(os, s.min_clearance);
    os << "\nmax_risk_lhs: ";
    put_double(os, s.max_risk_lhs);
    os << "\nend_reason: " << s.end_reason << "\n";
}

} // namespace drmpc::sim
