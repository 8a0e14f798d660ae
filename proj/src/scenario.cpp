#include "drmpc/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace drmpc::cli {

using json = nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& why) {
    throw std::invalid_argument("scenario: field '" + field + "' " + why);
}

const json& need(const json& obj, const std::string& ctx, const char* key) {
    if (!obj.contains(key)) fail(ctx + key, "is missing");
    return obj.at(key);
}

double need_num(const json& obj, const std::string& ctx, const char* key) {
    const auto& v = need(obj, ctx, key);
    if (!v.is_number()) fail(ctx + key, "must be a number");
    return v.get<double>();
}

double opt_num(const json& obj, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    return obj.at(key).get<double>();
}

void warn_unknown(const json& obj, const std::string& ctx,
                  const std::set<std::string>& known) {
    if (!obj.is_object()) return;
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!known.count(it.key()))
            std::fprintf(stderr, "scenario: ignoring unknown key '%s%s'\n",
                         ctx.c_str(), it.key().c_str());
}

Vec vec_of(const json& arr, const std::string& field) {
    if (!arr.is_array() || arr.empty()) fail(field, "must be a nonempty array");
    Vec v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number()) fail(field, "must contain numbers");
        v(i) = arr[i].get<double>();
    }
    return v;
}

json vec_to_json(const Vec& v) {
    json arr = json::array();
    for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

} // namespace

void Scenario::validate() const {
    if (straight_length < 0.0 || radius <= 0.0)
        fail("track", "needs straight_length >= 0 and radius > 0");
    if (vehicle.l_f <= 0.0 || vehicle.l_r <= 0.0)
        fail("vehicle", "needs positive axle distances");
    if (vehicle.v_min > vehicle.v_max || vehicle.steer_max <= 0.0)
        fail("vehicle", "has inconsistent bounds");
    if (gp_length_scales.size() != 3)
        fail("gp.length_scales", "must have 3 entries (x, y, heading)");
    if ((gp_length_scales.array() <= 0.0).any())
        fail("gp.length_scales", "must be positive");
    if (gp_signal_variance <= 0.0) fail("gp.signal_variance", "must be positive");
    if (gp_noise_variance < 0.0) fail("gp.noise_variance", "must be >= 0");
    if (gp_window < 1) fail("gp.window", "must be >= 1");
    if (gp_empty_window_policy != "prior" && gp_empty_window_policy != "error")
        fail("gp.empty_window_policy", "must be 'prior' or 'error'");
    if (horizon < 1) fail("mpc.horizon", "must be >= 1");
    if (ts <= 0.0 || to <= 0.0) fail("mpc.ts/to", "must be positive");
    if (q_diag.size() != 2 || r_diag.size() != 2 || p_diag.size() != 2)
        fail("mpc.q/r/p", "must be 2-entry diagonals");
    if ((q_diag.array() < 0.0).any() || (p_diag.array() < 0.0).any())
        fail("mpc.q/p", "must be nonnegative");
    if ((r_diag.array() <= 0.0).any()) fail("mpc.r", "must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) fail("mpc.alpha", "must be in (0,1)");
    if (delta < 0.0) fail("mpc.delta", "must be >= 0");
    if (theta < 0.0) fail("mpc.theta", "must be >= 0");
    if (samples < 1) fail("mpc.samples", "must be >= 1");
    if (controller != "drmpc" && controller != "saa")
        fail("mpc.controller", "must be 'drmpc' or 'saa'");
    if (fallback != "brake" && fallback != "strict")
        fail("mpc.fallback", "must be 'brake' or 'strict'");
    if (v_nominal <= 0.0) fail("mpc.v_nominal", "must be positive");
    if (lookahead_cap <= 0.0) fail("mpc.lookahead_cap", "must be positive");
    if (solver_max_iter < 1) fail("mpc.solver.max_iter", "must be >= 1");
    if (max_time <= 0.0) fail("sim.max_time", "must be positive");
    for (const auto& script : obstacles) script.validate();
}

mpc::MPCConfig Scenario::to_mpc_config() const {
    mpc::MPCConfig cfg;
    cfg.K = horizon;
    cfg.T_s = ts;
    cfg.T_o = to;
    cfg.Q = Mat(q_diag.asDiagonal());
    cfg.R = Mat(r_diag.asDiagonal());
    cfg.P = Mat(p_diag.asDiagonal());
    cfg.risk.alpha = alpha;
    cfg.risk.delta = delta;
    cfg.risk.theta = theta;
    cfg.risk.N = samples;
    cfg.M = gp_window;
    cfg.N = samples;
    cfg.kind = controller == "saa" ? mpc::ControllerKind::Saa
                                   : mpc::ControllerKind::DrMpc;
    cfg.fallback = fallback == "strict" ? mpc::FallbackMode::Strict
                                        : mpc::FallbackMode::Brake;
    cfg.limits.l_f = vehicle.l_f;
    cfg.limits.l_r = vehicle.l_r;
    cfg.limits.v_min = vehicle.v_min;
    cfg.limits.v_max = vehicle.v_max;
    cfg.limits.steer_max = vehicle.steer_max;
    gp::GPHyperparams hyper;
    hyper.length_scales = gp_length_scales;
    hyper.signal_variance = gp_signal_variance;
    hyper.noise_variance = gp_noise_variance;
    hyper.prior_mean = gp_prior_mean;
    cfg.gp_hyper.assign(3, hyper);
    cfg.gp_options.zero_fill_window = gp_zero_fill_window;
    cfg.gp_options.empty_window = gp_empty_window_policy == "error"
                                      ? gp::EmptyWindowPolicy::Error
                                      : gp::EmptyWindowPolicy::PriorFallback;
    cfg.solver.tol = solver_tol;
    cfg.solver.feas_tol = solver_feas_tol;
    cfg.solver.max_iter = solver_max_iter;
    cfg.nominal_speed = v_nominal;
    cfg.master_seed = seed;
    return cfg;
}

sim::RunSetup Scenario::to_run_setup() const {
    validate();
    sim::RunSetup setup;
    setup.track = sim::OvalTrack(track_center_x, track_center_y, straight_length,
                                 radius);
    setup.vehicle = vehicle;
    setup.start = robot_start;
    setup.obstacles = obstacles;
    setup.mpc = to_mpc_config();
    setup.v_nominal = v_nominal;
    setup.lookahead_cap = lookahead_cap;
    setup.max_time = max_time;
    setup.strict = fallback == "strict";
    setup.seed = seed;
    return setup;
}

Scenario parse_scenario(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("scenario: parse error: ") +
                                    e.what());
    }
    if (!root.is_object()) throw std::invalid_argument("scenario: not an object");
    warn_unknown(root, "",
                 {"name", "seed", "track", "vehicle", "robot_start", "gp", "mpc",
                  "obstacles", "sim"});

    Scenario s;
    s.name = root.value("name", "scenario");
    if (root.contains("seed")) s.seed = root.at("seed").get<std::uint64_t>();

    const auto& track = need(root, "", "track");
    warn_unknown(track, "track.", {"center", "straight_length", "radius"});
    const Vec center = vec_of(need(track, "track.", "center"), "track.center");
    if (center.size() != 2) fail("track.center", "must have 2 entries");
    s.track_center_x = center(0);
    s.track_center_y = center(1);
    s.straight_length = need_num(track, "track.", "straight_length");
    s.radius = need_num(track, "track.", "radius");

    if (root.contains("vehicle")) {
        const auto& veh = root.at("vehicle");
        warn_unknown(veh, "vehicle.",
                     {"l_f", "l_r", "v_min", "v_max", "steer_max"});
        s.vehicle.l_f = opt_num(veh, "l_f", s.vehicle.l_f);
        s.vehicle.l_r = opt_num(veh, "l_r", s.vehicle.l_r);
        s.vehicle.v_min = opt_num(veh, "v_min", s.vehicle.v_min);
        s.vehicle.v_max = opt_num(veh, "v_max", s.vehicle.v_max);
        s.vehicle.steer_max = opt_num(veh, "steer_max", s.vehicle.steer_max);
    }

    if (root.contains("robot_start")) {
        const auto& rs = root.at("robot_start");
        warn_unknown(rs, "robot_start.", {"x", "y", "theta", "beta"});
        sim::VehicleState st;
        st.x = need_num(rs, "robot_start.", "x");
        st.y = need_num(rs, "robot_start.", "y");
        st.theta = opt_num(rs, "theta", 0.0);
        st.beta = opt_num(rs, "beta", 0.0);
        s.robot_start = st;
    }

    const auto& gp = need(root, "", "gp");
    warn_unknown(gp, "gp.",
                 {"length_scales", "signal_variance", "noise_variance",
                  "prior_mean", "window", "zero_fill_window",
                  "empty_window_policy"});
    s.gp_length_scales =
        vec_of(need(gp, "gp.", "length_scales"), "gp.length_scales");
    s.gp_signal_variance = need_num(gp, "gp.", "signal_variance");
    s.gp_noise_variance = need_num(gp, "gp.", "noise_variance");
    s.gp_prior_mean = opt_num(gp, "prior_mean", 0.0);
    s.gp_window = static_cast<int>(need_num(gp, "gp.", "window"));
    s.gp_zero_fill_window = gp.value("zero_fill_window", false);
    s.gp_empty_window_policy = gp.value("empty_window_policy", "prior");

    const auto& mpc = need(root, "", "mpc");
    warn_unknown(mpc, "mpc.",
                 {"horizon", "ts", "to", "q", "r", "p", "alpha", "delta", "theta",
                  "samples", "controller", "fallback", "v_nominal",
                  "lookahead_cap", "solver"});
    s.horizon = static_cast<int>(need_num(mpc, "mpc.", "horizon"));
    s.ts = need_num(mpc, "mpc.", "ts");
    s.to = need_num(mpc, "mpc.", "to");
    s.q_diag = vec_of(need(mpc, "mpc.", "q"), "mpc.q");
    s.r_diag = vec_of(need(mpc, "mpc.", "r"), "mpc.r");
    s.p_diag = vec_of(need(mpc, "mpc.", "p"), "mpc.p");
    s.alpha = need_num(mpc, "mpc.", "alpha");
    s.delta = need_num(mpc, "mpc.", "delta");
    s.theta = need_num(mpc, "mpc.", "theta");
    s.samples = static_cast<int>(need_num(mpc, "mpc.", "samples"));
    s.controller = mpc.value("controller", "drmpc");
    s.fallback = mpc.value("fallback", "brake");
    s.v_nominal = need_num(mpc, "mpc.", "v_nominal");
    s.lookahead_cap = opt_num(mpc, "lookahead_cap", s.lookahead_cap);
    if (mpc.contains("solver")) {
        const auto& sol = mpc.at("solver");
        warn_unknown(sol, "mpc.solver.", {"tol", "feas_tol", "max_iter"});
        s.solver_tol = opt_num(sol, "tol", s.solver_tol);
        s.solver_feas_tol = opt_num(sol, "feas_tol", s.solver_feas_tol);
        s.solver_max_iter =
            static_cast<int>(opt_num(sol, "max_iter", s.solver_max_iter));
    }

    if (root.contains("obstacles")) {
        const auto& arr = root.at("obstacles");
        if (!arr.is_array()) fail("obstacles", "must be an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string ctx = "obstacles[" + std::to_string(i) + "].";
            const auto& ob = arr[i];
            warn_unknown(ob, ctx,
                         {"half_length", "half_width", "anchor", "inflation",
                          "velocity_noise_variance", "waypoints"});
            sim::ObstacleScript script;
            script.geometry.half_length = need_num(ob, ctx, "half_length");
            script.geometry.half_width = need_num(ob, ctx, "half_width");
            const std::string anchor = ob.value("anchor", "center");
            if (anchor == "center")
                script.geometry.anchor = predict::Anchor::Center;
            else if (anchor == "rear_axle")
                script.geometry.anchor = predict::Anchor::RearAxle;
            else if (anchor == "front_axle")
                script.geometry.anchor = predict::Anchor::FrontAxle;
            else
                fail(ctx + "anchor", "must be center|rear_axle|front_axle");
            script.inflation = opt_num(ob, "inflation", 0.0);
            script.velocity_noise_variance =
                opt_num(ob, "velocity_noise_variance", 1e-4);
            const auto& wps = need(ob, ctx, "waypoints");
            if (!wps.is_array() || wps.empty())
                fail(ctx + "waypoints", "must be a nonempty array");
            for (const auto& wp : wps) {
                sim::Waypoint w;
                w.t = need_num(wp, ctx + "waypoints.", "t");
                w.x = need_num(wp, ctx + "waypoints.", "x");
                w.y = need_num(wp, ctx + "waypoints.", "y");
                if (wp.contains("theta")) w.theta = wp.at("theta").get<double>();
                script.waypoints.push_back(w);
            }
            s.obstacles.push_back(std::move(script));
        }
    }

    if (root.contains("sim")) {
        const auto& si = root.at("sim");
        warn_unknown(si, "sim.", {"max_time"});
        s.max_time = opt_num(si, "max_time", s.max_time);
    }

    s.validate();
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("scenario: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

std::string scenario_to_json(const Scenario& s) {
    json root;
    root["name"] = s.name;
    root["seed"] = s.seed;
    root["track"] = {{"center", json::array({s.track_center_x, s.track_center_y})},
                     {"straight_length", s.straight_length},
                     {"radius", s.radius}};
    root["vehicle"] = {{"l_f", s.vehicle.l_f},
                       {"l_r", s.vehicle.l_r},
                       {"v_min", s.vehicle.v_min},
                       {"v_max", s.vehicle.v_max},
                       {"steer_max", s.vehicle.steer_max}};
    if (s.robot_start) {
        root["robot_start"] = {{"x", s.robot_start->x},
                               {"y", s.robot_start->y},
                               {"theta", s.robot_start->theta},
                               {"beta", s.robot_start->beta}};
    }
    root["gp"] = {{"length_scales", vec_to_json(s.gp_length_scales)},
                  {"signal_variance", s.gp_signal_variance},
                  {"noise_variance", s.gp_noise_variance},
                  {"prior_mean", s.gp_prior_mean},
                  {"window", s.gp_window},
                  {"zero_fill_window", s.gp_zero_fill_window},
                  {"empty_window_policy", s.gp_empty_window_policy}};
    root["mpc"] = {{"horizon", s.horizon},
                   {"ts", s.ts},
                   {"to", s.to},
                   {"q", vec_to_json(s.q_diag)},
                   {"r", vec_to_json(s.r_diag)},
                   {"p", vec_to_json(s.p_diag)},
                   {"alpha", s.alpha},
                   {"delta", s.delta},
                   {"theta", s.theta},
                   {"samples", s.samples},
                   {"controller", s.controller},
                   {"fallback", s.fallback},
                   {"v_nominal", s.v_nominal},
                   {"lookahead_cap", s.lookahead_cap},
                   {"solver",
                    {{"tol", s.solver_tol},
                     {"feas_tol", s.solver_feas_tol},
                     {"max_iter", s.solver_max_iter}}}};
    json obstacles = json::array();
    for (const auto& script : s.obstacles) {
        json ob;
        ob["half_length"] = script.geometry.half_length;
        ob["half_width"] = script.geometry.half_width;
        switch (script.geometry.anchor) {
            case predict::Anchor::Center: ob["anchor"] = "center"; break;
            case predict::Anchor::RearAxle: ob["anchor"] = "rear_axle"; break;
            case predict::Anchor::FrontAxle: ob["anchor"] = "front_axle"; break;
        }
        ob["inflation"] = script.inflation;
        ob["velocity_noise_variance"] = script.velocity_noise_variance;
        json wps = json::array();
        for (const auto& w : script.waypoints) {
            json wp = {{"t", w.t}, {"x", w.x}, {"y", w.y}};
            if (w.theta) wp["theta"] = *w.theta;
            wps.push_back(wp);
        }
        ob["waypoints"] = wps;
        obstacles.push_back(ob);
    }
    root["obstacles"] = obstacles;
    root["sim"] = {{"max_time", s.max_time}};
    return root.dump(2) + "\n";
}

void write_scenario(const Scenario& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("scenario: cannot write '" + path + "'");
    out << scenario_to_json(s);
}

bool operator==(const Scenario& a, const Scenario& b) {
    return scenario_to_json(a) == scenario_to_json(b);
}

std::uint64_t scenario_hash(const Scenario& s) {
    const std::string text = scenario_to_json(s);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// ============================================================
// Bundled scenario
// ============================================================

Scenario paper_like_scenario() {
    Scenario s;
    s.name = "paper_like";
    s.seed = 1;

    // Stadium oval (1 m straights joining R = 9 semicircles) whose far apex
    // sits 15 m from the origin. Both obstacle encounters happen around that
    // apex, where the quadratic coupling of the robust risk blocks separates
    // the Wasserstein radii most.
    s.track_center_x = 5.5;
    s.track_center_y = 0.0;
    s.straight_length = 1.0;
    s.radius = 9.0;

    s.vehicle = sim::VehicleParams{};  // l_f = l_r = 2, v in [0,30], steer pi/6

    s.gp_length_scales = (Vec(3) << 1.0, 1.0, 0.5).finished();
    s.gp_signal_variance = 2.0;
    s.gp_noise_variance = 1e-4;
    s.gp_prior_mean = 0.0;
    s.gp_window = 20;

    s.horizon = 5;
    s.ts = 0.01;
    s.to = 0.01;
    s.q_diag = Vec::Ones(2);
    s.r_diag = Vec::Constant(2, 0.01);
    s.p_diag = Vec::Ones(2);
    s.alpha = 0.95;
    s.delta = 0.01;
    s.theta = 5e-5;
    s.samples = 50;
    s.controller = "drmpc";
    s.fallback = "brake";
    s.v_nominal = 3.0;
    s.lookahead_cap = 2.0;
    s.max_time = 45.0;

    const sim::OvalTrack track(s.track_center_x, s.track_center_y,
                               s.straight_length, s.radius);

    // Start in orbit equilibrium at the right-arc entry: velocity direction
    // along the tangent with the steady-turn velocity angle established.
    {
        sim::VehicleState start;
        const Vec p = track.point_at(s.straight_length);
        start.beta = std::asin(s.vehicle.l_r / s.radius);
        start.theta = track.heading_at(s.straight_length) - start.beta;
        start.x = p(0);
        start.y = p(1);
        s.robot_start = start;
    }

    // radial_out > 0 is the right of the tangent, away from the track center
    // on this counterclockwise lap
    const auto offset_point = [&track](double arc, double radial_out) {
        const Vec p = track.point_at(arc);
        const double tangent = track.heading_at(arc);
        Vec q(2);
        q << p(0) + radial_out * std::sin(tangent),
            p(1) - radial_out * std::cos(tangent);
        return q;
    };

    // Obstacle 0: slow vehicle on the centerline ahead of the robot. The
    // robot catches it just before the apex and trails it; at t_turn the
    // obstacle abruptly cuts toward the track inside and drives off the line.
    {
        sim::ObstacleScript mover;
        mover.geometry.half_length = 1.0;
        mover.geometry.half_width = 0.5;
        mover.inflation = 0.0;
        mover.velocity_noise_variance = 1e-4;
        const double s0 = 12.2;
        const double speed = 0.5;
        const double t_turn = 6.5;
        const double turn_time = 0.3;
        for (double t = 0.0; t < t_turn - 1e-9; t += 0.25) {
            const Vec p = track.point_at(s0 + speed * t);
            mover.waypoints.push_back({t, p(0), p(1), std::nullopt});
        }
        const double s_pivot = s0 + speed * t_turn;
        const Vec pivot = track.point_at(s_pivot);
        mover.waypoints.push_back({t_turn, pivot(0), pivot(1), std::nullopt});
        // 60-degree inward cut at 1.5 m/s, then a straight 1.2 m/s escape
        const double cut_heading = track.heading_at(s_pivot) + M_PI / 3.0;
        const Eigen::Vector2d dir(std::cos(cut_heading), std::sin(cut_heading));
        Eigen::Vector2d pos(pivot(0), pivot(1));
        pos += 1.5 * turn_time * dir;
        mover.waypoints.push_back(
            {t_turn + turn_time, pos(0), pos(1), std::nullopt});
        const double t_escape = t_turn + turn_time + 2.5;
        pos += 1.2 * 2.5 * dir;
        mover.waypoints.push_back({t_escape, pos(0), pos(1), std::nullopt});
        mover.waypoints.push_back({60.0, pos(0), pos(1), std::nullopt});
        s.obstacles.push_back(std::move(mover));
    }

    // Obstacle 1: slow vehicle on an outward-offset line past the apex,
    // clipping the corridor so every controller has to squeeze inside.
    {
        sim::ObstacleScript squeezer;
        squeezer.geometry.half_length = 1.0;
        squeezer.geometry.half_width = 0.5;
        squeezer.inflation = 0.0;
        squeezer.velocity_noise_variance = 1e-4;
        const double s0 = 16.5;
        const double speed = 0.3;
        const double offset = 0.75;  // outward
        for (double t = 0.0; t <= 40.0 + 1e-9; t += 0.25) {
            const Vec p = offset_point(s0 + speed * t, offset);
            squeezer.waypoints.push_back({t, p(0), p(1), std::nullopt});
        }
        s.obstacles.push_back(std::move(squeezer));
    }

    return s;
}

} // namespace drmpc::cli
