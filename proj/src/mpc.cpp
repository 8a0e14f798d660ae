#include "drmpc/mpc.hpp"

#include <Eigen/Eigenvalues>
#include <chrono>
#include <cstdlib>
#include <cstdio>
#include <cmath>

#include "drmpc/rng.hpp"

namespace drmpc::mpc {

namespace {

void check_psd(const Mat& w, const std::string& name, bool strict) {
    if (w.rows() != w.cols())
        throw std::invalid_argument("MPCConfig: " + name + " must be square");
    Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (w + w.transpose()));
    const double lo = eig.eigenvalues().minCoeff();
    if (strict ? lo <= 0.0 : lo < -1e-12)
        throw std::invalid_argument("MPCConfig: " + name +
                                    (strict ? " must be positive definite"
                                            : " must be positive semidefinite"));
}

} // namespace

void MPCConfig::validate() const {
    if (K < 1) throw std::invalid_argument("MPCConfig: K must be >= 1");
    if (T_s <= 0.0 || T_o <= 0.0)
        throw std::invalid_argument("MPCConfig: sampling times must be positive");
    check_psd(Q, "Q", false);
    check_psd(P, "P", false);
    check_psd(R, "R", true);
    risk.validate();
    if (M < 1) throw std::invalid_argument("MPCConfig: M must be >= 1");
    if (N < 1) throw std::invalid_argument("MPCConfig: N must be >= 1");
    if (gp_hyper.empty())
        throw std::invalid_argument("MPCConfig: GP hyperparameters missing");
}

Vec bicycle_step(const Vec& state, double v, double steer, double l_f,
                 double l_r, double T_s) {
    const double heading = state(2) + state(3);
    const double kappa = l_r / (l_r + l_f);
    Vec next(4);
    next(0) = state(0) + T_s * v * std::cos(heading);
    next(1) = state(1) + T_s * v * std::sin(heading);
    next(2) = state(2) + T_s * v * std::sin(state(3)) / l_r;
    next(3) = state(3) + T_s * std::atan(kappa * std::tan(steer));
    return next;
}

nlp::Objective build_cost(const std::vector<Vec>& ref_path, const Mat& Q,
                          const Mat& R, const Mat& P, int u_offset, int y_offset,
                          int K) {
    if (static_cast<int>(ref_path.size()) != K + 1)
        throw std::invalid_argument("build_cost: ref_path must hold K+1 points");
    const int n_y = static_cast<int>(Q.rows());
    const int n_u = static_cast<int>(R.rows());
    std::vector<Vec> refs = ref_path;

    nlp::Objective obj;
    obj.value = [=](const Vec& x) {
        double j = 0.0;
        for (int k = 0; k < K; ++k) {
            const Vec e = x.segment(y_offset + k * n_y, n_y) - refs[k];
            const Vec u = x.segment(u_offset + k * n_u, n_u);
            j += e.dot(Q * e) + u.dot(R * u);
        }
        const Vec eK = x.segment(y_offset + K * n_y, n_y) - refs[K];
        return j + eK.dot(P * eK);
    };
    obj.gradient = [=](const Vec& x, Vec& g) {
        g = Vec::Zero(x.size());
        for (int k = 0; k < K; ++k) {
            const Vec e = x.segment(y_offset + k * n_y, n_y) - refs[k];
            g.segment(y_offset + k * n_y, n_y) = 2.0 * (Q * e);
            const Vec u = x.segment(u_offset + k * n_u, n_u);
            g.segment(u_offset + k * n_u, n_u) = 2.0 * (R * u);
        }
        const Vec eK = x.segment(y_offset + K * n_y, n_y) - refs[K];
        g.segment(y_offset + K * n_y, n_y) = 2.0 * (P * eK);
    };
    obj.hessian = [=](const Vec&, std::vector<nlp::Triplet>& h) {
        for (int k = 0; k < K; ++k) {
            for (int a = 0; a < n_y; ++a)
                for (int b = 0; b <= a; ++b)
                    h.emplace_back(y_offset + k * n_y + a, y_offset + k * n_y + b,
                                   2.0 * Q(a, b));
            for (int a = 0; a < n_u; ++a)
                for (int b = 0; b <= a; ++b)
                    h.emplace_back(u_offset + k * n_u + a, u_offset + k * n_u + b,
                                   2.0 * R(a, b));
        }
        for (int a = 0; a < n_y; ++a)
            for (int b = 0; b <= a; ++b)
                h.emplace_back(y_offset + K * n_y + a, y_offset + K * n_y + b,
                               2.0 * P(a, b));
    };
    return obj;
}

namespace {

// Equality rows xi_{k+1} - f(xi_k, u_k) = 0 for the bicycle dynamics,
// with analytic Jacobian and curvature.
nlp::ConstraintGroup dynamics_group(int K, int u_off, int xi_off,
                                    const VehicleLimits& lim, double T) {
    nlp::ConstraintGroup g;
    g.name = "dyn";
    g.kind = nlp::ConstraintKind::Equality;
    g.dim = 4 * K;
    g.depends = {"u", "xi"};
    const double l_r = lim.l_r;
    const double kappa = lim.l_r / (lim.l_r + lim.l_f);
    const double l_f = lim.l_f;

    g.eval = [=](const Vec& x, Eigen::Ref<Vec> out) {
        for (int k = 0; k < K; ++k) {
            const Vec xi = x.segment(xi_off + 4 * k, 4);
            const Vec next = bicycle_step(xi, x(u_off + 2 * k),
                                          x(u_off + 2 * k + 1), l_f, l_r, T);
            out.segment(4 * k, 4) = x.segment(xi_off + 4 * (k + 1), 4) - next;
        }
    };
    g.jacobian = [=](const Vec& x, int row0, std::vector<nlp::Triplet>& out) {
        for (int k = 0; k < K; ++k) {
            const int r = row0 + 4 * k;
            const int xi = xi_off + 4 * k;
            const int xin = xi_off + 4 * (k + 1);
            const int uv = u_off + 2 * k;
            const double v = x(uv), de = x(uv + 1);
            const double th = x(xi + 2), be = x(xi + 3);
            const double cw = std::cos(th + be), sw = std::sin(th + be);
            for (int i = 0; i < 4; ++i) out.emplace_back(r + i, xin + i, 1.0);
            // px' - px - T v cos(th+be)
            out.emplace_back(r + 0, xi + 0, -1.0);
            out.emplace_back(r + 0, xi + 2, T * v * sw);
            out.emplace_back(r + 0, xi + 3, T * v * sw);
            out.emplace_back(r + 0, uv, -T * cw);
            // py' - py - T v sin(th+be)
            out.emplace_back(r + 1, xi + 1, -1.0);
            out.emplace_back(r + 1, xi + 2, -T * v * cw);
            out.emplace_back(r + 1, xi + 3, -T * v * cw);
            out.emplace_back(r + 1, uv, -T * sw);
            // th' - th - T v sin(be)/l_r
            out.emplace_back(r + 2, xi + 2, -1.0);
            out.emplace_back(r + 2, xi + 3, -T * v * std::cos(be) / l_r);
            out.emplace_back(r + 2, uv, -T * std::sin(be) / l_r);
            // be' - be - T atan(kappa tan(de))
            out.emplace_back(r + 3, xi + 3, -1.0);
            const double tn = std::tan(de);
            const double sec2 = 1.0 + tn * tn;
            out.emplace_back(r + 3, uv + 1,
                             -T * kappa * sec2 / (1.0 + kappa * kappa * tn * tn));
        }
    };
    g.hessian = [=](const Vec& x, const Vec& mult, std::vector<nlp::Triplet>& out) {
        auto sym = [&out](int a, int b, double v) {
            if (a >= b)
                out.emplace_back(a, b, v);
            else
                out.emplace_back(b, a, v);
        };
        for (int k = 0; k < K; ++k) {
            const int xi = xi_off + 4 * k;
            const int uv = u_off + 2 * k;
            const double v = x(uv), de = x(uv + 1);
            const double th = x(xi + 2), be = x(xi + 3);
            const double cw = std::cos(th + be), sw = std::sin(th + be);
            const double w0 = mult(4 * k), w1 = mult(4 * k + 1),
                         w2 = mult(4 * k + 2), w3 = mult(4 * k + 3);
            const double waa = w0 * T * v * cw + w1 * T * v * sw;
            if (waa != 0.0) {
                sym(xi + 2, xi + 2, waa);
                sym(xi + 3, xi + 3, waa);
                sym(xi + 2, xi + 3, waa);
            }
            const double wav = w0 * T * sw - w1 * T * cw;
            if (wav != 0.0) {
                sym(xi + 2, uv, wav);
                sym(xi + 3, uv, wav);
            }
            if (w2 != 0.0) {
                sym(xi + 3, xi + 3, w2 * T * v * std::sin(be) / l_r);
                sym(xi + 3, uv, -w2 * T * std::cos(be) / l_r);
            }
            if (w3 != 0.0) {
                const double tn = std::tan(de);
                const double sec2 = 1.0 + tn * tn;
                const double den = 1.0 + kappa * kappa * tn * tn;
                const double gp =
                    2.0 * kappa * (1.0 - kappa * kappa) * sec2 * tn / (den * den);
                sym(uv + 1, uv + 1, -w3 * T * gp);
            }
        }
    };
    return g;
}

StageProblem build_stage(const Vec& xi_t,
                         const std::vector<std::vector<StepSamples>>& samples,
                         const std::vector<Vec>& ref_path, const MPCConfig& cfg,
                         bool robust) {
    cfg.validate();
    if (xi_t.size() != 4)
        throw std::invalid_argument("build: robot state must have 4 entries");
    const int K = cfg.K;
    const int L = static_cast<int>(samples.size());
    for (const auto& per_obstacle : samples)
        if (static_cast<int>(per_obstacle.size()) != K)
            throw std::invalid_argument("build: samples must cover K steps");

    StageProblem stage;
    stage.K = K;
    stage.risk = cfg.risk;
    stage.risk.N = cfg.N;
    stage.robust = robust;

    std::vector<nlp::VariableBlock> vars;
    {
        nlp::VariableBlock u;
        u.name = "u";
        u.dim = 2 * K;
        u.lower.resize(2 * K);
        u.upper.resize(2 * K);
        u.initial.resize(2 * K);
        for (int k = 0; k < K; ++k) {
            u.lower(2 * k) = cfg.limits.v_min;
            u.upper(2 * k) = cfg.limits.v_max;
            u.lower(2 * k + 1) = -cfg.limits.steer_max;
            u.upper(2 * k + 1) = cfg.limits.steer_max;
            u.initial(2 * k) = std::clamp(cfg.nominal_speed, cfg.limits.v_min,
                                          cfg.limits.v_max);
            u.initial(2 * k + 1) = 0.0;
        }
        vars.push_back(std::move(u));
    }
    {
        nlp::VariableBlock xi;
        xi.name = "xi";
        xi.dim = 4 * (K + 1);
        vars.push_back(std::move(xi));
    }
    {
        nlp::VariableBlock y;
        y.name = "y";
        y.dim = 2 * (K + 1);
        vars.push_back(std::move(y));
    }
    stage.u_offset = 0;
    stage.xi_offset = 2 * K;
    stage.y_offset = stage.xi_offset + 4 * (K + 1);
    int offset = stage.y_offset + 2 * (K + 1);

    std::vector<nlp::ConstraintGroup> cons;

    {
        nlp::ConstraintGroup init;
        init.name = "init";
        init.kind = nlp::ConstraintKind::Equality;
        init.dim = 4;
        init.depends = {"xi"};
        const int xi_off = stage.xi_offset;
        const Vec xi0 = xi_t;
        init.eval = [=](const Vec& x, Eigen::Ref<Vec> out) {
            out = x.segment(xi_off, 4) - xi0;
        };
        init.jacobian = [=](const Vec&, int row0, std::vector<nlp::Triplet>& out) {
            for (int i = 0; i < 4; ++i) out.emplace_back(row0 + i, xi_off + i, 1.0);
        };
        cons.push_back(std::move(init));
    }

    cons.push_back(
        dynamics_group(K, stage.u_offset, stage.xi_offset, cfg.limits, cfg.T_s));

    {
        nlp::ConstraintGroup out_rows;
        out_rows.name = "out";
        out_rows.kind = nlp::ConstraintKind::Equality;
        out_rows.dim = 2 * (K + 1);
        out_rows.depends = {"xi", "y"};
        const int xi_off = stage.xi_offset, y_off = stage.y_offset;
        out_rows.eval = [=](const Vec& x, Eigen::Ref<Vec> out) {
            for (int k = 0; k <= K; ++k) {
                out(2 * k) = x(y_off + 2 * k) - x(xi_off + 4 * k);
                out(2 * k + 1) = x(y_off + 2 * k + 1) - x(xi_off + 4 * k + 1);
            }
        };
        out_rows.jacobian = [=](const Vec&, int row0,
                                std::vector<nlp::Triplet>& out) {
            for (int k = 0; k <= K; ++k) {
                out.emplace_back(row0 + 2 * k, y_off + 2 * k, 1.0);
                out.emplace_back(row0 + 2 * k, xi_off + 4 * k, -1.0);
                out.emplace_back(row0 + 2 * k + 1, y_off + 2 * k + 1, 1.0);
                out.emplace_back(row0 + 2 * k + 1, xi_off + 4 * k + 1, -1.0);
            }
        };
        cons.push_back(std::move(out_rows));
    }

    stage.blocks.assign(K, {});
    for (int k = 1; k <= K; ++k) {
        for (int o = 0; o < L; ++o) {
            const auto& draws = samples[o][k - 1];
            if (static_cast<int>(draws.size()) != cfg.N)
                throw std::invalid_argument("build: sample count mismatch");
            risk::DrBlockLayout layout;
            layout.prefix = "risk_k" + std::to_string(k) + "_o" + std::to_string(o);
            layout.self_offset = offset;
            layout.y_offset = stage.y_offset + 2 * k;
            layout.include_budget = true;
            layout.robust = robust;
            layout.y_scale_hint = ref_path[k];
            auto block = risk::build_dr_constraint_block(draws, stage.risk, layout);
            offset += block.var_count;
            for (auto& v : block.variables) vars.push_back(v);
            for (auto& c : block.constraints) cons.push_back(c);
            stage.blocks[k - 1].push_back(std::move(block));
        }
    }

    auto tracking = build_cost(ref_path, cfg.Q, cfg.R, cfg.P, stage.u_offset,
                               stage.y_offset, K);
    // Tiny proximal term over the risk-block variables: the blocks admit
    // continua of equivalent optima (inactive samples leave rho free), which
    // stalls the solver; 1e-8 regularization picks one without moving any
    // quantity beyond the working tolerances.
    const int block_begin = stage.y_offset + 2 * (K + 1);
    const int block_count = offset - block_begin;
    nlp::Objective objective;
    objective.value = [=](const Vec& x) {
        return tracking.value(x) +
               1e-8 * x.segment(block_begin, block_count).squaredNorm();
    };
    objective.gradient = [=](const Vec& x, Vec& g) {
        tracking.gradient(x, g);
        g.segment(block_begin, block_count) +=
            2e-8 * x.segment(block_begin, block_count);
    };
    objective.hessian = [=](const Vec& x, std::vector<nlp::Triplet>& h) {
        tracking.hessian(x, h);
        for (int j = block_begin; j < block_begin + block_count; ++j)
            h.emplace_back(j, j, 2e-8);
    };
    stage.problem =
        nlp::assemble(std::move(vars), std::move(cons), std::move(objective));

    // Cold start: nominal-speed rollout plus risk-block defaults.
    Vec x0 = stage.problem.initial_point();
    Vec xi = xi_t;
    x0.segment(stage.xi_offset, 4) = xi;
    x0.segment(stage.y_offset, 2) = xi.head(2);
    for (int k = 0; k < K; ++k) {
        xi = bicycle_step(xi, x0(stage.u_offset + 2 * k),
                          x0(stage.u_offset + 2 * k + 1), cfg.limits.l_f,
                          cfg.limits.l_r, cfg.T_s);
        x0.segment(stage.xi_offset + 4 * (k + 1), 4) = xi;
        x0.segment(stage.y_offset + 2 * (k + 1), 2) = xi.head(2);
    }
    for (int k = 1; k <= K; ++k) {
        for (int o = 0; o < L; ++o) {
            risk::DrBlockLayout layout;
            layout.self_offset = stage.blocks[k - 1][o].z_offset;
            layout.robust = robust;
            risk::init_dr_block_point(samples[o][k - 1], stage.risk, layout,
                                      x0.segment(stage.y_offset + 2 * k, 2), x0);
        }
    }
    stage.problem.set_initial_point(x0);
    return stage;
}

} // namespace

StageProblem build_drmpc(const Vec& xi_t,
                         const std::vector<std::vector<StepSamples>>& samples,
                         const std::vector<Vec>& ref_path, const MPCConfig& cfg) {
    return build_stage(xi_t, samples, ref_path, cfg, true);
}

StageProblem build_saampc(const Vec& xi_t,
                          const std::vector<std::vector<StepSamples>>& samples,
                          const std::vector<Vec>& ref_path, const MPCConfig& cfg) {
    return build_stage(xi_t, samples, ref_path, cfg, false);
}

Vec warm_start(const nlp::NLSolution& prev, const StageProblem& stage,
               const Vec& xi_t,
               const std::vector<std::vector<StepSamples>>& samples,
               const MPCConfig& cfg) {
    Vec x0 = stage.problem.initial_point();
    if (prev.point.size() != stage.problem.num_vars()) return x0;  // cold start

    const int K = stage.K;
    // shift controls by one step, repeating the last entry
    for (int k = 0; k < K; ++k) {
        const int src = std::min(k + 1, K - 1);
        x0.segment(stage.u_offset + 2 * k, 2) =
            prev.point.segment(stage.u_offset + 2 * src, 2);
    }
    // re-roll states from the measured initial state
    Vec xi = xi_t;
    x0.segment(stage.xi_offset, 4) = xi;
    x0.segment(stage.y_offset, 2) = xi.head(2);
    for (int k = 0; k < K; ++k) {
        xi = bicycle_step(xi, x0(stage.u_offset + 2 * k),
                          x0(stage.u_offset + 2 * k + 1), cfg.limits.l_f,
                          cfg.limits.l_r, cfg.T_s);
        x0.segment(stage.xi_offset + 4 * (k + 1), 4) = xi;
        x0.segment(stage.y_offset + 2 * (k + 1), 2) = xi.head(2);
    }
    // risk blocks copy the previous solution one step forward: successive
    // stages see nearly identical sampled constraint sets, so the shifted
    // block variables start near the new optimum
    for (int k = 1; k <= K; ++k) {
        for (std::size_t o = 0; o < stage.blocks[k - 1].size(); ++o) {
            const auto& dst = stage.blocks[k - 1][o];
            const auto& src = stage.blocks[std::min(k, K - 1)][o];
            x0.segment(dst.z_offset, dst.var_count) =
                prev.point.segment(src.z_offset, src.var_count);
        }
    }
    return x0;
}

Controller::Controller(MPCConfig cfg,
                       std::vector<predict::ObstacleGeometry> obstacle_geometry)
    : cfg_(std::move(cfg)), geometry_(std::move(obstacle_geometry)) {
    cfg_.validate();
    state_.windows.assign(geometry_.size(), gp::GPDataset(cfg_.M));
}

std::pair<Vec, StageDiagnostics> Controller::step(
    const Vec& robot_state, const std::vector<Observation>& obs,
    const std::vector<Vec>& ref_window) {
    const auto t0 = std::chrono::steady_clock::now();
    const int L = static_cast<int>(geometry_.size());
    if (static_cast<int>(obs.size()) != L)
        throw std::invalid_argument("Controller::step: observation count");
    const int K = cfg_.K;

    std::vector<std::vector<std::vector<Vec>>> states(L);
    std::vector<double> min_clear(L, std::numeric_limits<double>::infinity());
    const Vec y0 = robot_state.head(2);
    for (int o = 0; o < L; ++o) {
        state_.windows[o] =
            gp::update_window(state_.windows[o], obs[o].state, obs[o].velocity);
        const auto model =
            gp::fit(state_.windows[o], cfg_.gp_hyper, cfg_.gp_options);
        predict::GaussianBelief belief{
            obs[o].state, Mat::Zero(obs[o].state.size(), obs[o].state.size())};
        const auto beliefs = predict::propagate_horizon(belief, model, K, cfg_.T_o);
        states[o].resize(K);
        for (int k = 0; k < K; ++k) {
            states[o][k] = predict::sample_states(
                beliefs[k], cfg_.N,
                derive_seed(cfg_.master_seed, state_.stage, k + 1, o));
            for (const auto& s : states[o][k])
                min_clear[o] = std::min(
                    min_clear[o],
                    predict::rectangle_clearance(y0, s, geometry_[o]));
        }
    }

    // Screen obstacles no feasible trajectory can reach within the horizon.
    // A screened robust block keeps a feasibility witness (rho spread over
    // three faces, lambda at its induced floor) which must fit the budget
    // with margin; otherwise the block stays in the problem.
    const bool robust = cfg_.kind == ControllerKind::DrMpc;
    const double reach = cfg_.K * cfg_.T_s * cfg_.limits.v_max;
    const double witness_lhs =
        cfg_.risk.theta * 0.5774 *
        std::sqrt(std::pow(y0.norm() + reach, 2) + 2.0) /
        (1.0 - cfg_.risk.alpha);
    std::vector<int> kept;
    for (int o = 0; o < L; ++o) {
        const double screen_dist =
            std::max(reach + 0.5, 2.0 * geometry_[o].half_width + 0.1);
        bool keep = min_clear[o] <= screen_dist;
        if (robust && witness_lhs > 0.98 * cfg_.risk.delta) keep = true;
        if (keep) kept.push_back(o);
    }

    std::vector<std::vector<StepSamples>> samples(kept.size());
    for (std::size_t j = 0; j < kept.size(); ++j) {
        const int o = kept[j];
        samples[j].resize(K);
        for (int k = 0; k < K; ++k) {
            samples[j][k].reserve(cfg_.N);
            for (const auto& s : states[o][k])
                samples[j][k].push_back(predict::normalized_halfspaces(
                    predict::polytope_from_state(geometry_[o], s)));
        }
    }

    auto stage = robust ? build_drmpc(robot_state, samples, ref_window, cfg_)
                        : build_saampc(robot_state, samples, ref_window, cfg_);

    // Warm-start from the shifted previous solution; fall back to the
    // nominal cold start when the shifted basin fails.
    nlp::SolveOptions opts = cfg_.solver;
    if (getenv("DRMPC_TRACE_STAGE") &&
        atoi(getenv("DRMPC_TRACE_STAGE")) == state_.stage)
        opts.trace = true;
    const Vec cold_point = stage.problem.initial_point();
    const bool warm = state_.previous.has_value();
    if (warm)
        stage.problem.set_initial_point(
            warm_start(*state_.previous, stage, robot_state, samples, cfg_));
    auto sol = nlp::solve_local(stage.problem, opts);
    if (warm && sol.status != nlp::SolveStatus::OptimalLocal) {
        stage.problem.set_initial_point(cold_point);
        auto retry = nlp::solve_local(stage.problem, opts);
        if (retry.status == nlp::SolveStatus::OptimalLocal ||
            retry.feasibility < sol.feasibility)
            sol = std::move(retry);
    }

    StageDiagnostics diag;
    diag.status = sol.status;
    diag.objective = sol.objective_value;
    diag.kkt_residual = sol.kkt_residual;
    diag.feasibility = sol.feasibility;
    diag.iterations = sol.iterations;
    // Budget left-hand sides: solved blocks from the solution, screened
    // obstacles from their feasibility witness at the solved positions.
    diag.risk_lhs = Mat::Zero(K, std::max(L, 1));
    for (int k = 1; k <= K; ++k) {
        const Vec yk = sol.point.segment(stage.y_offset + 2 * k, 2);
        const double witness_k = robust ? cfg_.risk.theta * 0.5774 *
                                              std::sqrt(yk.squaredNorm() + 2.0) /
                                              (1.0 - cfg_.risk.alpha)
                                        : 0.0;
        for (int o = 0; o < L; ++o) diag.risk_lhs(k - 1, o) = witness_k;
        for (std::size_t j = 0; j < kept.size(); ++j)
            diag.risk_lhs(k - 1, kept[j]) = risk::dr_block_lhs(
                stage.risk, stage.blocks[k - 1][j], sol.point, stage.robust);
    }
    diag.risk_lhs_max = L > 0 ? diag.risk_lhs.maxCoeff() : 0.0;

    Vec u(2);
    if (sol.status == nlp::SolveStatus::OptimalLocal) {
        u = sol.point.segment(stage.u_offset, 2);
        state_.previous = std::move(sol);
    } else {
        // braking fallback; strict-mode abort is the caller's decision
        u << 0.0, 0.0;
        diag.fallback_applied = true;
        state_.previous.reset();
    }
    ++state_.stage;
    diag.solve_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return {u, diag};
}

} // namespace drmpc::mpc
