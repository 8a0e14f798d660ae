#include "drmpc/nlp.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <unordered_set>

namespace drmpc::nlp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

Vec clamp_to_box(const Vec& x, const Vec& lo, const Vec& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}
} // namespace

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::OptimalLocal: return "optimal-local";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::MaxIter: return "max-iter";
        case SolveStatus::NumericFailure: return "numeric-failure";
    }
    return "unknown";
}

int NLProblem::offset(const std::string& block) const {
    for (const auto& b : blocks_)
        if (b.first == block) return b.second.first;
    throw std::invalid_argument("NLProblem: unknown block '" + block + "'");
}

int NLProblem::block_dim(const std::string& block) const {
    for (const auto& b : blocks_)
        if (b.first == block) return b.second.second;
    throw std::invalid_argument("NLProblem: unknown block '" + block + "'");
}

void NLProblem::set_initial_point(const Vec& x0) {
    if (x0.size() != n_)
        throw std::invalid_argument("set_initial_point: wrong dimension");
    x0_ = clamp_to_box(x0, lower_, upper_);
}

void NLProblem::eval_eq(const Vec& x, Vec& out) const {
    out.resize(m_eq_);
    int row = 0;
    for (const auto& g : eq_) {
        g.eval(x, out.segment(row, g.dim));
        row += g.dim;
    }
}

void NLProblem::eval_ineq(const Vec& x, Vec& out) const {
    out.resize(m_ineq_);
    int row = 0;
    for (const auto& g : ineq_) {
        g.eval(x, out.segment(row, g.dim));
        row += g.dim;
    }
}

void NLProblem::eval_jac_eq(const Vec& x, std::vector<Triplet>& out) const {
    int row = 0;
    for (const auto& g : eq_) {
        g.jacobian(x, row, out);
        row += g.dim;
    }
}

void NLProblem::eval_jac_ineq(const Vec& x, std::vector<Triplet>& out) const {
    int row = 0;
    for (const auto& g : ineq_) {
        g.jacobian(x, row, out);
        row += g.dim;
    }
}

NLProblem assemble(std::vector<VariableBlock> blocks,
                   std::vector<ConstraintGroup> constraints, Objective objective) {
    NLProblem p;
    std::unordered_set<std::string> names;
    int offset = 0;
    for (auto& b : blocks) {
        if (b.dim <= 0)
            throw std::invalid_argument("assemble: block '" + b.name +
                                        "' has nonpositive dimension");
        if (!names.insert(b.name).second)
            throw std::invalid_argument("assemble: duplicate block '" + b.name + "'");
        if (b.lower.size() == 0) b.lower = Vec::Constant(b.dim, -kInf);
        if (b.upper.size() == 0) b.upper = Vec::Constant(b.dim, kInf);
        if (b.initial.size() == 0) b.initial = Vec::Zero(b.dim);
        if (b.lower.size() != b.dim || b.upper.size() != b.dim ||
            b.initial.size() != b.dim)
            throw std::invalid_argument("assemble: block '" + b.name +
                                        "' bound/initial dimension mismatch");
        p.blocks_.push_back({b.name, {offset, b.dim}});
        offset += b.dim;
    }
    p.n_ = offset;
    p.lower_.resize(p.n_);
    p.upper_.resize(p.n_);
    p.x0_.resize(p.n_);
    for (const auto& b : blocks) {
        const int off = p.offset(b.name);
        p.lower_.segment(off, b.dim) = b.lower;
        p.upper_.segment(off, b.dim) = b.upper;
        p.x0_.segment(off, b.dim) = b.initial;
    }
    p.x0_ = clamp_to_box(p.x0_, p.lower_, p.upper_);

    for (auto& g : constraints) {
        if (g.dim <= 0)
            throw std::invalid_argument("assemble: constraint group '" + g.name +
                                        "' has nonpositive dimension");
        if (!g.eval || !g.jacobian)
            throw std::invalid_argument("assemble: constraint group '" + g.name +
                                        "' missing callbacks");
        for (const auto& dep : g.depends)
            if (!names.count(dep))
                throw std::invalid_argument("assemble: constraint group '" + g.name +
                                            "' references unknown block '" + dep +
                                            "'");
        if (g.kind == ConstraintKind::Equality) {
            p.m_eq_ += g.dim;
            p.eq_.push_back(std::move(g));
        } else {
            p.m_ineq_ += g.dim;
            p.ineq_.push_back(std::move(g));
        }
    }
    if (!objective.value || !objective.gradient)
        throw std::invalid_argument("assemble: objective missing callbacks");
    p.objective_ = std::move(objective);

    // Smoke-check callback output sizes and derivative finiteness at x0.
    Vec ce, ci, grad;
    p.eval_eq(p.x0_, ce);
    p.eval_ineq(p.x0_, ci);
    if (!ce.allFinite() || !ci.allFinite())
        throw std::invalid_argument("assemble: constraint not finite at initial point");
    p.objective_.gradient(p.x0_, grad);
    if (grad.size() != p.n_)
        throw std::invalid_argument("assemble: objective gradient dimension mismatch");
    if (!grad.allFinite())
        throw std::invalid_argument("assemble: objective gradient not finite at initial point");
    std::vector<Triplet> jac;
    p.eval_jac_eq(p.x0_, jac);
    p.eval_jac_ineq(p.x0_, jac);
    for (const auto& t : jac) {
        if (t.col() < 0 || t.col() >= p.n_)
            throw std::invalid_argument("assemble: Jacobian column out of range");
        if (!std::isfinite(t.value()))
            throw std::invalid_argument("assemble: Jacobian not finite at initial point");
    }
    return p;
}

// ============================================================
// Augmented-Lagrangian solver
// ============================================================

namespace {

struct ALWork {
    const NLProblem& p;
    Vec lam_e, lam_i;
    double mu = 10.0;
    Vec ce, ci;

    explicit ALWork(const NLProblem& prob) : p(prob) {}

    double al_value(const Vec& x, Vec& ce_out, Vec& ci_out) const {
        p.eval_eq(x, ce_out);
        p.eval_ineq(x, ci_out);
        double v = p.objective().value(x);
        v += lam_e.dot(ce_out) + 0.5 * mu * ce_out.squaredNorm();
        for (int i = 0; i < ci_out.size(); ++i) {
            const double t = lam_i(i) + mu * ci_out(i);
            if (t > 0.0)
                v += (t * t - lam_i(i) * lam_i(i)) / (2.0 * mu);
            else
                v += -lam_i(i) * lam_i(i) / (2.0 * mu);
        }
        return v;
    }
};

double proj_grad_norm(const Vec& x, const Vec& g, const Vec& lo, const Vec& hi) {
    return (x - clamp_to_box(x - g, lo, hi)).cwiseAbs().maxCoeff();
}

} // namespace

NLSolution solve_local(const NLProblem& p, const SolveOptions& opts) {
    const auto t_start = std::chrono::steady_clock::now();
    const int n = p.num_vars();
    const int me = p.num_eq();
    const int mi = p.num_ineq();

    ALWork w(p);
    w.lam_e = Vec::Zero(me);
    w.lam_i = Vec::Zero(mi);
    w.mu = opts.mu0;
    if (opts.warm_mult_eq.size() == me && opts.warm_mult_ineq.size() == mi) {
        w.lam_e = opts.warm_mult_eq;
        w.lam_i = opts.warm_mult_ineq.cwiseMax(0.0);
        if (opts.warm_penalty > 0.0) w.mu = opts.warm_penalty;
    }

    Vec x = clamp_to_box(p.initial_point(), p.lower(), p.upper());

    NLSolution sol;
    sol.status = SolveStatus::MaxIter;
    int total_newton = 0;
    double eta = 0.1 * std::pow(w.mu, -0.1);
    double omega = std::max(1.0 / w.mu, 0.5 * opts.tol);
    double best_viol = kInf;
    int stagnant_outers = 0;

    std::vector<Triplet> jac_e, jac_i, htr, full_tr;
    Eigen::SimplicialLDLT<SpMat> ldlt;
    double tau_run = 0.0;  // adaptive curvature shift, persists across steps
    int n_exact = 0, n_gn = 0, n_grad = 0;
    std::vector<char> prev_active;
    std::vector<char> prev_rows;

    auto finalize = [&](SolveStatus status) {
        p.eval_eq(x, w.ce);
        p.eval_ineq(x, w.ci);
        double viol = 0.0;
        if (me > 0) viol = std::max(viol, w.ce.cwiseAbs().maxCoeff());
        if (mi > 0) viol = std::max(viol, w.ci.cwiseMax(0.0).maxCoeff());
        jac_e.clear();
        jac_i.clear();
        p.eval_jac_eq(x, jac_e);
        p.eval_jac_ineq(x, jac_i);
        Vec g;
        p.objective().gradient(x, g);
        for (const auto& t : jac_e) g(t.col()) += t.value() * w.lam_e(t.row());
        for (const auto& t : jac_i) g(t.col()) += t.value() * w.lam_i(t.row());
        const double stat = proj_grad_norm(x, g, p.lower(), p.upper());
        double comp = 0.0;
        for (int i = 0; i < mi; ++i)
            comp = std::max(comp, w.lam_i(i) * std::max(0.0, -w.ci(i)));
        sol.point = x;
        sol.objective_value = p.objective().value(x);
        sol.kkt_residual = std::max(stat, comp);
        sol.feasibility = viol;
        sol.iterations = total_newton;
        sol.mult_eq = w.lam_e;
        sol.mult_ineq = w.lam_i;
        sol.penalty = w.mu;
        // Status honesty: only report optimal when verified.
        if (status == SolveStatus::OptimalLocal &&
            (stat > opts.tol || viol > opts.feas_tol ||
             comp > std::sqrt(opts.tol)))
            status = viol > opts.feas_tol ? SolveStatus::Infeasible
                                          : SolveStatus::MaxIter;
        sol.status = status;
        sol.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                .count();
        return sol;
    };

    for (int outer = 0; outer < 60; ++outer) {
        // ---- inner projected-Newton minimization of the AL over the box ----
        bool numeric_trouble = false;
        for (int inner = 0; inner < opts.max_inner; ++inner) {
            const double f0 = w.al_value(x, w.ce, w.ci);
            if (!std::isfinite(f0)) {
                numeric_trouble = true;
                break;
            }
            jac_e.clear();
            jac_i.clear();
            p.eval_jac_eq(x, jac_e);
            p.eval_jac_ineq(x, jac_i);
            Vec we = w.lam_e + w.mu * w.ce;
            Vec wi = (w.lam_i + w.mu * w.ci).cwiseMax(0.0);
            Vec g;
            p.objective().gradient(x, g);
            for (const auto& t : jac_e) g(t.col()) += t.value() * we(t.row());
            for (const auto& t : jac_i) g(t.col()) += t.value() * wi(t.row());

            const double pg = proj_grad_norm(x, g, p.lower(), p.upper());
            if (pg <= omega) break;
            if (total_newton >= opts.max_iter) break;
            ++total_newton;

            std::vector<char> active(n, 0);
            for (int j = 0; j < n; ++j) {
                if ((x(j) <= p.lower()(j) + 1e-10 && g(j) > 0.0) ||
                    (x(j) >= p.upper()(j) - 1e-10 && g(j) < 0.0))
                    active[j] = 1;
            }
            Vec g_masked = g;
            for (int j = 0; j < n; ++j)
                if (active[j]) g_masked(j) = 0.0;

            const double sqmu = std::sqrt(w.mu);
            std::vector<Triplet> scaled;
            scaled.reserve(jac_e.size() + jac_i.size());
            for (const auto& t : jac_e)
                scaled.emplace_back(t.row(), t.col(), sqmu * t.value());
            for (const auto& t : jac_i)
                if (wi(t.row()) > 0.0)
                    scaled.emplace_back(me + t.row(), t.col(), sqmu * t.value());
            SpMat J(me + mi, n);
            J.setFromTriplets(scaled.begin(), scaled.end());
            SpMat Hpen = SpMat(J.transpose()) * J;

            // Model Hessian masked to the free set; `with_curvature` adds the
            // exact constraint curvature, otherwise Gauss-Newton.
            auto assemble = [&](bool with_curvature) {
                full_tr.clear();
                htr.clear();
                if (p.objective().hessian) p.objective().hessian(x, htr);
                if (with_curvature) {
                    int row = 0;
                    for (const auto& grp : p.eq_groups()) {
                        if (grp.hessian)
                            grp.hessian(x, we.segment(row, grp.dim), htr);
                        row += grp.dim;
                    }
                    row = 0;
                    for (const auto& grp : p.ineq_groups()) {
                        if (grp.hessian)
                            grp.hessian(x, wi.segment(row, grp.dim), htr);
                        row += grp.dim;
                    }
                }
                double max_diag = 1.0;
                for (const auto& t : htr) {
                    if (active[t.row()] || active[t.col()]) continue;
                    full_tr.push_back(t);
                    if (t.row() != t.col())
                        full_tr.emplace_back(t.col(), t.row(), t.value());
                    else
                        max_diag = std::max(max_diag, std::abs(t.value()));
                }
                for (int k = 0; k < Hpen.outerSize(); ++k) {
                    for (SpMat::InnerIterator it(Hpen, k); it; ++it) {
                        if (active[it.row()] || active[it.col()]) continue;
                        full_tr.emplace_back(it.row(), it.col(), it.value());
                        if (it.row() == it.col())
                            max_diag = std::max(max_diag, std::abs(it.value()));
                    }
                }
                for (int j = 0; j < n; ++j)
                    if (active[j]) full_tr.emplace_back(j, j, 1.0);
                return max_diag;
            };

            Vec step;
            double diag_floor = 0.0;  // set after assemble()
            auto try_factor = [&](double tau) -> bool {
                std::vector<Triplet> tr = full_tr;
                const double shift = std::max(tau, diag_floor);
                if (shift > 0.0)
                    for (int j = 0; j < n; ++j)
                        if (!active[j]) tr.emplace_back(j, j, shift);
                // Jacobi equilibration keeps the factorization accurate when
                // the model mixes very stiff and very soft directions.
                Vec d = Vec::Zero(n);
                for (const auto& t : tr)
                    if (t.row() == t.col()) d(t.row()) += t.value();
                Vec scale(n);
                for (int j = 0; j < n; ++j)
                    scale(j) = 1.0 / std::sqrt(std::max(std::abs(d(j)), 1e-12));
                for (auto& t : tr)
                    t = Triplet(t.row(), t.col(),
                                t.value() * scale(t.row()) * scale(t.col()));
                SpMat H(n, n);
                H.setFromTriplets(tr.begin(), tr.end());
                ldlt.compute(H);
                if (ldlt.info() != Eigen::Success) return false;
                step = scale.asDiagonal() *
                       Vec(ldlt.solve(-(scale.asDiagonal() * g_masked)));
                return step.allFinite() &&
                       g_masked.dot(step) <=
                           -1e-9 * step.norm() * g_masked.norm();
            };

            bool have_step = false;
            double tau = tau_run;
            {
                const double max_diag = assemble(true);
                diag_floor = 1e-9 * max_diag;
                for (int attempt = 0; attempt < 3 && !have_step; ++attempt) {
                    if (try_factor(tau)) {
                        have_step = true;
                        tau_run = 0.25 * tau;
                        ++n_exact;
                        break;
                    }
                    tau = (tau == 0.0) ? 1e-8 * max_diag : tau * 10.0;
                }
            }
            if (!have_step) {
                const double max_diag = assemble(false);
                diag_floor = 1e-9 * max_diag;
                double gn_tau = 0.0;
                for (int attempt = 0; attempt < 20 && !have_step; ++attempt) {
                    if (try_factor(gn_tau)) {
                        have_step = true;
                        tau_run = tau;
                        ++n_gn;
                        break;
                    }
                    gn_tau = (gn_tau == 0.0) ? 1e-10 * max_diag : gn_tau * 10.0;
                    if (gn_tau > 1e14 * max_diag) break;
                }
            }
            if (!have_step) { step = -g_masked; ++n_grad; }

            // Projected backtracking line search with a projected-gradient
            // rescue before declaring a stall.
            bool accepted = false;
            for (int dir = 0; dir < 2 && !accepted; ++dir) {
                if (dir == 1) {
                    const double gn = g_masked.norm();
                    if (gn <= 0.0) break;
                    step = -g_masked * std::min(1.0, 1.0 / gn);
                }
                double t = 1.0;
                for (int ls = 0; ls < 45; ++ls) {
                    Vec xt = clamp_to_box(x + t * step, p.lower(), p.upper());
                    Vec ce_t, ci_t;
                    const double ft = w.al_value(xt, ce_t, ci_t);
                    const double pred = g.dot(xt - x);
                    if (std::isfinite(ft) && ft <= f0 + 1e-4 * pred &&
                        pred <= 0.0) {
                        x = xt;
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
            }
            if (opts.trace && inner >= opts.max_inner - 8) {
                int aflip = 0, acount = 0;
                for (int j = 0; j < n; ++j) {
                    acount += active[j] ? 1 : 0;
                    if (!prev_active.empty() && active[j] != prev_active[j])
                        ++aflip;
                }
                std::vector<char> rows(mi, 0);
                int rows_on = 0, rflip = 0;
                for (int i = 0; i < mi; ++i) {
                    rows[i] = wi(i) > 0.0 ? 1 : 0;
                    rows_on += rows[i];
                    if (!prev_rows.empty() && rows[i] != prev_rows[i]) ++rflip;
                }
                prev_rows = rows;
                std::fprintf(stderr,
                             "    in=%d pg=%.2e |p|=%.2e al=%.10f act=%d dact=%d "
                             "rows=%d drow=%d acc=%d\n",
                             inner, pg, step.norm(), f0, acount, aflip, rows_on,
                             rflip, accepted ? 1 : 0);
            }
            prev_active = active;
            if (!accepted) break;  // stalled; let the outer loop react
        }
        if (numeric_trouble) return finalize(SolveStatus::NumericFailure);

        // ---- multiplier / penalty update ----
        p.eval_eq(x, w.ce);
        p.eval_ineq(x, w.ci);
        double viol = 0.0;
        if (me > 0) viol = std::max(viol, w.ce.cwiseAbs().maxCoeff());
        if (mi > 0) viol = std::max(viol, w.ci.cwiseMax(0.0).maxCoeff());
        double test_viol = 0.0;
        if (me > 0) test_viol = w.ce.cwiseAbs().maxCoeff();
        for (int i = 0; i < mi; ++i)
            test_viol = std::max(
                test_viol, std::abs(std::max(w.ci(i), -w.lam_i(i) / w.mu)));

        if (opts.trace) {
            std::fprintf(stderr,
                         "  al outer=%d mu=%.1e viol=%.3e test=%.3e eta=%.3e "
                         "omega=%.3e newton=%d obj=%.8f ex=%d gn=%d gr=%d\n",
                         outer, w.mu, viol, test_viol, eta, omega, total_newton,
                         p.objective().value(x), n_exact, n_gn, n_grad);
        }
        if (test_viol <= std::max(eta, 0.1 * opts.feas_tol)) {
            w.lam_e += w.mu * w.ce;
            w.lam_i = (w.lam_i + w.mu * w.ci).cwiseMax(0.0);
            jac_e.clear();
            jac_i.clear();
            p.eval_jac_eq(x, jac_e);
            p.eval_jac_ineq(x, jac_i);
            Vec g;
            p.objective().gradient(x, g);
            for (const auto& t : jac_e) g(t.col()) += t.value() * w.lam_e(t.row());
            for (const auto& t : jac_i) g(t.col()) += t.value() * w.lam_i(t.row());
            const double stat = proj_grad_norm(x, g, p.lower(), p.upper());
            double comp = 0.0;
            for (int i = 0; i < mi; ++i)
                comp = std::max(comp, w.lam_i(i) * std::max(0.0, -w.ci(i)));
            if (viol <= opts.feas_tol && stat <= opts.tol &&
                comp <= std::sqrt(opts.tol))
                return finalize(SolveStatus::OptimalLocal);
            eta = std::max(eta * std::pow(w.mu, -0.9), 1e-12);
            omega = std::max(omega * std::pow(w.mu, -0.5), 0.5 * opts.tol);
        } else {
            if (w.mu >= opts.mu_max) {
                if (viol > opts.feas_tol) return finalize(SolveStatus::Infeasible);
            } else {
                w.mu = std::min(w.mu * 10.0, opts.mu_max);
            }
            eta = 0.1 * std::pow(w.mu, -0.1);
            omega = std::max(1.0 / w.mu, 0.5 * opts.tol);
        }

        // Penalty escalations without feasibility progress signal an
        // infeasible (or hopelessly ill-conditioned) problem.
        if (test_viol <= std::max(eta, 0.1 * opts.feas_tol) ||
            viol < best_viol * 0.9 - 1e-14) {
            best_viol = std::min(best_viol, viol);
            stagnant_outers = 0;
        } else if (++stagnant_outers >= 6) {
            return finalize(viol > opts.feas_tol ? SolveStatus::Infeasible
                                                 : SolveStatus::MaxIter);
        }
        if (total_newton >= opts.max_iter) return finalize(SolveStatus::MaxIter);
    }
    return finalize(SolveStatus::MaxIter);
}

double check_derivatives(const NLProblem& p, const Vec& point) {
    const double h = 1e-6;
    const int n = p.num_vars();
    const int me = p.num_eq();
    const int mi = p.num_ineq();

    std::vector<Triplet> jac;
    p.eval_jac_eq(point, jac);
    std::vector<Triplet> jac_i;
    p.eval_jac_ineq(point, jac_i);
    for (const auto& t : jac_i) jac.emplace_back(me + t.row(), t.col(), t.value());
    SpMat J(me + mi, n);
    J.setFromTriplets(jac.begin(), jac.end());

    Vec grad;
    p.objective().gradient(point, grad);

    double worst = 0.0;
    Vec cp(me + mi), cm(me + mi), tmp_e, tmp_i;
    Vec xp = point, xm = point;
    for (int j = 0; j < n; ++j) {
        xp(j) += h;
        xm(j) -= h;
        p.eval_eq(xp, tmp_e);
        p.eval_ineq(xp, tmp_i);
        cp << tmp_e, tmp_i;
        const double fp = p.objective().value(xp);
        p.eval_eq(xm, tmp_e);
        p.eval_ineq(xm, tmp_i);
        cm << tmp_e, tmp_i;
        const double fm = p.objective().value(xm);
        xp(j) = point(j);
        xm(j) = point(j);

        worst = std::max(worst, std::abs((fp - fm) / (2 * h) - grad(j)));
        if (me + mi > 0) {
            Vec fd_col = (cp - cm) / (2 * h);
            Vec an_col = Vec::Zero(me + mi);
            for (SpMat::InnerIterator it(J, j); it; ++it)
                an_col(it.row()) = it.value();
            worst = std::max(worst, (fd_col - an_col).cwiseAbs().maxCoeff());
        }
    }
    return worst;
}

void dump(const NLProblem& p, const Vec& point, std::ostream& os) {
    os << "nlp problem: " << p.num_vars() << " vars, " << p.num_eq() << " eq, "
       << p.num_ineq() << " ineq\n";
    os << "objective: " << p.objective().value(point) << "\n";
    os << "variables (lower, value, upper):\n";
    for (int j = 0; j < p.num_vars(); ++j)
        os << "  x[" << j << "] " << p.lower()(j) << " " << point(j) << " "
           << p.upper()(j) << "\n";
    Vec ce, ci;
    p.eval_eq(point, ce);
    p.eval_ineq(point, ci);
    int row = 0;
    for (const auto& g : p.eq_groups()) {
        os << "eq '" << g.name << "':";
        for (int i = 0; i < g.dim; ++i) os << " " << ce(row + i);
        os << "\n";
        row += g.dim;
    }
    row = 0;
    for (const auto& g : p.ineq_groups()) {
        os << "ineq '" << g.name << "':";
        for (int i = 0; i < g.dim; ++i) os << " " << ci(row + i);
        os << "\n";
        row += g.dim;
    }
}

} // namespace drmpc::nlp
