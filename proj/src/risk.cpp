#include "drmpc/risk.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

namespace drmpc::risk {

void RiskSpec::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("RiskSpec: alpha must be in (0,1)");
    if (delta < 0.0) throw std::invalid_argument("RiskSpec: delta must be >= 0");
    if (theta < 0.0) throw std::invalid_argument("RiskSpec: theta must be >= 0");
    if (N < 1) throw std::invalid_argument("RiskSpec: N must be >= 1");
}

double distance_to_safe_region(const Vec& y,
                               const predict::ObstaclePolytope& poly) {
    const int m = static_cast<int>(poly.G.rows());
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j) {
        const double norm = poly.G.row(j).norm();
        const double margin = std::max(0.0, poly.g(j) - poly.G.row(j).dot(y));
        best = std::min(best, margin / norm);
    }
    return best;
}

double cvar_empirical(const std::vector<double>& losses, double alpha) {
    if (losses.empty())
        throw std::invalid_argument("cvar_empirical: empty losses");
    if (alpha < 0.0 || alpha >= 1.0)
        throw std::invalid_argument("cvar_empirical: alpha must be in [0,1)");
    const int n = static_cast<int>(losses.size());
    std::vector<double> sorted = losses;
    std::sort(sorted.begin(), sorted.end());
    const int k = static_cast<int>(std::ceil(n * alpha));
    double acc = 0.0;
    if (k > 0) acc += (static_cast<double>(k) / n - alpha) * sorted[k - 1];
    for (int i = k; i < n; ++i) acc += sorted[i] / n;
    return acc / (1.0 - alpha);
}

namespace {

// Per-sample affine terms a_i(y) = c_i y + d_i stacked as rows.
struct SampleData {
    Mat c;  // (N*m) x n_y
    Vec d;  // N*m
    int N = 0, m = 0, n_y = 0;
};

SampleData stack_samples(
    const std::vector<predict::NormalizedHalfspaceSample>& samples) {
    if (samples.empty())
        throw std::invalid_argument("risk: no half-space samples");
    SampleData sd;
    sd.N = static_cast<int>(samples.size());
    sd.m = static_cast<int>(samples.front().c.rows());
    sd.n_y = static_cast<int>(samples.front().c.cols());
    sd.c.resize(sd.N * sd.m, sd.n_y);
    sd.d.resize(sd.N * sd.m);
    for (int i = 0; i < sd.N; ++i) {
        if (samples[i].c.rows() != sd.m || samples[i].c.cols() != sd.n_y)
            throw std::invalid_argument("risk: inconsistent sample shapes");
        sd.c.middleRows(i * sd.m, sd.m) = samples[i].c;
        sd.d.segment(i * sd.m, sd.m) = samples[i].d;
    }
    return sd;
}

void emit_sym(int r, int c, double v, std::vector<nlp::Triplet>& out) {
    if (r >= c)
        out.emplace_back(r, c, v);
    else
        out.emplace_back(c, r, v);
}

} // namespace

double saa_risk(const std::vector<predict::NormalizedHalfspaceSample>& samples,
                const Vec& y, double alpha) {
    std::vector<double> losses;
    losses.reserve(samples.size());
    for (const auto& s : samples) {
        const double v = (s.c * y + s.d).minCoeff();
        losses.push_back(std::max(0.0, v));
    }
    return cvar_empirical(losses, alpha);
}

DrConstraintBlock build_dr_constraint_block(
    const std::vector<predict::NormalizedHalfspaceSample>& samples,
    const RiskSpec& spec, const DrBlockLayout& layout) {
    spec.validate();
    auto sd = std::make_shared<SampleData>(stack_samples(samples));
    const int N = sd->N, m = sd->m, n_y = sd->n_y;
    const bool robust = layout.robust;
    const bool y_is_var = layout.y_offset >= 0;
    if (!y_is_var && layout.y_fixed.size() != n_y)
        throw std::invalid_argument("build_dr_constraint_block: y_fixed size");

    DrConstraintBlock block;
    block.z_offset = layout.self_offset;
    block.lambda_offset = robust ? layout.self_offset + 1 : -1;
    block.s_offset = layout.self_offset + (robust ? 2 : 1);
    block.rho_offset = block.s_offset + N;
    block.var_count = (robust ? 2 : 1) + N + N * m;

    const int z_off = block.z_offset;
    const int l_off = block.lambda_offset;
    const int s_off = block.s_offset;
    const int r_off = block.rho_offset;
    const int y_off = layout.y_offset;
    const Vec y_fixed = layout.y_fixed;

    auto y_of = [y_is_var, y_off, y_fixed, n_y](const Vec& x) -> Vec {
        return y_is_var ? Vec(x.segment(y_off, n_y)) : y_fixed;
    };

    // variable blocks
    {
        nlp::VariableBlock z{layout.prefix + "/z", 1, Vec(), Vec(), Vec()};
        block.variables.push_back(z);
        if (robust) {
            nlp::VariableBlock lam{layout.prefix + "/lambda", 1,
                                   Vec::Zero(1), Vec::Constant(1, 1e8),
                                   Vec::Zero(1)};
            block.variables.push_back(lam);
        }
        nlp::VariableBlock s{layout.prefix + "/s", N, Vec::Zero(N),
                             Vec::Constant(N, std::numeric_limits<double>::infinity()),
                             Vec::Zero(N)};
        block.variables.push_back(s);
        nlp::VariableBlock rho{layout.prefix + "/rho", N * m, Vec::Zero(N * m),
                               Vec::Constant(N * m, 1.0),
                               Vec::Constant(N * m, 1.0 / m)};
        block.variables.push_back(rho);
    }

    const double inv1ma = 1.0 / (1.0 - spec.alpha);
    const double theta = spec.theta;

    // budget: z + (theta*lambda + (1/N) sum s)/(1-alpha) - delta <= 0
    if (layout.include_budget) {
        nlp::ConstraintGroup budget;
        budget.name = layout.prefix + "/budget";
        budget.kind = nlp::ConstraintKind::Inequality;
        budget.dim = 1;
        const double delta = spec.delta;
        budget.eval = [=](const Vec& x, Eigen::Ref<Vec> out) {
            double v = x(z_off);
            if (robust) v += inv1ma * theta * x(l_off);
            v += inv1ma / N * x.segment(s_off, N).sum();
            out(0) = v - delta;
        };
        budget.jacobian = [=](const Vec&, int row0, std::vector<nlp::Triplet>& out) {
            out.emplace_back(row0, z_off, 1.0);
            if (robust) out.emplace_back(row0, l_off, inv1ma * theta);
            for (int i = 0; i < N; ++i)
                out.emplace_back(row0, s_off + i, inv1ma / N);
        };
        block.constraints.push_back(std::move(budget));
        block.constraint_rows += 1;
    }

    // dot: <rho_i, c_i y + d_i> - s_i - z <= 0
    {
        nlp::ConstraintGroup dot;
        dot.name = layout.prefix + "/dot";
        dot.kind = nlp::ConstraintKind::Inequality;
        dot.dim = N;
        dot.eval = [=](const Vec& x, Eigen::Ref<Vec> out) {
            const Vec y = y_of(x);
            const Vec a = sd->c * y + sd->d;
            for (int i = 0; i < N; ++i)
                out(i) = x.segment(r_off + i * m, m).dot(a.segment(i * m, m)) -
                         x(s_off + i) - x(z_off);
        };
        dot.jacobian = [=](const Vec& x, int row0, std::vector<nlp::Triplet>& out) {
            const Vec y = y_of(x);
            const Vec a = sd->c * y + sd->d;
            for (int i = 0; i < N; ++i) {
                for (int j = 0; j < m; ++j)
                    out.emplace_back(row0 + i, r_off + i * m + j, a(i * m + j));
                if (y_is_var) {
                    const Vec gy = sd->c.middleRows(i * m, m).transpose() *
                                   x.segment(r_off + i * m, m);
                    for (int l = 0; l < n_y; ++l)
                        out.emplace_back(row0 + i, y_off + l, gy(l));
                }
                out.emplace_back(row0 + i, s_off + i, -1.0);
                out.emplace_back(row0 + i, z_off, -1.0);
            }
        };
        if (y_is_var) {
            dot.hessian = [=](const Vec&, const Vec& mult,
                              std::vector<nlp::Triplet>& out) {
                for (int i = 0; i < N; ++i) {
                    const double w = mult(i);
                    if (w == 0.0) continue;
                    for (int j = 0; j < m; ++j)
                        for (int l = 0; l < n_y; ++l)
                            emit_sym(r_off + i * m + j, y_off + l,
                                     w * sd->c(i * m + j, l), out);
                }
            };
        }
        block.constraints.push_back(std::move(dot));
        block.constraint_rows += N;
    }

    // nonneg: -(s_i + z) <= 0
    {
        nlp::ConstraintGroup nn;
        nn.name = layout.prefix + "/nonneg";
        nn.kind = nlp::ConstraintKind::Inequality;
        nn.dim = N;
        nn.eval = [=](const Vec& x, Eigen::Ref<Vec> out) {
            for (int i = 0; i < N; ++i) out(i) = -x(s_off + i) - x(z_off);
        };
        nn.jacobian = [=](const Vec&, int row0, std::vector<nlp::Triplet>& out) {
            for (int i = 0; i < N; ++i) {
                out.emplace_back(row0 + i, s_off + i, -1.0);
                out.emplace_back(row0 + i, z_off, -1.0);
            }
        };
        block.constraints.push_back(std::move(nn));
        block.constraint_rows += N;
    }

    // quad: [(sum_j rho_ij^2) * (||y||^2 + n_y) - lambda^2] / qs <= 0,
    // divided by a constant position scale to keep the entries O(1)
    if (robust) {
        double qs = layout.quad_row_scale;
        if (qs <= 0.0) {
            if (!y_is_var)
                qs = layout.y_fixed.squaredNorm() + n_y;
            else if (layout.y_scale_hint.size() == n_y)
                qs = layout.y_scale_hint.squaredNorm() + n_y;
            else
                qs = 1.0;
        }
        const double inv_qs = 1.0 / qs;
        nlp::ConstraintGroup quad;
        quad.name = layout.prefix + "/quad";
        quad.kind = nlp::ConstraintKind::Inequality;
        quad.dim = N;
        quad.eval = [=](const Vec& x, Eigen::Ref<Vec> out) {
            const Vec y = y_of(x);
            const double C = y.squaredNorm() + n_y;
            const double lam2 = x(l_off) * x(l_off);
            for (int i = 0; i < N; ++i)
                out(i) = inv_qs * (x.segment(r_off + i * m, m).squaredNorm() * C -
                                   lam2);
        };
        quad.jacobian = [=](const Vec& x, int row0, std::vector<nlp::Triplet>& out) {
            const Vec y = y_of(x);
            const double C = y.squaredNorm() + n_y;
            for (int i = 0; i < N; ++i) {
                const double rho2 = x.segment(r_off + i * m, m).squaredNorm();
                for (int j = 0; j < m; ++j)
                    out.emplace_back(row0 + i, r_off + i * m + j,
                                     inv_qs * 2.0 * C * x(r_off + i * m + j));
                if (y_is_var)
                    for (int l = 0; l < n_y; ++l)
                        out.emplace_back(row0 + i, y_off + l,
                                         inv_qs * 2.0 * rho2 * x(y_off + l));
                out.emplace_back(row0 + i, l_off, -inv_qs * 2.0 * x(l_off));
            }
        };
        quad.hessian = [=](const Vec& x, const Vec& mult,
                           std::vector<nlp::Triplet>& out) {
            const Vec y = y_of(x);
            const double C = y.squaredNorm() + n_y;
            double wsum = 0.0;
            double rho2w = 0.0;
            for (int i = 0; i < N; ++i) {
                const double w = mult(i) * inv_qs;
                if (w == 0.0) continue;
                wsum += w;
                rho2w += w * x.segment(r_off + i * m, m).squaredNorm();
                for (int j = 0; j < m; ++j) {
                    out.emplace_back(r_off + i * m + j, r_off + i * m + j, 2.0 * C * w);
                    if (y_is_var)
                        for (int l = 0; l < n_y; ++l)
                            emit_sym(r_off + i * m + j, y_off + l,
                                     4.0 * w * x(r_off + i * m + j) * x(y_off + l),
                                     out);
                }
            }
            if (wsum != 0.0) {
                out.emplace_back(l_off, l_off, -2.0 * wsum);
                if (y_is_var)
                    for (int l = 0; l < n_y; ++l)
                        out.emplace_back(y_off + l, y_off + l, 2.0 * rho2w);
            }
        };
        block.constraints.push_back(std::move(quad));
        block.constraint_rows += N;
    }

    // simplex: sum_j rho_ij = 1
    {
        nlp::ConstraintGroup simplex;
        simplex.name = layout.prefix + "/simplex";
        simplex.kind = nlp::ConstraintKind::Equality;
        simplex.dim = N;
        simplex.eval = [=](const Vec& x, Eigen::Ref<Vec> out) {
            for (int i = 0; i < N; ++i)
                out(i) = x.segment(r_off + i * m, m).sum() - 1.0;
        };
        simplex.jacobian = [=](const Vec&, int row0, std::vector<nlp::Triplet>& out) {
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < m; ++j)
                    out.emplace_back(row0 + i, r_off + i * m + j, 1.0);
        };
        block.constraints.push_back(std::move(simplex));
        block.constraint_rows += N;
    }

    return block;
}

void init_dr_block_point(
    const std::vector<predict::NormalizedHalfspaceSample>& samples,
    const RiskSpec& spec, const DrBlockLayout& layout, const Vec& y, Vec& x) {
    const auto sd = stack_samples(samples);
    const int N = sd.N, m = sd.m;
    const bool robust = layout.robust;
    const int z_off = layout.self_offset;
    const int l_off = robust ? z_off + 1 : -1;
    const int s_off = z_off + (robust ? 2 : 1);
    const int r_off = s_off + N;

    const Vec a = sd.c * y + sd.d;
    std::vector<double> losses(N);
    Vec vmin(N);
    for (int i = 0; i < N; ++i) {
        vmin(i) = a.segment(i * m, m).minCoeff();
        losses[i] = std::max(0.0, vmin(i));
    }
    // z at the empirical VaR (the CVaR-minimizing order statistic).
    std::vector<double> sorted = losses;
    std::sort(sorted.begin(), sorted.end());
    const int k = std::max(
        1, static_cast<int>(std::ceil(N * spec.alpha)));
    const double z0 = sorted[std::min(k, N) - 1];
    x(z_off) = z0;

    double max_rho_norm = 0.0;
    for (int i = 0; i < N; ++i) {
        // uniform over argmin faces
        const double tol = 1e-12 * std::max(1.0, std::abs(vmin(i)));
        int ties = 0;
        for (int j = 0; j < m; ++j)
            if (a(i * m + j) <= vmin(i) + tol) ++ties;
        for (int j = 0; j < m; ++j)
            x(r_off + i * m + j) =
                (a(i * m + j) <= vmin(i) + tol) ? 1.0 / ties : 0.0;
        max_rho_norm =
            std::max(max_rho_norm, x.segment(r_off + i * m, m).norm());
        x(s_off + i) = std::max({0.0, -z0, vmin(i) - z0});
    }
    if (robust) {
        const double C = y.squaredNorm() + y.size();
        x(l_off) = std::min(1e8, std::sqrt(C) * max_rho_norm * (1.0 + 1e-9) + 1e-12);
    }
}

double dr_block_lhs(const RiskSpec& spec, const DrConstraintBlock& block,
                    const Vec& x, bool robust) {
    double v = x(block.z_offset);
    const int N = spec.N;
    if (robust && block.lambda_offset >= 0)
        v += spec.theta * x(block.lambda_offset) / (1.0 - spec.alpha);
    v += x.segment(block.s_offset, N).sum() / (N * (1.0 - spec.alpha));
    return v;
}

double dr_cvar_upper_bound(
    const std::vector<predict::NormalizedHalfspaceSample>& samples, const Vec& y,
    const RiskSpec& spec) {
    RiskSpec local = spec;
    local.N = static_cast<int>(samples.size());
    local.validate();
    const auto sd = stack_samples(samples);
    const int N = sd.N, m = sd.m;

    DrBlockLayout layout;
    layout.prefix = "dr";
    layout.self_offset = 0;
    layout.y_offset = -1;
    layout.y_fixed = y;
    layout.include_budget = false;
    layout.robust = true;
    auto block = build_dr_constraint_block(samples, local, layout);

    const double inv1ma = 1.0 / (1.0 - local.alpha);
    const double theta = local.theta;
    const int z_off = block.z_offset, l_off = block.lambda_offset,
              s_off = block.s_offset;
    // The 1e-8 proximal term breaks ties within the continuum of equivalent
    // block optima; it moves the reported bound by far less than the working
    // tolerance.
    nlp::Objective obj;
    obj.value = [=](const Vec& x) {
        return x(z_off) +
               inv1ma * (theta * x(l_off) + x.segment(s_off, N).sum() / N) +
               1e-8 * x.squaredNorm();
    };
    obj.gradient = [=](const Vec& x, Vec& g) {
        g = Vec::Zero(x.size());
        g(z_off) = 1.0;
        g(l_off) = inv1ma * theta;
        g.segment(s_off, N).array() = inv1ma / N;
        g += 2e-8 * x;
    };
    obj.hessian = [=](const Vec& x, std::vector<nlp::Triplet>& h) {
        for (int j = 0; j < x.size(); ++j) h.emplace_back(j, j, 2e-8);
    };

    nlp::NLProblem problem =
        nlp::assemble(block.variables, block.constraints, obj);

    // Three deterministic starts: SAA-optimal, uniform rho, and a blend.
    std::vector<Vec> starts;
    {
        Vec x0 = problem.initial_point();
        init_dr_block_point(samples, local, layout, y, x0);
        starts.push_back(x0);
    }
    {
        Vec x0 = Vec::Zero(problem.num_vars());
        const Vec a = sd.c * y + sd.d;
        double zmax = 0.0;
        for (int i = 0; i < N; ++i)
            zmax = std::max(zmax, a.segment(i * m, m).mean());
        x0(z_off) = std::max(0.0, zmax);
        for (int i = 0; i < N; ++i) {
            x0.segment(block.rho_offset + i * m, m).array() = 1.0 / m;
            x0(s_off + i) =
                std::max({0.0, -x0(z_off), a.segment(i * m, m).mean() - x0(z_off)});
        }
        const double C = y.squaredNorm() + y.size();
        x0(l_off) = std::sqrt(C / m) * (1.0 + 1e-9) + 1e-12;
        starts.push_back(x0);
    }
    {
        Vec x0 = 0.5 * (starts[0] + starts[1]);
        const double C = y.squaredNorm() + y.size();
        double max_norm = 0.0;
        for (int i = 0; i < N; ++i)
            max_norm =
                std::max(max_norm, x0.segment(block.rho_offset + i * m, m).norm());
        x0(l_off) = std::sqrt(C) * max_norm * (1.0 + 1e-9) + 1e-12;
        const Vec a = sd.c * y + sd.d;
        for (int i = 0; i < N; ++i)
            x0(s_off + i) = std::max(
                {0.0, -x0(z_off),
                 x0.segment(block.rho_offset + i * m, m).dot(a.segment(i * m, m)) -
                     x0(z_off)});
        starts.push_back(x0);
    }

    nlp::SolveOptions opts;
    opts.tol = 1e-7;
    opts.feas_tol = 1e-9;
    opts.max_iter = 400;
    double best = std::numeric_limits<double>::infinity();
    nlp::SolveStatus last_status = nlp::SolveStatus::NumericFailure;
    for (const auto& x0 : starts) {
        problem.set_initial_point(x0);
        const auto sol = nlp::solve_local(problem, opts);
        last_status = sol.status;
        if (sol.status == nlp::SolveStatus::OptimalLocal)
            best = std::min(best, sol.objective_value);
    }
    if (!std::isfinite(best))
        throw NumericError(std::string("dr_cvar_upper_bound: no start converged (") +
                           nlp::to_string(last_status) + ")");
    return best;
}

} // namespace drmpc::risk
