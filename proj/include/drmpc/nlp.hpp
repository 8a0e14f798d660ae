#pragma once

#include <Eigen/Sparse>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "drmpc/types.hpp"

namespace drmpc::nlp {

using Triplet = Eigen::Triplet<double>;
using SpMat = Eigen::SparseMatrix<double>;

struct VariableBlock {
    std::string name;
    int dim = 0;
    Vec lower;    // box bounds; +-infinity allowed
    Vec upper;
    Vec initial;
};

enum class ConstraintKind { Equality, Inequality };  // inequality: c(x) <= 0

/// A group of smooth constraints sharing one set of callbacks.
/// `jacobian` appends triplets with rows offset by `row0`; `hessian` (optional)
/// appends the lower triangle of sum_i mult(i) * hess(c_i)(x).
struct ConstraintGroup {
    std::string name;
    ConstraintKind kind = ConstraintKind::Inequality;
    int dim = 0;
    std::vector<std::string> depends;  // referenced variable blocks
    std::function<void(const Vec&, Eigen::Ref<Vec>)> eval;
    std::function<void(const Vec&, int row0, std::vector<Triplet>&)> jacobian;
    std::function<void(const Vec&, const Vec&, std::vector<Triplet>&)> hessian;
};

struct Objective {
    std::function<double(const Vec&)> value;
    std::function<void(const Vec&, Vec&)> gradient;
    // optional: lower triangle of the objective Hessian
    std::function<void(const Vec&, std::vector<Triplet>&)> hessian;
};

/// Assembled problem with frozen variable indexing. Blocks are laid out in
/// declaration order; `offset(name)` gives the first index of a block.
class NLProblem {
public:
    int num_vars() const { return n_; }
    int num_eq() const { return m_eq_; }
    int num_ineq() const { return m_ineq_; }
    int offset(const std::string& block) const;
    int block_dim(const std::string& block) const;

    const Vec& lower() const { return lower_; }
    const Vec& upper() const { return upper_; }
    const Vec& initial_point() const { return x0_; }
    void set_initial_point(const Vec& x0);

    const std::vector<ConstraintGroup>& eq_groups() const { return eq_; }
    const std::vector<ConstraintGroup>& ineq_groups() const { return ineq_; }
    const Objective& objective() const { return objective_; }

    void eval_eq(const Vec& x, Vec& out) const;
    void eval_ineq(const Vec& x, Vec& out) const;
    void eval_jac_eq(const Vec& x, std::vector<Triplet>& out) const;
    void eval_jac_ineq(const Vec& x, std::vector<Triplet>& out) const;

    friend NLProblem assemble(std::vector<VariableBlock>,
                              std::vector<ConstraintGroup>, Objective);

private:
    int n_ = 0, m_eq_ = 0, m_ineq_ = 0;
    Vec lower_, upper_, x0_;
    std::vector<std::pair<std::string, std::pair<int, int>>> blocks_;  // name -> (offset, dim)
    std::vector<ConstraintGroup> eq_, ineq_;
    Objective objective_;
};

/// Validates names, dimensions and derivative finiteness at the initial point,
/// then freezes the indexing.
NLProblem assemble(std::vector<VariableBlock> blocks,
                   std::vector<ConstraintGroup> constraints, Objective objective);

enum class SolveStatus { OptimalLocal, Infeasible, MaxIter, NumericFailure };

const char* to_string(SolveStatus s);

struct NLSolution {
    Vec point;
    double objective_value = 0.0;
    SolveStatus status = SolveStatus::NumericFailure;
    double kkt_residual = 0.0;   // max of projected stationarity and complementarity
    double feasibility = 0.0;    // max constraint violation
    int iterations = 0;          // inner Newton iterations
    double wall_time_s = 0.0;
    Vec mult_eq, mult_ineq;      // stacked in group declaration order
    double penalty = 0.0;        // final augmented-Lagrangian penalty
};

struct SolveOptions {
    double tol = 1e-6;
    double feas_tol = 1e-6;
    int max_iter = 200;
    double mu0 = 10.0;
    double mu_max = 1e10;
    int max_inner = 100;         // Newton iterations per outer pass
    bool trace = false;          // per-outer diagnostics on stderr
    // warm start (sizes must match the problem; ignored otherwise)
    Vec warm_mult_eq, warm_mult_ineq;
    double warm_penalty = 0.0;
};

/// Augmented-Lagrangian local solver with a sparse projected-Newton inner
/// loop. Deterministic for fixed inputs. OptimalLocal is reported only after
/// verifying stationarity, feasibility and complementarity on the original
/// problem.
NLSolution solve_local(const NLProblem& problem, const SolveOptions& opts = {});

/// Worst absolute deviation between the analytic gradient/Jacobians and
/// central finite differences (step 1e-6) at `point`.
double check_derivatives(const NLProblem& problem, const Vec& point);

/// Text dump of variables, bounds and constraint values at a point.
void dump(const NLProblem& problem, const Vec& point, std::ostream& os);

} // namespace drmpc::nlp
