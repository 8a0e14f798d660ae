#pragma once

#include <string>
#include <vector>

#include "drmpc/nlp.hpp"
#include "drmpc/predict.hpp"
#include "drmpc/types.hpp"

namespace drmpc::risk {

struct RiskSpec {
    double alpha = 0.95;  // confidence level in (0,1)
    double delta = 0.01;  // risk tolerance >= 0
    double theta = 0.0;   // Wasserstein radius >= 0
    int N = 1;            // sample count >= 1

    void validate() const;
};

/// Euclidean distance from y to the safe region (complement of the polytope
/// interior): min_j (g_j - G_j y)^+ / ||G_j||; zero iff y is outside the open
/// interior.
double distance_to_safe_region(const Vec& y, const predict::ObstaclePolytope& poly);

/// Empirical CVaR by the order-statistic formula; equals the mean at alpha = 0
/// and the maximum as alpha -> 1.
double cvar_empirical(const std::vector<double>& losses, double alpha);

/// CVaR of per-sample losses (min_j c_j.y + d_j)^+ over normalized half-space
/// samples.
double saa_risk(const std::vector<predict::NormalizedHalfspaceSample>& samples,
                const Vec& y, double alpha);

/// Variable blocks and constraint groups realizing the reformulated
/// distributionally robust CVaR bound for one prediction step. Variables are
/// laid out contiguously from `self_offset` as z (1), lambda (1), s (N),
/// rho (N*m). `y_offset` locates the n_y position variables in the host
/// problem; pass y_offset = -1 with `y_fixed` to bind y to a constant
/// (standalone evaluator form).
struct DrConstraintBlock {
    std::vector<nlp::VariableBlock> variables;
    std::vector<nlp::ConstraintGroup> constraints;
    int var_count = 0;
    int constraint_rows = 0;
    int z_offset = 0, lambda_offset = 0, s_offset = 0, rho_offset = 0;
};

struct DrBlockLayout {
    std::string prefix;    // variable/constraint name prefix, e.g. "risk_k3_o0"
    int self_offset = 0;   // global offset of this block's first variable
    int y_offset = -1;     // global offset of the y variables, or -1 if fixed
    Vec y_fixed;           // used when y_offset < 0
    bool include_budget = true;  // emit the budget row (LHS <= delta)
    bool robust = true;          // false: SAA form (no lambda/quad, theta = 0)
    // Positive constant the quadratic rows are divided by to keep their
    // entries O(1); 0 selects ||y||^2 + n_y at y_fixed or the scale hint.
    double quad_row_scale = 0.0;
    Vec y_scale_hint;      // position scale for symbolic-y blocks
};

DrConstraintBlock build_dr_constraint_block(
    const std::vector<predict::NormalizedHalfspaceSample>& samples,
    const RiskSpec& spec, const DrBlockLayout& layout);

/// Feasible initial values for a block's variables given an initial y:
/// z at the empirical VaR, rho uniform over argmin faces, lambda at the
/// smallest feasible value. Writes into x starting at layout.self_offset.
void init_dr_block_point(
    const std::vector<predict::NormalizedHalfspaceSample>& samples,
    const RiskSpec& spec, const DrBlockLayout& layout, const Vec& y, Vec& x);

/// Value of the budget left-hand side z + (theta*lambda + (1/N) sum s)/(1-alpha)
/// at a point holding this block's variables.
double dr_block_lhs(const RiskSpec& spec, const DrConstraintBlock& block,
                    const Vec& x, bool robust = true);

/// Proposition-1 upper bound on the worst-case CVaR for a fixed position:
/// solves the finite reformulation with a local solver from three starts and
/// returns the best verified optimum.
double dr_cvar_upper_bound(
    const std::vector<predict::NormalizedHalfspaceSample>& samples, const Vec& y,
    const RiskSpec& spec);

} // namespace drmpc::risk
