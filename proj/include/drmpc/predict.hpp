#pragma once

#include <cstdint>
#include <vector>

#include "drmpc/gp.hpp"
#include "drmpc/types.hpp"

namespace drmpc::predict {

/// Gaussian belief over the obstacle state. The covariance is kept symmetric
/// PSD: after every update it is re-symmetrized and eigenvalues in
/// [-1e-10, 0) are clamped to zero; anything more negative raises NumericError.
struct GaussianBelief {
    Vec mean;
    Mat cov;
};

enum class Anchor { Center, RearAxle, FrontAxle };

/// Rectangle footprint of an obstacle. `anchor` names the reference point the
/// state encodes; axle anchors sit half_length/2 behind/ahead of the center.
struct ObstacleGeometry {
    double half_length = 1.0;
    double half_width = 0.5;
    Anchor anchor = Anchor::Center;
};

/// Half-space description {x : G x <= g} of the occupied region.
struct ObstaclePolytope {
    Mat G;  // m x n_y
    Vec g;  // m
};

/// Unit-row half-space parameters with the sign flipped so that
/// dist(y, safe region) = (min_j c_j . y + d_j)^+ holds identically.
struct NormalizedHalfspaceSample {
    Mat c;  // m x n_y, unit rows
    Vec d;  // m
};

/// Symmetrize and clamp small negative eigenvalues of a covariance.
/// Throws NumericError if an eigenvalue is below -1e-10.
Mat make_psd(const Mat& cov);

/// One application of the first-order moment propagation followed by the
/// Euler state update, over the observation interval T_o.
GaussianBelief propagate_one_step(const GaussianBelief& belief,
                                  const gp::GPModel& model, double T_o);

/// K successive propagation steps; entry k-1 holds the belief after k steps.
std::vector<GaussianBelief> propagate_horizon(const GaussianBelief& belief0,
                                              const gp::GPModel& model, int K,
                                              double T_o);

/// N i.i.d. Gaussian samples through an eigendecomposition factor of the
/// covariance (valid for rank-deficient covariances). Deterministic per seed.
std::vector<Vec> sample_states(const GaussianBelief& belief, int N,
                               std::uint64_t seed);

/// Rectangle half-spaces for a state carrying (x, y, heading).
ObstaclePolytope polytope_from_state(const ObstacleGeometry& geom,
                                     const Vec& state);

/// c_j = -G_j/||G_j||, d_j = g_j/||G_j||. Zero-norm rows are rejected.
NormalizedHalfspaceSample normalized_halfspaces(const ObstaclePolytope& poly);

/// Signed Euclidean clearance to a rectangle footprint: positive outside,
/// negative interior depth inside.
double rectangle_clearance(const Vec& p, const Vec& obstacle_state,
                           const ObstacleGeometry& geom);

} // namespace drmpc::predict
