#include "drmpc/predict.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

#include "drmpc/rng.hpp"

namespace drmpc::predict {

Mat make_psd(const Mat& cov) {
    Mat sym = 0.5 * (cov + cov.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> eig(sym);
    const Vec& vals = eig.eigenvalues();
    if (vals.minCoeff() >= 0.0) return sym;
    if (vals.minCoeff() < -1e-10) {
        std::ostringstream msg;
        msg << "make_psd: eigenvalue " << vals.minCoeff()
            << " below clamping tolerance";
        throw NumericError(msg.str());
    }
    Vec clamped = vals.cwiseMax(0.0);
    return eig.eigenvectors() * clamped.asDiagonal() *
           eig.eigenvectors().transpose();
}

GaussianBelief propagate_one_step(const GaussianBelief& belief,
                                  const gp::GPModel& model, double T_o) {
    Vec mu_v, var_v;
    model.posterior(belief.mean, mu_v, var_v);
    const Mat grad = model.posterior_mean_gradient(belief.mean);

    // Sigma_v tilde = Sigma_v(mu_x) + grad Sigma_x grad'
    Mat sigma_v = Mat(var_v.asDiagonal());
    sigma_v += grad * belief.cov * grad.transpose();
    // Sigma_xv tilde = Sigma_x grad'
    const Mat sigma_xv = belief.cov * grad.transpose();

    GaussianBelief next;
    next.mean = belief.mean + T_o * mu_v;
    next.cov = belief.cov + T_o * T_o * sigma_v +
               T_o * (sigma_xv + sigma_xv.transpose());
    next.cov = make_psd(next.cov);
    return next;
}

std::vector<GaussianBelief> propagate_horizon(const GaussianBelief& belief0,
                                              const gp::GPModel& model, int K,
                                              double T_o) {
    if (K < 1) throw std::invalid_argument("propagate_horizon: K must be >= 1");
    std::vector<GaussianBelief> out;
    out.reserve(K);
    GaussianBelief current = belief0;
    for (int k = 0; k < K; ++k) {
        current = propagate_one_step(current, model, T_o);
        out.push_back(current);
    }
    return out;
}

std::vector<Vec> sample_states(const GaussianBelief& belief, int N,
                               std::uint64_t seed) {
    const int n = static_cast<int>(belief.mean.size());
    Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 *
                                           (belief.cov + belief.cov.transpose()));
    const Vec scale = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Mat factor = eig.eigenvectors() * scale.asDiagonal();

    GaussianStream rng(seed);
    std::vector<Vec> samples;
    samples.reserve(N);
    Vec z(n);
    for (int i = 0; i < N; ++i) {
        for (int d = 0; d < n; ++d) z(d) = rng.gaussian();
        samples.push_back(belief.mean + factor * z);
    }
    return samples;
}

ObstaclePolytope polytope_from_state(const ObstacleGeometry& geom,
                                     const Vec& state) {
    if (state.size() < 3)
        throw std::invalid_argument(
            "polytope_from_state: state needs (x, y, heading)");
    const double theta = state(2);
    const double c = std::cos(theta), s = std::sin(theta);
    const Eigen::Vector2d axis_long(c, s);
    const Eigen::Vector2d axis_lat(-s, c);

    Eigen::Vector2d center(state(0), state(1));
    switch (geom.anchor) {
        case Anchor::Center: break;
        case Anchor::RearAxle: center += 0.5 * geom.half_length * axis_long; break;
        case Anchor::FrontAxle: center -= 0.5 * geom.half_length * axis_long; break;
    }

    ObstaclePolytope poly;
    poly.G.resize(4, 2);
    poly.g.resize(4);
    poly.G.row(0) = axis_long.transpose();
    poly.g(0) = axis_long.dot(center) + geom.half_length;
    poly.G.row(1) = -axis_long.transpose();
    poly.g(1) = -axis_long.dot(center) + geom.half_length;
    poly.G.row(2) = axis_lat.transpose();
    poly.g(2) = axis_lat.dot(center) + geom.half_width;
    poly.G.row(3) = -axis_lat.transpose();
    poly.g(3) = -axis_lat.dot(center) + geom.half_width;
    return poly;
}

double rectangle_clearance(const Vec& p, const Vec& obstacle_state,
                           const ObstacleGeometry& geom) {
    const double c = std::cos(obstacle_state(2)), s = std::sin(obstacle_state(2));
    double cx = obstacle_state(0), cy = obstacle_state(1);
    switch (geom.anchor) {
        case Anchor::Center: break;
        case Anchor::RearAxle:
            cx += 0.5 * geom.half_length * c;
            cy += 0.5 * geom.half_length * s;
            break;
        case Anchor::FrontAxle:
            cx -= 0.5 * geom.half_length * c;
            cy -= 0.5 * geom.half_length * s;
            break;
    }
    const double dx = p(0) - cx, dy = p(1) - cy;
    const double bu = c * dx + s * dy;
    const double bw = -s * dx + c * dy;
    const double du = std::abs(bu) - geom.half_length;
    const double dw = std::abs(bw) - geom.half_width;
    if (du > 0.0 || dw > 0.0)
        return std::hypot(std::max(du, 0.0), std::max(dw, 0.0));
    return std::max(du, dw);  // negative: interior depth to the nearest face
}

NormalizedHalfspaceSample normalized_halfspaces(const ObstaclePolytope& poly) {
    const int m = static_cast<int>(poly.G.rows());
    NormalizedHalfspaceSample out;
    out.c.resize(m, poly.G.cols());
    out.d.resize(m);
    for (int j = 0; j < m; ++j) {
        const double norm = poly.G.row(j).norm();
        if (norm <= 0.0)
            throw std::invalid_argument("normalized_halfspaces: zero-norm row");
        out.c.row(j) = -poly.G.row(j) / norm;
        out.d(j) = poly.g(j) / norm;
    }
    return out;
}

} // namespace drmpc::predict
