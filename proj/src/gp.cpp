#include "drmpc/gp.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <sstream>

namespace drmpc::gp {

void GPHyperparams::validate() const {
    if (length_scales.size() == 0 || (length_scales.array() <= 0.0).any())
        throw std::invalid_argument("GPHyperparams: length_scales must be positive");
    if (signal_variance <= 0.0)
        throw std::invalid_argument("GPHyperparams: signal_variance must be positive");
    if (noise_variance < 0.0)
        throw std::invalid_argument("GPHyperparams: noise_variance must be nonnegative");
}

void GPDataset::add(const Vec& input, const Vec& output) {
    if (!inputs_.empty()) {
        if (input.size() != inputs_.front().size() ||
            output.size() != outputs_.front().size())
            throw std::invalid_argument("GPDataset::add: dimension mismatch");
    }
    inputs_.push_back(input);
    outputs_.push_back(output);
    if (static_cast<int>(inputs_.size()) > capacity_) {
        inputs_.erase(inputs_.begin());
        outputs_.erase(outputs_.begin());
    }
}

double kernel_rbf(const Vec& x, const Vec& x2, const GPHyperparams& hyper) {
    if (x.size() != x2.size() || x.size() != hyper.length_scales.size())
        throw std::invalid_argument("kernel_rbf: dimension mismatch");
    const Vec d = x - x2;
    const double q = (d.array().square() / hyper.length_scales.array()).sum();
    return hyper.signal_variance * std::exp(-0.5 * q);
}

GPDataset update_window(GPDataset dataset, const Vec& obs_state,
                        const Vec& obs_velocity) {
    dataset.add(obs_state, obs_velocity);
    return dataset;
}

namespace {

// Cholesky with escalating jitter relative to the signal variance.
// Start at 1e-10*sigma_f^2, multiply by 10, give up past 1e-4*sigma_f^2.
void factorize_with_jitter(Mat K, double signal_variance, Mat& lower,
                           double& jitter_used) {
    double jitter = 0.0;
    for (;;) {
        Mat Kj = K;
        if (jitter > 0.0) Kj.diagonal().array() += jitter;
        Eigen::LLT<Mat> llt(Kj);
        if (llt.info() == Eigen::Success) {
            lower = llt.matrixL();
            jitter_used = jitter;
            return;
        }
        if (jitter == 0.0)
            jitter = 1e-10 * signal_variance;
        else
            jitter *= 10.0;
        if (jitter > 1e-4 * signal_variance) {
            std::ostringstream msg;
            msg << "gp::fit: Cholesky failed after max jitter "
                << 1e-4 * signal_variance << " (K diag mean "
                << K.diagonal().mean() << ")";
            throw NumericError(msg.str());
        }
    }
}

} // namespace

GPModel fit(const GPDataset& dataset, const std::vector<GPHyperparams>& hyper,
            const GPFitOptions& opts) {
    if (hyper.empty()) throw std::invalid_argument("gp::fit: no hyperparameters");
    for (const auto& h : hyper) h.validate();

    const int n_in = static_cast<int>(hyper.front().length_scales.size());

    GPDataset effective = dataset;
    if (dataset.empty()) {
        if (opts.zero_fill_window) {
            const int n_out = static_cast<int>(hyper.size());
            for (int i = 0; i < dataset.capacity(); ++i)
                effective.add(Vec::Zero(n_in), Vec::Zero(n_out));
        } else if (opts.empty_window == EmptyWindowPolicy::Error) {
            throw std::invalid_argument("gp::fit: empty dataset");
        } else {
            GPModel model;
            model.input_dim_ = n_in;
            model.prior_only_ = true;
            for (const auto& h : hyper) {
                GPModel::OutputGP out;
                out.hyper = h;
                model.per_output_.push_back(std::move(out));
            }
            return model;
        }
    }

    const int m = effective.size();
    if (effective.inputs().front().size() != n_in)
        throw std::invalid_argument("gp::fit: input dim does not match length_scales");
    if (static_cast<int>(effective.outputs().front().size()) !=
        static_cast<int>(hyper.size()))
        throw std::invalid_argument("gp::fit: output dim does not match hyper count");

    GPModel model;
    model.input_dim_ = n_in;
    model.train_inputs_ = effective.inputs();

    for (std::size_t j = 0; j < hyper.size(); ++j) {
        const auto& h = hyper[j];
        Mat K(m, m);
        for (int a = 0; a < m; ++a) {
            for (int b = 0; b <= a; ++b) {
                const double v = kernel_rbf(effective.inputs()[a],
                                            effective.inputs()[b], h);
                K(a, b) = v;
                K(b, a) = v;
            }
        }
        K.diagonal().array() += h.noise_variance;

        GPModel::OutputGP out;
        out.hyper = h;
        factorize_with_jitter(std::move(K), h.signal_variance, out.chol_lower,
                              out.jitter);

        Vec centered(m);
        for (int a = 0; a < m; ++a)
            centered(a) = effective.outputs()[a](static_cast<int>(j)) - h.prior_mean;
        out.alpha = out.chol_lower.triangularView<Eigen::Lower>().solve(centered);
        out.chol_lower.triangularView<Eigen::Lower>()
            .transpose()
            .solveInPlace(out.alpha);

        model.per_output_.push_back(std::move(out));
    }
    return model;
}

void GPModel::posterior(const Vec& x, Vec& mean, Vec& var) const {
    const int n_out = output_dim();
    mean.resize(n_out);
    var.resize(n_out);
    if (prior_only_) {
        for (int j = 0; j < n_out; ++j) {
            mean(j) = per_output_[j].hyper.prior_mean;
            var(j) = per_output_[j].hyper.signal_variance;
        }
        return;
    }
    const int m = static_cast<int>(train_inputs_.size());
    Vec kstar(m);
    for (int j = 0; j < n_out; ++j) {
        const auto& out = per_output_[j];
        for (int a = 0; a < m; ++a)
            kstar(a) = kernel_rbf(x, train_inputs_[a], out.hyper);
        mean(j) = out.hyper.prior_mean + kstar.dot(out.alpha);
        const Vec w = out.chol_lower.triangularView<Eigen::Lower>().solve(kstar);
        var(j) = std::max(0.0, out.hyper.signal_variance - w.squaredNorm());
    }
}

Mat GPModel::posterior_mean_gradient(const Vec& x) const {
    const int n_out = output_dim();
    Mat jac = Mat::Zero(n_out, input_dim_);
    if (prior_only_) return jac;
    const int m = static_cast<int>(train_inputs_.size());
    for (int j = 0; j < n_out; ++j) {
        const auto& out = per_output_[j];
        for (int a = 0; a < m; ++a) {
            const double k = kernel_rbf(x, train_inputs_[a], out.hyper);
            // d/dx of the RBF kernel: k * (x_a - x) ./ L
            jac.row(j) += out.alpha(a) * k *
                          ((train_inputs_[a] - x).array() /
                           out.hyper.length_scales.array())
                              .matrix()
                              .transpose();
        }
    }
    return jac;
}

} // namespace drmpc::gp
