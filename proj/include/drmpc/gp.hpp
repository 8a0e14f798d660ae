#pragma once

#include <optional>
#include <vector>

#include "drmpc/types.hpp"

namespace drmpc::gp {

/// Hyperparameters of one scalar-output RBF Gaussian process.
/// `length_scales` holds the diagonal of the length-scale matrix: the kernel
/// divides squared coordinate differences by these entries.
struct GPHyperparams {
    Vec length_scales;           // one per input dimension, > 0
    double signal_variance = 1.0;  // > 0
    double noise_variance = 1e-6;  // >= 0
    double prior_mean = 0.0;

    void validate() const;
};

/// Sliding window of (state, velocity) observations shared by all output GPs.
/// Insertion is chronological; exceeding `capacity` evicts the oldest entry.
class GPDataset {
public:
    explicit GPDataset(int capacity = 20) : capacity_(capacity) {}

    void add(const Vec& input, const Vec& output);
    int size() const { return static_cast<int>(inputs_.size()); }
    bool empty() const { return inputs_.empty(); }
    int capacity() const { return capacity_; }

    const std::vector<Vec>& inputs() const { return inputs_; }
    const std::vector<Vec>& outputs() const { return outputs_; }

private:
    int capacity_;
    std::vector<Vec> inputs_;
    std::vector<Vec> outputs_;
};

enum class EmptyWindowPolicy { PriorFallback, Error };

struct GPFitOptions {
    EmptyWindowPolicy empty_window = EmptyWindowPolicy::PriorFallback;
    // Fit on a capacity-sized window of zeros instead of falling back to the
    // prior when the dataset is empty.
    bool zero_fill_window = false;
};

/// RBF kernel value sigma_f^2 * exp(-0.5 * (x-x2)' L^{-1} (x-x2)).
double kernel_rbf(const Vec& x, const Vec& x2, const GPHyperparams& hyper);

/// Fitted multi-output GP: independent scalar GPs over a shared input window.
/// Immutable after fit(); concurrent posterior queries are safe.
class GPModel {
public:
    /// Posterior mean and per-dimension variance at a test input.
    /// Variances are clamped at zero from below.
    void posterior(const Vec& x, Vec& mean, Vec& var) const;

    /// Jacobian of the posterior mean (output dims x input dims).
    Mat posterior_mean_gradient(const Vec& x) const;

    int input_dim() const { return input_dim_; }
    int output_dim() const { return static_cast<int>(per_output_.size()); }
    bool prior_only() const { return prior_only_; }

    /// Jitter actually added to the kernel diagonal of output `j` during fit.
    double jitter(int j) const { return per_output_[j].jitter; }

    friend GPModel fit(const GPDataset&, const std::vector<GPHyperparams>&,
                       const GPFitOptions&);

private:
    struct OutputGP {
        GPHyperparams hyper;
        Eigen::MatrixXd chol_lower;  // L with L L' = K + sigma_eps^2 I + jitter I
        Vec alpha;                   // (K + sigma_eps^2 I)^{-1} (v - m)
        double jitter = 0.0;
    };

    int input_dim_ = 0;
    bool prior_only_ = false;
    std::vector<Vec> train_inputs_;
    std::vector<OutputGP> per_output_;
};

/// Factorizes the kernel matrices and precomputes the solve against centered
/// outputs. One GPHyperparams per output dimension. An empty dataset follows
/// `opts` (prior fallback by default, zero-filled window optionally).
GPModel fit(const GPDataset& dataset, const std::vector<GPHyperparams>& hyper,
            const GPFitOptions& opts = {});

/// Appends an observation, evicting the oldest entry beyond capacity.
/// Returns the updated window (value semantics).
GPDataset update_window(GPDataset dataset, const Vec& obs_state,
                        const Vec& obs_velocity);

} // namespace drmpc::gp
