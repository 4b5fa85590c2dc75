#pragma once

#include "lscbo/numkit.hpp"

#include <optional>
#include <span>

namespace lscbo::surrogate {

using numkit::Index;
using numkit::Matrix;
using numkit::Rng;
using numkit::Vector;

/// Box on the hyperparameters; lengthscales live on the unit-cube input scale.
struct HyperparamBounds {
    static constexpr double kMinLengthscale = 5e-3;
    static constexpr double kMaxLengthscale = 2.0;
    static constexpr double kMinSignalVariance = 0.05;
    static constexpr double kMaxSignalVariance = 20.0;
    static constexpr double kMinJitter = 1e-8;
    static constexpr double kMaxJitter = 1e-2;
};

struct GPHyperparams {
    Vector lengthscales;
    double signal_variance = 1.0;
    double noise_jitter = 1e-6;

    Index dim() const { return lengthscales.size(); }

    /// Layout: log lengthscales, log signal variance, log jitter.
    Vector to_log() const;
    static GPHyperparams from_log(const Vector& theta);
    static GPHyperparams defaults(Index dim);
    bool within_bounds() const;
};

/// ARD squared-exponential kernel s^2 exp(-1/2 sum ((x_i - x'_i)/l_i)^2).
double kernel_eval(const GPHyperparams& h, const Vector& x, const Vector& x_prime);

/// Cross-kernel matrix; points are rows of `a` and `b`.
Matrix kernel_matrix(const GPHyperparams& h, const Matrix& a, const Matrix& b);
/// Symmetric kernel matrix on the rows of `x` (signal part only, no jitter).
Matrix kernel_matrix(const GPHyperparams& h, const Matrix& x);

struct LogMarginalLikelihood {
    double value = 0.0;
    Vector gradient;  // w.r.t. GPHyperparams::to_log() coordinates
};

/// GP log evidence of targets `y` at inputs `x` with K = kernel + jitter I, and its analytic gradient.
LogMarginalLikelihood log_marginal_likelihood(const GPHyperparams& h, const Matrix& x, const Vector& y);

struct FitOptions {
    int restarts = 8;
    int max_iterations = 200;
    /// First starting point when set (clamped into the bounds); otherwise the prior default
    /// starts. Remaining starts are drawn log-uniformly within the bounds.
    std::optional<GPHyperparams> warm_start;
};

class GPModel {
public:
    /// Conditions a GP with fixed hyperparameters on raw targets (standardized internally).
    static GPModel condition(GPHyperparams hyperparams, Matrix train_inputs, const Vector& raw_targets);

    const GPHyperparams& hyperparams() const { return hyperparams_; }
    const Matrix& train_inputs() const { return train_inputs_; }
    const Vector& train_targets() const { return train_targets_; }
    const numkit::SpdFactorization& factorization() const { return factorization_; }
    const Vector& alpha() const { return alpha_; }
    double target_mean() const { return target_mean_; }
    double target_std() const { return target_std_; }
    /// True when the targets had zero variance and a constant model was fit.
    bool degenerate() const { return degenerate_; }
    double log_likelihood() const { return log_likelihood_; }
    Index dim() const { return train_inputs_.cols(); }
    Index size() const { return train_inputs_.rows(); }

private:
    GPModel() = default;

    GPHyperparams hyperparams_;
    Matrix train_inputs_;
    Vector train_targets_;
    numkit::SpdFactorization factorization_;
    Vector alpha_;
    double target_mean_ = 0.0;
    double target_std_ = 1.0;
    bool degenerate_ = false;
    double log_likelihood_ = 0.0;
};

/// Maximizes the log marginal likelihood by multi-start bounded quasi-Newton in log space.
/// Start 0 is the prior default (l = 0.5, s^2 = 1); the others are log-uniform in the bounds.
GPModel fit(const Matrix& x, const Vector& y, Rng& rng, const FitOptions& options = {});

struct PosteriorSlice {
    Vector mean;
    Vector variance;
    /// Filled only when the full covariance was requested.
    Matrix covariance;
};

PosteriorSlice posterior(const GPModel& model, const Matrix& queries, bool full_cov);

/// `count` joint posterior draws over the query rows, one per column.
Matrix sample_posterior(const GPModel& model, const Matrix& queries, Rng& rng, Index count);
Vector sample_posterior(const GPModel& model, const Matrix& queries, Rng& rng);

double normal_pdf(double z);
double normal_cdf(double z);

/// Closed-form expected improvement below `f_min`; exactly 0 when sigma is 0.
double expected_improvement(double mean, double sigma, double f_min);
Vector expected_improvement(const GPModel& model, const Matrix& queries, double f_min);

/// EI weighted by the posterior probability that every constraint model predicts <= 0.
Vector expected_feasible_improvement(const Vector& ei, std::span<const GPModel> constraint_models,
                                     const Matrix& queries);

}  // namespace lscbo::surrogate
