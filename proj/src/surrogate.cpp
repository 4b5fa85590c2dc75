#include "lscbo/surrogate.hpp"

#include "lscbo/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace lscbo::surrogate {

namespace {

constexpr double kDefaultLengthscale = 0.5;
constexpr double kSampleJitter = 1e-8;

Vector log_lower_bounds(Index dim) {
    Vector lo(dim + 2);
    lo.head(dim).setConstant(std::log(HyperparamBounds::kMinLengthscale));
    lo(dim) = std::log(HyperparamBounds::kMinSignalVariance);
    lo(dim + 1) = std::log(HyperparamBounds::kMinJitter);
    return lo;
}

Vector log_upper_bounds(Index dim) {
    Vector hi(dim + 2);
    hi.head(dim).setConstant(std::log(HyperparamBounds::kMaxLengthscale));
    hi(dim) = std::log(HyperparamBounds::kMaxSignalVariance);
    hi(dim + 1) = std::log(HyperparamBounds::kMaxJitter);
    return hi;
}

}  // namespace

Vector GPHyperparams::to_log() const {
    const Index d = dim();
    Vector theta(d + 2);
    theta.head(d) = lengthscales.array().log();
    theta(d) = std::log(signal_variance);
    theta(d + 1) = std::log(noise_jitter);
    return theta;
}

GPHyperparams GPHyperparams::from_log(const Vector& theta) {
    const Index d = theta.size() - 2;
    GPHyperparams h;
    h.lengthscales = theta.head(d).array().exp();
    h.signal_variance = std::exp(theta(d));
    h.noise_jitter = std::exp(theta(d + 1));
    return h;
}

GPHyperparams GPHyperparams::defaults(Index dim) {
    GPHyperparams h;
    h.lengthscales = Vector::Constant(dim, kDefaultLengthscale);
    return h;
}

bool GPHyperparams::within_bounds() const {
    constexpr double slack = 1e-12;
    const bool ls_ok = (lengthscales.array() >= HyperparamBounds::kMinLengthscale * (1 - slack)).all() &&
                       (lengthscales.array() <= HyperparamBounds::kMaxLengthscale * (1 + slack)).all();
    return ls_ok && signal_variance >= HyperparamBounds::kMinSignalVariance * (1 - slack) &&
           signal_variance <= HyperparamBounds::kMaxSignalVariance * (1 + slack) &&
           noise_jitter >= HyperparamBounds::kMinJitter * (1 - slack) &&
           noise_jitter <= HyperparamBounds::kMaxJitter * (1 + slack);
}

double kernel_eval(const GPHyperparams& h, const Vector& x, const Vector& x_prime) {
    const double r2 = ((x - x_prime).array() / h.lengthscales.array()).square().sum();
    return h.signal_variance * std::exp(-0.5 * r2);
}

Matrix kernel_matrix(const GPHyperparams& h, const Matrix& a, const Matrix& b) {
    const Vector inv_l = h.lengthscales.cwiseInverse();
    const Matrix sa = a * inv_l.asDiagonal();
    const Matrix sb = b * inv_l.asDiagonal();
    Matrix k(a.rows(), b.rows());
    for (Index j = 0; j < b.rows(); ++j) {
        for (Index i = 0; i < a.rows(); ++i) {
            const double r2 = (sa.row(i) - sb.row(j)).squaredNorm();
            k(i, j) = h.signal_variance * std::exp(-0.5 * r2);
        }
    }
    return k;
}

Matrix kernel_matrix(const GPHyperparams& h, const Matrix& x) {
    const Vector inv_l = h.lengthscales.cwiseInverse();
    const Matrix sx = x * inv_l.asDiagonal();
    const Index n = x.rows();
    Matrix k(n, n);
    for (Index j = 0; j < n; ++j) {
        k(j, j) = h.signal_variance;
        for (Index i = j + 1; i < n; ++i) {
            const double r2 = (sx.row(i) - sx.row(j)).squaredNorm();
            k(i, j) = k(j, i) = h.signal_variance * std::exp(-0.5 * r2);
        }
    }
    return k;
}

LogMarginalLikelihood log_marginal_likelihood(const GPHyperparams& h, const Matrix& x, const Vector& y) {
    const Index n = x.rows();
    const Index d = x.cols();
    if (n < 1 || y.size() != n || h.dim() != d) {
        throw std::invalid_argument("log_marginal_likelihood: inconsistent shapes");
    }
    const Matrix kf = kernel_matrix(h, x);
    Matrix k = kf;
    k.diagonal().array() += h.noise_jitter;
    const numkit::SpdFactorization fac = numkit::cholesky(k);
    const Vector alpha = fac.solve(y);

    LogMarginalLikelihood out;
    out.value = -0.5 * y.dot(alpha) - 0.5 * fac.log_det() -
                0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

    // dL/dtheta = 1/2 tr((alpha alpha^T - K^{-1}) dK/dtheta)
    Matrix w = alpha * alpha.transpose() - fac.inverse();
    const Matrix m = w.cwiseProduct(kf);
    const Vector row_sums = m.rowwise().sum();
    const Matrix mx = m * x;
    out.gradient.resize(d + 2);
    for (Index j = 0; j < d; ++j) {
        const double l = h.lengthscales(j);
        const double quad = (x.col(j).array().square() * row_sums.array()).sum() - x.col(j).dot(mx.col(j));
        out.gradient(j) = quad / (l * l);
    }
    out.gradient(d) = 0.5 * m.sum();
    out.gradient(d + 1) = 0.5 * h.noise_jitter * w.trace();
    return out;
}

GPModel GPModel::condition(GPHyperparams hyperparams, Matrix train_inputs, const Vector& raw_targets) {
    if (train_inputs.rows() != raw_targets.size() || train_inputs.rows() < 1) {
        throw std::invalid_argument("GPModel::condition: inconsistent training data");
    }
    GPModel model;
    const double n = static_cast<double>(raw_targets.size());
    model.target_mean_ = raw_targets.mean();
    const double var = (raw_targets.array() - model.target_mean_).square().sum() / n;
    const double std_dev = std::sqrt(var);
    const double scale = std::max(1.0, std::abs(model.target_mean_));
    if (!(std_dev > 1e-12 * scale)) {
        model.degenerate_ = true;
        model.target_std_ = 1.0;
        model.train_targets_ = Vector::Zero(raw_targets.size());
    } else {
        model.target_std_ = std_dev;
        model.train_targets_ = (raw_targets.array() - model.target_mean_) / std_dev;
    }
    model.hyperparams_ = std::move(hyperparams);
    model.train_inputs_ = std::move(train_inputs);

    Matrix k = kernel_matrix(model.hyperparams_, model.train_inputs_);
    k.diagonal().array() += model.hyperparams_.noise_jitter;
    model.factorization_ = numkit::cholesky(k);
    model.alpha_ = model.factorization_.solve(model.train_targets_);
    model.log_likelihood_ = -0.5 * model.train_targets_.dot(model.alpha_) - 0.5 * model.factorization_.log_det() -
                            0.5 * n * std::log(2.0 * std::numbers::pi);
    return model;
}

GPModel fit(const Matrix& x, const Vector& y, Rng& rng, const FitOptions& options) {
    const Index d = x.cols();
    GPModel probe = GPModel::condition(GPHyperparams::defaults(d), x, y);
    if (probe.degenerate()) {
        GPHyperparams h = GPHyperparams::defaults(d);
        h.signal_variance = HyperparamBounds::kMinSignalVariance;
        h.noise_jitter = HyperparamBounds::kMinJitter;
        return GPModel::condition(std::move(h), x, y);
    }
    const Vector& targets = probe.train_targets();

    const Vector lo = log_lower_bounds(d);
    const Vector hi = log_upper_bounds(d);
    std::vector<Vector> starts;
    if (options.warm_start && options.warm_start->dim() == d) {
        starts.push_back(options.warm_start->to_log().cwiseMax(lo).cwiseMin(hi));
    } else {
        starts.push_back(GPHyperparams::defaults(d).to_log());
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (static_cast<int>(starts.size()) < std::max(1, options.restarts)) {
        Vector theta(d + 2);
        for (Index i = 0; i < theta.size(); ++i) {
            theta(i) = lo(i) + (hi(i) - lo(i)) * unit(rng);
        }
        starts.push_back(std::move(theta));
    }

    const numkit::GradientObjective negative_lml = [&](const Vector& theta, Vector& grad) {
        try {
            LogMarginalLikelihood lml = log_marginal_likelihood(GPHyperparams::from_log(theta), x, targets);
            if (!std::isfinite(lml.value) || !lml.gradient.allFinite()) {
                return std::numeric_limits<double>::infinity();
            }
            grad = -lml.gradient;
            return -lml.value;
        } catch (const NotPositiveDefinite&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    double best_value = std::numeric_limits<double>::infinity();
    Vector best_theta = starts.front();
    for (const Vector& start : starts) {
        const numkit::BoxMinimum result = numkit::minimize_box(negative_lml, start, lo, hi, options.max_iterations);
        if (result.value < best_value) {
            best_value = result.value;
            best_theta = result.x;
        }
    }
    return GPModel::condition(GPHyperparams::from_log(best_theta), x, y);
}

PosteriorSlice posterior(const GPModel& model, const Matrix& queries, bool full_cov) {
    const GPHyperparams& h = model.hyperparams();
    const Matrix cross = kernel_matrix(h, queries, model.train_inputs());  // M x N
    const Matrix v = model.factorization().solve_lower(cross.transpose());  // N x M
    const double scale2 = model.target_std() * model.target_std();

    PosteriorSlice out;
    out.mean = (cross * model.alpha()).array() * model.target_std() + model.target_mean();
    Vector var_std = (h.signal_variance - v.colwise().squaredNorm().transpose().array()).cwiseMax(0.0);
    out.variance = var_std * scale2;
    if (full_cov) {
        Matrix cov = kernel_matrix(h, queries);
        cov.noalias() -= v.transpose() * v;
        cov = 0.5 * (cov + cov.transpose());
        cov.diagonal() = var_std;
        out.covariance = cov * scale2;
    }
    return out;
}

Matrix sample_posterior(const GPModel& model, const Matrix& queries, Rng& rng, Index count) {
    const GPHyperparams& h = model.hyperparams();
    const Matrix cross = kernel_matrix(h, queries, model.train_inputs());
    const Matrix v = model.factorization().solve_lower(cross.transpose());
    Matrix cov = kernel_matrix(h, queries);
    cov.selfadjointView<Eigen::Lower>().rankUpdate(v.transpose(), -1.0);
    cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
    cov.diagonal() = cov.diagonal().cwiseMax(0.0);
    cov.diagonal().array() += kSampleJitter;
    const numkit::SpdFactorization fac = numkit::cholesky(cov);

    const Vector mean = (cross * model.alpha()).array() * model.target_std() + model.target_mean();
    Matrix z(queries.rows(), count);
    for (Index c = 0; c < count; ++c) {
        z.col(c) = numkit::standard_normal(rng, queries.rows());
    }
    Matrix draws = fac.lower.triangularView<Eigen::Lower>() * z;
    draws *= model.target_std();
    draws.colwise() += mean;
    return draws;
}

Vector sample_posterior(const GPModel& model, const Matrix& queries, Rng& rng) {
    return sample_posterior(model, queries, rng, 1).col(0);
}

double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double expected_improvement(double mean, double sigma, double f_min) {
    if (sigma == 0.0) {
        return 0.0;
    }
    const double gap = f_min - mean;
    const double z = gap / sigma;
    return std::max(0.0, gap * normal_cdf(z) + sigma * normal_pdf(z));
}

Vector expected_improvement(const GPModel& model, const Matrix& queries, double f_min) {
    if (!std::isfinite(f_min)) {
        throw std::invalid_argument("expected_improvement: f_min must be finite");
    }
    const PosteriorSlice post = posterior(model, queries, false);
    Vector ei(queries.rows());
    for (Index i = 0; i < ei.size(); ++i) {
        ei(i) = expected_improvement(post.mean(i), std::sqrt(post.variance(i)), f_min);
    }
    return ei;
}

Vector expected_feasible_improvement(const Vector& ei, std::span<const GPModel> constraint_models,
                                     const Matrix& queries) {
    Vector efi = ei;
    for (const GPModel& model : constraint_models) {
        const PosteriorSlice post = posterior(model, queries, false);
        for (Index i = 0; i < efi.size(); ++i) {
            const double sigma = std::sqrt(post.variance(i));
            const double prob = sigma > 0.0 ? normal_cdf(-post.mean(i) / sigma) : (post.mean(i) <= 0.0 ? 1.0 : 0.0);
            efi(i) *= prob;
        }
    }
    return efi;
}

}  // namespace lscbo::surrogate
