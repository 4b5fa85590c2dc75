#include "doctest.h"

#include "lscbo/surrogate.hpp"

#include <cmath>
#include <numbers>

using namespace lscbo;
using numkit::Index;
using numkit::Matrix;
using numkit::Vector;
using surrogate::GPHyperparams;

namespace {

Matrix uniform_matrix(numkit::Rng& rng, Index rows, Index cols) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            m(i, j) = unit(rng);
        }
    }
    return m;
}

GPHyperparams random_hyperparams(numkit::Rng& rng, Index d) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    GPHyperparams h;
    h.lengthscales.resize(d);
    for (Index i = 0; i < d; ++i) {
        h.lengthscales(i) = 0.1 + 1.2 * unit(rng);
    }
    h.signal_variance = 0.3 + 3.0 * unit(rng);
    h.noise_jitter = std::pow(10.0, -4.0 + 2.0 * unit(rng));
    return h;
}

Vector sine_targets(const Matrix& x) {
    Vector y(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
        y(i) = std::sin(2.0 * std::numbers::pi * x(i, 0));
    }
    return y;
}

Matrix grid_1d(Index n) {
    Matrix x(n, 1);
    for (Index i = 0; i < n; ++i) {
        x(i, 0) = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    }
    return x;
}

}  // namespace

TEST_CASE("hyperparameter log round trip and defaults") {
    GPHyperparams h;
    h.lengthscales = Vector::LinSpaced(3, 0.1, 0.9);
    h.signal_variance = 2.5;
    h.noise_jitter = 1e-5;
    const GPHyperparams back = GPHyperparams::from_log(h.to_log());
    CHECK((back.lengthscales - h.lengthscales).norm() < 1e-14);
    CHECK(back.signal_variance == doctest::Approx(2.5));
    CHECK(back.noise_jitter == doctest::Approx(1e-5));
    CHECK(GPHyperparams::defaults(4).within_bounds());
    h.lengthscales(0) = 3.0;
    CHECK_FALSE(h.within_bounds());
}

TEST_CASE("kernel examples") {
    GPHyperparams h = GPHyperparams::defaults(3);
    h.signal_variance = 1.7;
    const Vector x = Vector::LinSpaced(3, 0.1, 0.3);
    CHECK(surrogate::kernel_eval(h, x, x) == doctest::Approx(1.7).epsilon(1e-15));

    h.signal_variance = 1.0;
    h.lengthscales = Vector::Ones(3);
    Vector y = x;
    y(0) += std::sqrt(2.0);
    CHECK(surrogate::kernel_eval(h, x, y) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK(surrogate::kernel_eval(h, x, y) == doctest::Approx(0.367879).epsilon(1e-6));

    h.lengthscales(0) = 1e12;
    Vector z = x;
    z(0) = 0.95;
    CHECK(surrogate::kernel_eval(h, x, z) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("kernel matrix is symmetric positive definite after jitter") {
    numkit::Rng rng = numkit::make_rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix x = uniform_matrix(rng, 15, 4);
        const GPHyperparams h = random_hyperparams(rng, 4);
        Matrix k = surrogate::kernel_matrix(h, x);
        CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK((k - surrogate::kernel_matrix(h, x, x)).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(surrogate::kernel_eval(h, x.row(2).transpose(), x.row(7).transpose()) ==
              doctest::Approx(k(2, 7)).epsilon(1e-14));
        k.diagonal().array() += h.noise_jitter;
        CHECK(numkit::sym_eig(k).values.minCoeff() > 0.0);
    }
}

TEST_CASE("log marginal likelihood of a single zero target") {
    GPHyperparams h = GPHyperparams::defaults(2);
    h.signal_variance = 1.0;
    h.noise_jitter = 1e-12;
    const Matrix x = Matrix::Constant(1, 2, 0.5);
    const auto lml = surrogate::log_marginal_likelihood(h, x, Vector::Zero(1));
    CHECK(lml.value == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-9));
}

TEST_CASE("log marginal likelihood gradient matches central differences") {
    numkit::Rng rng = numkit::make_rng(22);
    std::uniform_int_distribution<int> n_dist(2, 12);
    std::uniform_int_distribution<int> d_dist(1, 6);
    for (int trial = 0; trial < 50; ++trial) {
        const Index n = n_dist(rng);
        const Index d = d_dist(rng);
        const Matrix x = uniform_matrix(rng, n, d);
        const Vector y = numkit::standard_normal(rng, n);
        const GPHyperparams h = random_hyperparams(rng, d);
        const auto lml = surrogate::log_marginal_likelihood(h, x, y);
        const Vector theta = h.to_log();
        for (Index k = 0; k < theta.size(); ++k) {
            const double step = 1e-5;
            Vector up = theta, down = theta;
            up(k) += step;
            down(k) -= step;
            const double fd = (surrogate::log_marginal_likelihood(GPHyperparams::from_log(up), x, y).value -
                               surrogate::log_marginal_likelihood(GPHyperparams::from_log(down), x, y).value) /
                              (2.0 * step);
            const double scale = std::max(1e-3, std::abs(fd));
            CHECK(std::abs(lml.gradient(k) - fd) / scale < 1e-4);
        }
    }
}

TEST_CASE("fit interpolates a noise-free sine") {
    const Matrix x = grid_1d(12);
    const Vector y = sine_targets(x);
    numkit::Rng rng = numkit::make_rng(23);
    const surrogate::GPModel model = surrogate::fit(x, y, rng);
    CHECK(model.hyperparams().within_bounds());
    CHECK(model.target_std() > 0.0);
    const auto post = surrogate::posterior(model, x, false);
    CHECK((post.mean - y).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("fit is deterministic for a fixed seed") {
    numkit::Rng data = numkit::make_rng(24);
    const Matrix x = uniform_matrix(data, 20, 3);
    const Vector y = x.rowwise().squaredNorm() + 0.3 * x.col(0).array().sin().matrix();
    numkit::Rng a = numkit::make_rng(7);
    numkit::Rng b = numkit::make_rng(7);
    const auto ma = surrogate::fit(x, y, a);
    const auto mb = surrogate::fit(x, y, b);
    CHECK(ma.hyperparams().to_log() == mb.hyperparams().to_log());
}

TEST_CASE("fit on constant targets gives a constant model") {
    numkit::Rng rng = numkit::make_rng(25);
    const Matrix x = uniform_matrix(rng, 8, 2);
    const Vector y = Vector::Constant(8, 3.25);
    const auto model = surrogate::fit(x, y, rng);
    CHECK(model.degenerate());
    CHECK(model.hyperparams().signal_variance == surrogate::HyperparamBounds::kMinSignalVariance);
    const Matrix q = uniform_matrix(rng, 5, 2);
    const auto post = surrogate::posterior(model, q, false);
    CHECK((post.mean.array() - 3.25).abs().maxCoeff() < 1e-12);
    const auto at_train = surrogate::posterior(model, x, false);
    CHECK(at_train.variance.maxCoeff() < 1e-6);
}

TEST_CASE("posterior at training points and far away") {
    const Matrix x = grid_1d(6);
    const Vector y = 4.0 * sine_targets(x).array() + 1.0;
    GPHyperparams h = GPHyperparams::defaults(1);
    h.lengthscales(0) = 0.2;
    h.signal_variance = 1.3;
    h.noise_jitter = 1e-8;
    const auto model = surrogate::GPModel::condition(h, x, y);
    const auto at_train = surrogate::posterior(model, x, false);
    CHECK((at_train.mean - y).cwiseAbs().maxCoeff() < 1e-4);
    const double s2 = h.signal_variance * model.target_std() * model.target_std();
    CHECK(at_train.variance.maxCoeff() < 1e-4 * s2);

    const Matrix far = Matrix::Constant(1, 1, 50.0);
    const auto post = surrogate::posterior(model, far, false);
    CHECK(post.variance(0) == doctest::Approx(s2).epsilon(1e-10));
    CHECK(post.mean(0) == doctest::Approx(model.target_mean()).epsilon(1e-10));
}

TEST_CASE("posterior covariance is symmetric with nonnegative diagonal") {
    numkit::Rng rng = numkit::make_rng(26);
    const Matrix x = uniform_matrix(rng, 10, 2);
    const Vector y = numkit::standard_normal(rng, 10);
    const auto model = surrogate::GPModel::condition(GPHyperparams::defaults(2), x, y);
    Matrix q(2, 2);
    q << 0.2, 0.8, 0.8, 0.2;
    const auto post = surrogate::posterior(model, q, true);
    CHECK(std::abs(post.covariance(0, 1) - post.covariance(1, 0)) < 1e-12);
    CHECK(post.covariance.diagonal().minCoeff() >= 0.0);
    CHECK((post.covariance.diagonal() - post.variance).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("posterior is invariant under permutation of the training data") {
    numkit::Rng rng = numkit::make_rng(27);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix x = uniform_matrix(rng, 12, 3);
        const Vector y = numkit::standard_normal(rng, 12);
        const GPHyperparams h = random_hyperparams(rng, 3);
        std::vector<Index> perm(12);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Matrix xp(12, 3);
        Vector yp(12);
        for (Index i = 0; i < 12; ++i) {
            xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
            yp(i) = y(perm[static_cast<std::size_t>(i)]);
        }
        const Matrix q = uniform_matrix(rng, 6, 3);
        const auto a = surrogate::posterior(surrogate::GPModel::condition(h, x, y), q, false);
        const auto b = surrogate::posterior(surrogate::GPModel::condition(h, xp, yp), q, false);
        CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((a.variance - b.variance).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("posterior draws at training points equal the mean") {
    const Matrix x = grid_1d(8);
    const Vector y = sine_targets(x);
    GPHyperparams h = GPHyperparams::defaults(1);
    h.lengthscales(0) = 0.15;
    h.noise_jitter = 1e-8;
    const auto model = surrogate::GPModel::condition(h, x, y);
    numkit::Rng rng = numkit::make_rng(28);
    const Vector draw = surrogate::sample_posterior(model, x, rng);
    CHECK((draw - y).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("posterior draws are deterministic per seed") {
    const Matrix x = grid_1d(5);
    const auto model = surrogate::GPModel::condition(GPHyperparams::defaults(1), x, sine_targets(x));
    const Matrix q = grid_1d(9);
    numkit::Rng a = numkit::make_rng(3);
    numkit::Rng b = numkit::make_rng(3);
    CHECK(surrogate::sample_posterior(model, q, a, 2) == surrogate::sample_posterior(model, q, b, 2));
}

TEST_CASE("posterior draw variance and mean match the posterior") {
    const Matrix x = grid_1d(6);
    GPHyperparams h = GPHyperparams::defaults(1);
    h.lengthscales(0) = 0.1;
    const auto model = surrogate::GPModel::condition(h, x, sine_targets(x));
    numkit::Rng rng = numkit::make_rng(29);

    const Matrix far = Matrix::Constant(1, 1, 3.0);
    const Matrix draws = surrogate::sample_posterior(model, far, rng, 10000);
    const double mean = draws.mean();
    const double var = (draws.array() - mean).square().sum() / (draws.size() - 1.0);
    const double expected = surrogate::posterior(model, far, false).variance(0);
    CHECK(std::abs(var - expected) < 0.1 * expected);

    Matrix q(3, 1);
    q << 0.03, 0.5, 0.71;
    const auto post = surrogate::posterior(model, q, false);
    const Matrix many = surrogate::sample_posterior(model, q, rng, 2000);
    for (Index i = 0; i < 3; ++i) {
        const double se = std::sqrt(post.variance(i) / 2000.0);
        CHECK(std::abs(many.row(i).mean() - post.mean(i)) < 5.0 * se + 1e-12);
    }
}

TEST_CASE("expected improvement closed form") {
    CHECK(surrogate::expected_improvement(1.0, 0.0, 5.0) == 0.0);
    CHECK(surrogate::expected_improvement(0.0, 1.0, 0.0) == doctest::Approx(0.398942).epsilon(1e-6));
    CHECK(surrogate::normal_pdf(0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)));
    CHECK(surrogate::normal_cdf(0.0) == 0.5);
    const double sigma = 0.7;
    CHECK(surrogate::expected_improvement(-10.0 * sigma, sigma, 0.0) == doctest::Approx(10.0 * sigma).epsilon(1e-12));
    numkit::Rng rng = numkit::make_rng(30);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int i = 0; i < 1000; ++i) {
        CHECK(surrogate::expected_improvement(u(rng), std::abs(u(rng)), u(rng)) >= 0.0);
    }
}

TEST_CASE("expected feasible improvement") {
    const Matrix x = grid_1d(6);
    const auto objective = surrogate::GPModel::condition(GPHyperparams::defaults(1), x, sine_targets(x));
    const Matrix q = grid_1d(11);
    const Vector ei = surrogate::expected_improvement(objective, q, 0.0);
    CHECK(ei.minCoeff() >= 0.0);

    GPHyperparams tiny = GPHyperparams::defaults(1);
    tiny.noise_jitter = 1e-8;
    const auto certain_ok = surrogate::GPModel::condition(tiny, x, Vector::Constant(6, -50.0));
    const auto certain_bad = surrogate::GPModel::condition(tiny, x, Vector::Constant(6, 50.0));
    std::vector<surrogate::GPModel> ok{certain_ok, certain_ok};
    CHECK((surrogate::expected_feasible_improvement(ei, ok, q) - ei).cwiseAbs().maxCoeff() < 1e-12);
    std::vector<surrogate::GPModel> bad{certain_ok, certain_bad};
    CHECK(surrogate::expected_feasible_improvement(ei, bad, q).cwiseAbs().maxCoeff() < 1e-12);

    // Symmetric targets give a zero posterior mean at the centre of the design.
    Matrix xs(2, 1);
    xs << 0.25, 0.75;
    Vector ys(2);
    ys << -1.0, 1.0;
    const auto half = surrogate::GPModel::condition(GPHyperparams::defaults(1), xs, ys);
    const Matrix centre = Matrix::Constant(1, 1, 0.5);
    const Vector one = Vector::Constant(1, 0.8);
    std::vector<surrogate::GPModel> single{half};
    CHECK(surrogate::expected_feasible_improvement(one, single, centre)(0) == doctest::Approx(0.4).epsilon(1e-12));

    numkit::Rng rng = numkit::make_rng(31);
    const Vector c = numkit::standard_normal(rng, 6);
    std::vector<surrogate::GPModel> random{surrogate::GPModel::condition(GPHyperparams::defaults(1), x, c)};
    const Vector efi = surrogate::expected_feasible_improvement(ei, random, q);
    CHECK(((efi - ei).array() <= 0.0).all());
}
