#include "doctest.h"

#include "lscbo/errors.hpp"
#include "lscbo/numkit.hpp"

#include <cmath>
#include <numeric>

using namespace lscbo;
using numkit::Matrix;
using numkit::Vector;

namespace {

Matrix random_matrix(numkit::Rng& rng, int rows, int cols) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            m(i, j) = normal(rng);
        }
    }
    return m;
}

double relative_error(const Matrix& a, const Matrix& b) {
    return (a - b).norm() / std::max(1e-300, b.norm());
}

void check_orthonormal_columns(const Matrix& q, double tol) {
    const Matrix gram = q.transpose() * q;
    CHECK((gram - Matrix::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff() < tol);
}

}  // namespace

TEST_CASE("cholesky of the identity is the identity") {
    const auto f = numkit::cholesky(Matrix::Identity(3, 3));
    CHECK((f.lower - Matrix::Identity(3, 3)).norm() == 0.0);
    CHECK(f.jitter == 0.0);
}

TEST_CASE("cholesky of a 2x2 example") {
    Matrix a(2, 2);
    a << 4, 2, 2, 3;
    const auto f = numkit::cholesky(a);
    CHECK(f.lower(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(f.lower(0, 1) == 0.0);
    CHECK(f.lower(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(f.lower(1, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("cholesky rejects an indefinite matrix") {
    Matrix a(2, 2);
    a << 1, 2, 2, 1;
    CHECK_THROWS_AS(numkit::cholesky(a), NotPositiveDefinite);
    CHECK_THROWS_AS(numkit::cholesky(a, 0), NotPositiveDefinite);
}

TEST_CASE("cholesky rejects asymmetric input") {
    Matrix a(2, 2);
    a << 2, 1, 0, 2;
    CHECK_THROWS_AS(numkit::cholesky(a), std::invalid_argument);
}

TEST_CASE("cholesky jitter rescues a singular PSD matrix") {
    const Vector v = Vector::LinSpaced(4, 1.0, 4.0);
    const Matrix a = v * v.transpose();
    const auto f = numkit::cholesky(a);
    CHECK(f.jitter > 0.0);
    CHECK(f.jitter <= 1e-7 * a.trace() / 4.0 * (1.0 + 1e-12));
    CHECK(relative_error(f.lower * f.lower.transpose(), a) < 1e-6);
    CHECK_THROWS_AS(numkit::cholesky(a, 0), NotPositiveDefinite);
}

TEST_CASE("cholesky reconstructs random SPD matrices") {
    numkit::Rng rng = numkit::make_rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix b = random_matrix(rng, 5, 5);
        const Matrix a = b * b.transpose() + 0.1 * Matrix::Identity(5, 5);
        const auto f = numkit::cholesky(a);
        CHECK(relative_error(f.lower * f.lower.transpose(), a) < 1e-10);
        CHECK(f.lower.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().norm() == 0.0);
        const Vector rhs = random_matrix(rng, 5, 1);
        CHECK(relative_error(a * f.solve(rhs), rhs) < 1e-10);
        CHECK(relative_error(f.inverse() * a, Matrix::Identity(5, 5)) < 1e-10);
        CHECK(f.log_det() == doctest::Approx(std::log(a.determinant())).epsilon(1e-10));
    }
}

TEST_CASE("svd of a diagonal matrix") {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = 3.0;
    a(1, 1) = 1.0;
    const auto s = numkit::svd(a);
    CHECK(s.s(0) == doctest::Approx(3.0));
    CHECK(s.s(1) == doctest::Approx(1.0));

    a(0, 0) = 1.0;
    a(1, 1) = 3.0;
    const auto t = numkit::svd(a);
    CHECK(t.s(0) == doctest::Approx(3.0));
    CHECK(std::abs(t.v(1, 0)) == doctest::Approx(1.0));
}

TEST_CASE("svd of a rank one 3x2 matrix") {
    Matrix a(3, 2);
    a << 1, 0, 0, 0, -1, 0;
    const auto s = numkit::svd(a);
    REQUIRE(s.s.size() == 2);
    CHECK(s.s(0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    CHECK(std::abs(s.s(1)) < 1e-15);
    check_orthonormal_columns(s.u, 1e-12);
    check_orthonormal_columns(s.v, 1e-12);
}

TEST_CASE("svd of the zero matrix") {
    const auto s = numkit::svd(Matrix::Zero(4, 3));
    CHECK(s.s.size() == 3);
    CHECK(s.s.cwiseAbs().maxCoeff() == 0.0);
    check_orthonormal_columns(s.u, 1e-12);
    check_orthonormal_columns(s.v, 1e-12);
}

TEST_CASE("svd reconstructs random matrices in both orientations") {
    numkit::Rng rng = numkit::make_rng(12);
    for (int trial = 0; trial < 30; ++trial) {
        for (const auto [r, c] : {std::pair{20, 8}, std::pair{8, 20}, std::pair{7, 7}}) {
            const Matrix a = random_matrix(rng, r, c);
            const auto s = numkit::svd(a);
            CHECK(s.s.size() == std::min(r, c));
            CHECK(relative_error(s.u * s.s.asDiagonal() * s.v.transpose(), a) < 1e-10);
            check_orthonormal_columns(s.u, 1e-10);
            check_orthonormal_columns(s.v, 1e-10);
            for (int i = 1; i < s.s.size(); ++i) {
                CHECK(s.s(i) <= s.s(i - 1));
            }
        }
    }
}

TEST_CASE("svd agrees with the eigenvalues of the Gram matrix") {
    numkit::Rng rng = numkit::make_rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix a = random_matrix(rng, 15, 6);
        const auto s = numkit::svd(a);
        const auto e = numkit::sym_eig(a.transpose() * a);
        for (int i = 0; i < 6; ++i) {
            CHECK(std::abs(e.values(i) - s.s(i) * s.s(i)) < 1e-8 * std::max(1.0, e.values(0)));
        }
    }
}

TEST_CASE("sym_eig examples") {
    const auto id = numkit::sym_eig(Matrix::Identity(4, 4));
    CHECK((id.values.array() - 1.0).abs().maxCoeff() < 1e-14);

    Matrix a(2, 2);
    a << 2, 1, 1, 2;
    const auto e = numkit::sym_eig(a);
    CHECK(e.values(0) == doctest::Approx(3.0));
    CHECK(e.values(1) == doctest::Approx(1.0));

    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 5.0;
    d(1, 1) = -1.0;
    const auto f = numkit::sym_eig(d);
    CHECK(f.values(0) == doctest::Approx(5.0));
    CHECK(f.values(1) == doctest::Approx(-1.0));
}

TEST_CASE("sym_eig satisfies the eigen equation") {
    numkit::Rng rng = numkit::make_rng(14);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix b = random_matrix(rng, 9, 9);
        const Matrix a = b + b.transpose();
        const auto e = numkit::sym_eig(a);
        for (int i = 0; i < 9; ++i) {
            CHECK((a * e.vectors.col(i) - e.values(i) * e.vectors.col(i)).norm() < 1e-8);
        }
        check_orthonormal_columns(e.vectors, 1e-10);
    }
}

TEST_CASE("descending order keeps ties in index order") {
    Vector v(6);
    v << 1, 3, 2, 3, 1, 5;
    const auto order = numkit::descending_order(v);
    CHECK(order == std::vector<numkit::Index>{5, 1, 3, 2, 0, 4});
}

TEST_CASE("standard_normal is deterministic and centered") {
    numkit::Rng a = numkit::make_rng(5);
    numkit::Rng b = numkit::make_rng(5);
    CHECK(numkit::standard_normal(a, 4) == numkit::standard_normal(b, 4));
    CHECK(numkit::standard_normal(a, 0).size() == 0);
    numkit::Rng c = numkit::make_rng(6);
    const Vector z = numkit::standard_normal(c, 100000);
    CHECK(std::abs(z.mean()) < 0.02);
    CHECK(std::abs((z.array() - z.mean()).square().mean() - 1.0) < 0.03);
}

TEST_CASE("independent streams differ") {
    numkit::Rng a = numkit::make_rng(5, 0);
    numkit::Rng b = numkit::make_rng(5, 1);
    CHECK(a() != b());
}

TEST_CASE("minimize_box finds an interior minimum") {
    Vector target(3);
    target << 0.3, -0.2, 0.5;
    const numkit::GradientObjective quad = [&](const Vector& x, Vector& g) {
        g = 2.0 * (x - target);
        return (x - target).squaredNorm();
    };
    const auto r = numkit::minimize_box(quad, Vector::Zero(3), Vector::Constant(3, -1.0), Vector::Constant(3, 1.0), 200);
    CHECK(r.converged);
    CHECK((r.x - target).norm() < 1e-5);
}

TEST_CASE("minimize_box respects the bounds") {
    const numkit::GradientObjective rosen = [](const Vector& x, Vector& g) {
        const double a = 1.0 - x(0);
        const double b = x(1) - x(0) * x(0);
        g.resize(2);
        g(0) = -2.0 * a - 400.0 * x(0) * b;
        g(1) = 200.0 * b;
        return a * a + 100.0 * b * b;
    };
    Vector lo(2), hi(2);
    lo << -2.0, -2.0;
    hi << 0.5, 2.0;
    Vector start(2);
    start << -1.5, 1.5;
    const auto r = numkit::minimize_box(rosen, start, lo, hi, 500);
    CHECK(r.x(0) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(r.x(1) == doctest::Approx(0.25).epsilon(1e-3));
    CHECK((r.x.array() >= lo.array()).all());
    CHECK((r.x.array() <= hi.array()).all());
}

TEST_CASE("minimize_box backs off from infinite trial values") {
    const numkit::GradientObjective barrier = [](const Vector& x, Vector& g) {
        if (x(0) <= 0.0) {
            return std::numeric_limits<double>::infinity();
        }
        g.resize(1);
        g(0) = 1.0 - 1.0 / x(0);
        return x(0) - std::log(x(0));
    };
    const auto r = numkit::minimize_box(barrier, Vector::Constant(1, 3.0), Vector::Constant(1, -5.0),
                                        Vector::Constant(1, 5.0), 200);
    CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-4));
}
