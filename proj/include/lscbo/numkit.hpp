#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace lscbo::numkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

/// Independent stream `stream` derived from a master seed.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

/// Lower-triangular factor of an SPD matrix, plus the diagonal jitter that was needed.
struct SpdFactorization {
    Matrix lower;
    double jitter = 0.0;

    Index size() const { return lower.rows(); }
    Vector solve(const Vector& b) const;
    Matrix solve(const Matrix& b) const;
    /// L^{-1} b
    Matrix solve_lower(const Matrix& b) const;
    Matrix inverse() const;
    double log_det() const;
};

/// Cholesky factorization with jitter escalation: on failure, 1e-10 * trace(A)/n is added to
/// the diagonal and multiplied by 10 up to `max_jitter_steps` times (0 disables jitter).
/// Throws NotPositiveDefinite when every attempt fails, std::invalid_argument on asymmetric input.
SpdFactorization cholesky(const Matrix& a, int max_jitter_steps = 3);

struct Svd {
    Matrix u;  // rows x k, orthonormal columns
    Vector s;  // k = min(rows, cols), descending
    Matrix v;  // cols x k, orthonormal columns
};

/// Thin SVD by one-sided Jacobi rotations.
Svd svd(const Matrix& a);

struct SymEig {
    Vector values;  // descending
    Matrix vectors; // column i pairs with values(i)
};

SymEig sym_eig(const Matrix& a);

Vector standard_normal(Rng& rng, Index n);

/// Result of a bound-constrained minimization.
struct BoxMinimum {
    Vector x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Objective returning f(x) and writing the gradient. May return +inf for infeasible trial points.
using GradientObjective = std::function<double(const Vector& x, Vector& grad)>;

/// Projected limited-memory BFGS on the box [lower, upper].
BoxMinimum minimize_box(const GradientObjective& objective, const Vector& start, const Vector& lower,
                        const Vector& upper, int max_iterations, int memory = 8);

/// Indices sorting `values` descending; ties keep their original order.
std::vector<Index> descending_order(const Vector& values);

}  // namespace lscbo::numkit
