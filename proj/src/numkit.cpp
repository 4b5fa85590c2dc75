#include "lscbo/numkit.hpp"

#include "lscbo/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace lscbo::numkit {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

Vector SpdFactorization::solve(const Vector& b) const {
    Vector y = lower.triangularView<Eigen::Lower>().solve(b);
    return lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix SpdFactorization::solve(const Matrix& b) const {
    Matrix y = lower.triangularView<Eigen::Lower>().solve(b);
    return lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix SpdFactorization::solve_lower(const Matrix& b) const {
    return lower.triangularView<Eigen::Lower>().solve(b);
}

Matrix SpdFactorization::inverse() const {
    const Index n = size();
    const Matrix l_inv = lower.triangularView<Eigen::Lower>().solve(Matrix(Matrix::Identity(n, n)));
    Matrix out = Matrix::Zero(n, n);
    out.selfadjointView<Eigen::Lower>().rankUpdate(l_inv.transpose());
    out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
    return out;
}

double SpdFactorization::log_det() const {
    return 2.0 * lower.diagonal().array().log().sum();
}

SpdFactorization cholesky(const Matrix& a, int max_jitter_steps) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("cholesky: matrix is not square");
    }
    const Index n = a.rows();
    if (n == 0) {
        return {};
    }
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw std::invalid_argument("cholesky: matrix is not symmetric");
    }

    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success) {
        return {llt.matrixL(), 0.0};
    }

    const double trace = a.trace();
    double jitter = 1e-10 * (trace > 0.0 ? trace / static_cast<double>(n) : 1.0);
    for (int step = 0; step <= max_jitter_steps && max_jitter_steps > 0; ++step, jitter *= 10.0) {
        Matrix shifted = a;
        shifted.diagonal().array() += jitter;
        llt.compute(shifted);
        if (llt.info() == Eigen::Success) {
            return {llt.matrixL(), jitter};
        }
    }
    throw NotPositiveDefinite();
}

std::vector<Index> descending_order(const Vector& values) {
    std::vector<Index> order(static_cast<std::size_t>(values.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return values(i) > values(j); });
    return order;
}

namespace {

// Completes the columns of `u` flagged in `missing` to an orthonormal set by Gram-Schmidt
// against the canonical basis.
void complete_orthonormal(Matrix& u, const std::vector<bool>& missing) {
    const Index m = u.rows();
    Index candidate = 0;
    for (Index col = 0; col < u.cols(); ++col) {
        if (!missing[static_cast<std::size_t>(col)]) {
            continue;
        }
        for (; candidate < m; ++candidate) {
            Vector e = Vector::Unit(m, candidate);
            for (int pass = 0; pass < 2; ++pass) {
                for (Index other = 0; other < u.cols(); ++other) {
                    if (other == col || (missing[static_cast<std::size_t>(other)] && other > col)) {
                        continue;
                    }
                    e -= u.col(other).dot(e) * u.col(other);
                }
            }
            const double norm = e.norm();
            if (norm > 1e-8) {
                u.col(col) = e / norm;
                ++candidate;
                break;
            }
        }
    }
}

}  // namespace

Svd svd(const Matrix& a) {
    if (!a.allFinite()) {
        throw std::invalid_argument("svd: matrix has non-finite entries");
    }
    const bool transposed = a.rows() < a.cols();
    Matrix w = transposed ? Matrix(a.transpose()) : a;
    const Index m = w.rows();
    const Index n = w.cols();
    Matrix v = Matrix::Identity(n, n);

    const double tol = std::numeric_limits<double>::epsilon() * static_cast<double>(std::max<Index>(m, 1));
    constexpr int kMaxSweeps = 80;
    bool converged = false;
    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
        converged = true;
        for (Index p = 0; p + 1 < n; ++p) {
            for (Index q = p + 1; q < n; ++q) {
                const double alpha = w.col(p).squaredNorm();
                const double beta = w.col(q).squaredNorm();
                const double gamma = w.col(p).dot(w.col(q));
                if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) {
                    continue;
                }
                converged = false;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (Index i = 0; i < m; ++i) {
                    const double wp = w(i, p);
                    const double wq = w(i, q);
                    w(i, p) = c * wp - s * wq;
                    w(i, q) = s * wp + c * wq;
                }
                for (Index i = 0; i < n; ++i) {
                    const double vp = v(i, p);
                    const double vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
    }
    if (!converged) {
        throw NoConvergence("svd: Jacobi sweeps did not converge");
    }

    Vector norms = w.colwise().norm().transpose();
    const std::vector<Index> order = descending_order(norms);
    const double smax = n > 0 ? norms.maxCoeff() : 0.0;
    const double zero_tol = smax * tol * static_cast<double>(std::max<Index>(n, 1));

    Svd out;
    out.s.resize(n);
    Matrix left(m, n);
    Matrix right(n, n);
    std::vector<bool> missing(static_cast<std::size_t>(n), false);
    for (Index k = 0; k < n; ++k) {
        const Index src = order[static_cast<std::size_t>(k)];
        out.s(k) = norms(src);
        right.col(k) = v.col(src);
        if (norms(src) > zero_tol && norms(src) > 0.0) {
            left.col(k) = w.col(src) / norms(src);
        } else {
            left.col(k).setZero();
            missing[static_cast<std::size_t>(k)] = true;
        }
    }
    complete_orthonormal(left, missing);

    if (transposed) {
        out.u = std::move(right);
        out.v = std::move(left);
    } else {
        out.u = std::move(left);
        out.v = std::move(right);
    }
    return out;
}

SymEig sym_eig(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("sym_eig: matrix is not square");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
    if (solver.info() != Eigen::Success) {
        throw NoConvergence("sym_eig: eigen solver did not converge");
    }
    const Vector& ascending = solver.eigenvalues();
    const std::vector<Index> order = descending_order(ascending);
    SymEig out;
    out.values.resize(a.rows());
    out.vectors.resize(a.rows(), a.cols());
    for (Index k = 0; k < a.rows(); ++k) {
        const Index src = order[static_cast<std::size_t>(k)];
        out.values(k) = ascending(src);
        out.vectors.col(k) = solver.eigenvectors().col(src);
    }
    return out;
}

Vector standard_normal(Rng& rng, Index n) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Vector z(n);
    for (Index i = 0; i < n; ++i) {
        z(i) = dist(rng);
    }
    return z;
}

namespace {

Vector project(const Vector& x, const Vector& lower, const Vector& upper) {
    return x.cwiseMax(lower).cwiseMin(upper);
}

}  // namespace

BoxMinimum minimize_box(const GradientObjective& objective, const Vector& start, const Vector& lower,
                        const Vector& upper, int max_iterations, int memory) {
    const Index n = start.size();
    BoxMinimum result;
    Vector x = project(start, lower, upper);
    Vector grad(n);
    double value = objective(x, grad);
    if (!std::isfinite(value)) {
        result.x = x;
        result.value = value;
        return result;
    }

    std::deque<std::pair<Vector, Vector>> history;  // (s, y) pairs, newest last
    constexpr double kArmijo = 1e-4;
    constexpr double kProjectedGradTol = 1e-5;
    constexpr double kRelativeDecreaseTol = 2.2e-9;

    int iter = 0;
    for (; iter < max_iterations; ++iter) {
        const Vector pg = x - project(x - grad, lower, upper);
        if (pg.lpNorm<Eigen::Infinity>() < kProjectedGradTol) {
            result.converged = true;
            break;
        }

        // Variables pinned at a bound with the gradient pushing outward stay fixed.
        Eigen::Array<bool, Eigen::Dynamic, 1> free(n);
        for (Index i = 0; i < n; ++i) {
            const bool at_lower = x(i) <= lower(i) && grad(i) > 0.0;
            const bool at_upper = x(i) >= upper(i) && grad(i) < 0.0;
            free(i) = !(at_lower || at_upper);
        }
        auto mask = [&](Vector v) {
            for (Index i = 0; i < n; ++i) {
                if (!free(i)) {
                    v(i) = 0.0;
                }
            }
            return v;
        };

        // Two-loop recursion restricted to the free variables.
        Vector q = mask(grad);
        std::vector<double> alphas(history.size());
        for (std::size_t k = history.size(); k-- > 0;) {
            const Vector s = mask(history[k].first);
            const Vector y = mask(history[k].second);
            const double sy = s.dot(y);
            if (sy <= 0.0) {
                alphas[k] = 0.0;
                continue;
            }
            alphas[k] = s.dot(q) / sy;
            q -= alphas[k] * y;
        }
        if (!history.empty()) {
            const Vector s = mask(history.back().first);
            const Vector y = mask(history.back().second);
            const double yy = y.squaredNorm();
            if (yy > 0.0 && s.dot(y) > 0.0) {
                q *= s.dot(y) / yy;
            }
        }
        for (std::size_t k = 0; k < history.size(); ++k) {
            const Vector s = mask(history[k].first);
            const Vector y = mask(history[k].second);
            const double sy = s.dot(y);
            if (sy <= 0.0) {
                continue;
            }
            const double beta = y.dot(q) / sy;
            q += (alphas[k] - beta) * s;
        }
        Vector direction = -mask(q);
        if (direction.dot(grad) >= 0.0) {
            history.clear();
            direction = -mask(grad);
        }

        double step = 1.0;
        if (history.empty()) {
            const double dn = direction.lpNorm<Eigen::Infinity>();
            step = dn > 1.0 ? 1.0 / dn : 1.0;
        }
        Vector next_x(n);
        Vector next_grad(n);
        double next_value = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int trial = 0; trial < 40; ++trial, step *= 0.5) {
            next_x = project(x + step * direction, lower, upper);
            next_value = objective(next_x, next_grad);
            if (std::isfinite(next_value) && next_value <= value + kArmijo * grad.dot(next_x - x)) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (history.empty()) {
                break;
            }
            history.clear();
            continue;
        }

        Vector s = next_x - x;
        Vector y = next_grad - grad;
        const double decrease = value - next_value;
        x = std::move(next_x);
        grad = std::move(next_grad);
        value = next_value;
        if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
            history.emplace_back(std::move(s), std::move(y));
            if (static_cast<int>(history.size()) > memory) {
                history.pop_front();
            }
        }
        if (decrease <= kRelativeDecreaseTol * std::max({1.0, std::abs(value), std::abs(value + decrease)})) {
            result.converged = true;
            ++iter;
            break;
        }
    }
    result.x = x;
    result.value = value;
    result.iterations = iter;
    return result;
}

}  // namespace lscbo::numkit
