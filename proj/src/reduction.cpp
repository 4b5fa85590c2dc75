#include "lscbo/reduction.hpp"

#include "lscbo/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lscbo::reduction {

namespace {

struct CenteredSvd {
    Vector mean;
    numkit::Svd svd;
    Index rank = 0;
};

CenteredSvd centered_svd(const Matrix& c) {
    if (c.rows() < 2) {
        throw std::invalid_argument("fit_pca: need at least two rows");
    }
    CenteredSvd out;
    out.mean = c.colwise().mean().transpose();
    const Matrix centered = c.rowwise() - out.mean.transpose();
    out.svd = numkit::svd(centered);
    const Vector& s = out.svd.s;
    const double smax = s.size() > 0 ? s(0) : 0.0;
    const double tol = smax * std::numeric_limits<double>::epsilon() *
                       static_cast<double>(std::max(c.rows(), c.cols())) * 8.0;
    for (Index i = 0; i < s.size(); ++i) {
        if (s(i) > tol && s(i) > 0.0) {
            ++out.rank;
        }
    }
    if (out.rank == 0) {
        throw ConstantConstraints();
    }
    return out;
}

LinearSubspace truncate(CenteredSvd&& decomposition, Index requested) {
    LinearSubspace s;
    const Index g = std::min(requested, decomposition.rank);
    s.clamped = requested > decomposition.rank;
    s.rank = decomposition.rank;
    s.column_mean = std::move(decomposition.mean);
    s.basis = decomposition.svd.v.leftCols(g);
    s.singular_values = std::move(decomposition.svd.s);
    return s;
}

double median(std::vector<double> values) {
    if (values.empty()) {
        return 0.0;
    }
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    double upper = values[mid];
    if (values.size() % 2 == 1) {
        return upper;
    }
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

}  // namespace

LinearSubspace fit_pca(const Matrix& c, Index components) {
    if (components < 0) {
        throw std::invalid_argument("fit_pca: negative component count");
    }
    return truncate(centered_svd(c), components);
}

LinearSubspace fit_pca_threshold(const Matrix& c, double threshold) {
    if (!(threshold > 0.0)) {
        throw std::invalid_argument("fit_pca_threshold: threshold must be positive");
    }
    CenteredSvd decomposition = centered_svd(c);
    const Index g = count_above(decomposition.svd.s, threshold);
    return truncate(std::move(decomposition), g);
}

Index count_above(const Vector& singular_values, double threshold) {
    if (singular_values.size() == 0 || singular_values(0) <= 0.0) {
        return 0;
    }
    Index count = 0;
    for (Index i = 0; i < singular_values.size(); ++i) {
        if (singular_values(i) / singular_values(0) > threshold) {
            ++count;
        }
    }
    return count;
}

Vector project_linear(const LinearSubspace& s, const Vector& c) {
    return s.basis.transpose() * (c - s.column_mean);
}

Matrix project_linear(const LinearSubspace& s, const Matrix& rows) {
    return (rows.rowwise() - s.column_mean.transpose()) * s.basis;
}

Vector reconstruct_linear(const LinearSubspace& s, const Vector& z) {
    return s.basis * z + s.column_mean;
}

Matrix reconstruct_linear(const LinearSubspace& s, const Matrix& rows) {
    Matrix out = rows * s.basis.transpose();
    out.rowwise() += s.column_mean.transpose();
    return out;
}

double reconstruction_error(const LinearSubspace& s, const Matrix& c_star) {
    if (c_star.cols() != s.ambient_dim()) {
        throw std::invalid_argument("reconstruction_error: column count mismatch");
    }
    const double norm2 = c_star.squaredNorm();
    if (norm2 == 0.0) {
        throw ZeroNorm();
    }
    const Matrix approx = reconstruct_linear(s, project_linear(s, c_star));
    return (c_star - approx).squaredNorm() / norm2;
}

KernelKind parse_kernel_kind(std::string_view name) {
    if (name == "linear") {
        return KernelKind::linear;
    }
    if (name == "exponential" || name == "exp") {
        return KernelKind::exponential;
    }
    if (name == "squared-exponential" || name == "squared_exponential" || name == "rbf") {
        return KernelKind::squared_exponential;
    }
    throw std::invalid_argument("unknown kernel kind: " + std::string(name));
}

std::string to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::linear: return "linear";
        case KernelKind::exponential: return "exponential";
        case KernelKind::squared_exponential: return "squared-exponential";
    }
    return "unknown";
}

double kernel_value(KernelKind kind, double scale, const Vector& u, const Vector& v) {
    switch (kind) {
        case KernelKind::linear: return u.dot(v);
        case KernelKind::exponential: return std::exp(-(u - v).norm() / scale);
        case KernelKind::squared_exponential: return std::exp(-0.5 * (u - v).squaredNorm() / (scale * scale));
    }
    return 0.0;
}

namespace {

struct KernelEigen {
    NonlinearSubspace subspace;
    Matrix centered;
    numkit::SymEig eig;
    Index positive = 0;
};

KernelEigen kernel_eigen(const Matrix& c, KernelKind kernel) {
    const Index n = c.rows();
    if (n < 2) {
        throw std::invalid_argument("fit_kpca: need at least two rows");
    }
    KernelEigen out;
    NonlinearSubspace& s = out.subspace;
    s.kernel = kernel;
    s.column_mean = c.colwise().mean().transpose();
    s.train_points = c.rowwise() - s.column_mean.transpose();

    std::vector<double> distances;
    distances.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            distances.push_back((s.train_points.row(i) - s.train_points.row(j)).norm());
        }
    }
    const double med = median(std::move(distances));
    s.kernel_scale = med > 0.0 ? med : 1.0;

    Matrix k(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = i; j < n; ++j) {
            k(i, j) = k(j, i) = kernel_value(kernel, s.kernel_scale, s.train_points.row(i).transpose(),
                                             s.train_points.row(j).transpose());
        }
    }
    s.kernel_column_means = k.colwise().mean().transpose();
    s.kernel_grand_mean = k.mean();
    out.centered = k;
    out.centered.rowwise() -= s.kernel_column_means.transpose();
    out.centered.colwise() -= s.kernel_column_means;
    out.centered.array() += s.kernel_grand_mean;
    out.centered = 0.5 * (out.centered + out.centered.transpose());

    out.eig = numkit::sym_eig(out.centered);
    s.spectrum = out.eig.values.cwiseMax(0.0);
    const double positive_tol = 1e-12 * std::max(1.0, out.eig.values(0));
    while (out.positive < n && out.eig.values(out.positive) > positive_tol) {
        ++out.positive;
    }
    return out;
}

NonlinearSubspace keep_components(KernelEigen&& ke, Index components) {
    if (ke.positive < components) {
        throw InsufficientPositiveEigenvalues(static_cast<std::size_t>(components),
                                              static_cast<std::size_t>(ke.positive));
    }
    NonlinearSubspace s = std::move(ke.subspace);
    s.eigenvalues = ke.eig.values.head(components);
    s.coefficients = ke.eig.vectors.leftCols(components);
    for (Index q = 0; q < components; ++q) {
        s.coefficients.col(q) /= std::sqrt(s.eigenvalues(q));
    }
    s.train_projections = ke.centered * s.coefficients;
    return s;
}

}  // namespace

NonlinearSubspace fit_kpca(const Matrix& c, KernelKind kernel, Index components) {
    if (components < 0) {
        throw std::invalid_argument("fit_kpca: negative component count");
    }
    return keep_components(kernel_eigen(c, kernel), components);
}

NonlinearSubspace fit_kpca_threshold(const Matrix& c, KernelKind kernel, double threshold) {
    if (!(threshold > 0.0)) {
        throw std::invalid_argument("fit_kpca_threshold: threshold must be positive");
    }
    KernelEigen ke = kernel_eigen(c, kernel);
    Index g = 0;
    for (Index q = 0; q < ke.positive; ++q) {
        if (std::sqrt(ke.eig.values(q) / ke.eig.values(0)) > threshold) {
            ++g;
        }
    }
    return keep_components(std::move(ke), g);
}

Vector project_kpca(const NonlinearSubspace& s, const Vector& c) {
    const Index n = s.train_points.rows();
    const Vector u = c - s.column_mean;
    Vector k(n);
    for (Index i = 0; i < n; ++i) {
        k(i) = kernel_value(s.kernel, s.kernel_scale, u, s.train_points.row(i).transpose());
    }
    const double k_mean = k.mean();
    const Vector centered = (k.array() - k_mean - s.kernel_column_means.array() + s.kernel_grand_mean).matrix();
    return s.coefficients.transpose() * centered;
}

Matrix project_kpca(const NonlinearSubspace& s, const Matrix& rows) {
    Matrix out(rows.rows(), s.components());
    for (Index r = 0; r < rows.rows(); ++r) {
        out.row(r) = project_kpca(s, Vector(rows.row(r).transpose())).transpose();
    }
    return out;
}

Vector InverseMap::apply(const Vector& z) const {
    return weights * z + offset;
}

Matrix InverseMap::apply(const Matrix& rows) const {
    Matrix out = rows * weights.transpose();
    out.rowwise() += offset.transpose();
    return out;
}

InverseMap fit_inverse_map(const Matrix& projections, const Matrix& targets, double ridge_penalty) {
    if (projections.rows() != targets.rows()) {
        throw std::invalid_argument("fit_inverse_map: row counts differ");
    }
    if (!(ridge_penalty >= 0.0)) {
        throw std::invalid_argument("fit_inverse_map: ridge penalty must be non-negative");
    }
    InverseMap map;
    map.ridge_penalty = ridge_penalty;
    const Vector z_mean = projections.colwise().mean().transpose();
    const Vector t_mean = targets.colwise().mean().transpose();
    const Index g = projections.cols();
    if (g == 0) {
        map.weights = Matrix::Zero(targets.cols(), 0);
        map.offset = t_mean;
        return map;
    }
    const Matrix zc = projections.rowwise() - z_mean.transpose();
    const Matrix tc = targets.rowwise() - t_mean.transpose();
    Matrix gram = zc.transpose() * zc;
    gram.diagonal().array() += ridge_penalty;
    const numkit::SpdFactorization fac = numkit::cholesky(gram, ridge_penalty > 0.0 ? 3 : 0);
    const Matrix weights_t = fac.solve(Matrix(zc.transpose() * tc));  // g x G
    map.weights = weights_t.transpose();
    map.offset = t_mean - map.weights * z_mean;
    return map;
}

InverseMap inverse_map(const LinearSubspace& s) {
    return InverseMap{s.basis, s.column_mean, 0.0};
}

std::vector<SpectrumRow> spectrum(const Vector& singular_values) {
    std::vector<SpectrumRow> rows;
    const double total = singular_values.squaredNorm();
    const double first = singular_values.size() > 0 ? singular_values(0) : 0.0;
    double running = 0.0;
    for (Index i = 0; i < singular_values.size(); ++i) {
        const double v = singular_values(i);
        running += v * v;
        rows.push_back({i + 1, v, first > 0.0 ? v / first : 0.0, total > 0.0 ? running / total : 0.0});
    }
    return rows;
}

}  // namespace lscbo::reduction
