#pragma once

#include "lscbo/numkit.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace lscbo::reduction {

using numkit::Index;
using numkit::Matrix;
using numkit::Vector;

/// Truncated principal directions of a column-centered constraint matrix.
struct LinearSubspace {
    Vector column_mean;      // G
    Matrix basis;            // G x g, orthonormal columns
    Vector singular_values;  // all min(N, G) values of the centered matrix, descending
    Index rank = 0;          // numerical rank of the centered matrix
    bool clamped = false;    // requested component count exceeded the rank

    Index components() const { return basis.cols(); }
    Index ambient_dim() const { return column_mean.size(); }
};

/// PCA keeping `components` leading directions (clamped to the rank).
/// Throws ConstantConstraints when every row is identical.
LinearSubspace fit_pca(const Matrix& c, Index components);

/// PCA keeping every direction whose normalized singular value sigma_i / sigma_1 exceeds `threshold`.
LinearSubspace fit_pca_threshold(const Matrix& c, double threshold);

/// Number of normalized singular values strictly above `threshold`.
Index count_above(const Vector& singular_values, double threshold);

Vector project_linear(const LinearSubspace& s, const Vector& c);
/// Row-wise projection of an M x G matrix.
Matrix project_linear(const LinearSubspace& s, const Matrix& rows);
Vector reconstruct_linear(const LinearSubspace& s, const Vector& z);
Matrix reconstruct_linear(const LinearSubspace& s, const Matrix& rows);

/// ||C* - reconstruct(project(C*))||_F^2 / ||C*||_F^2; throws ZeroNorm for a zero matrix.
double reconstruction_error(const LinearSubspace& s, const Matrix& c_star);

enum class KernelKind { linear, exponential, squared_exponential };

KernelKind parse_kernel_kind(std::string_view name);
std::string to_string(KernelKind kind);

struct NonlinearSubspace {
    KernelKind kernel = KernelKind::exponential;
    double kernel_scale = 1.0;  // median pairwise distance of the training rows
    Vector column_mean;         // G
    Matrix train_points;        // N x G, centered
    Matrix coefficients;        // N x g, lambda_q * |alpha_q|^2 = 1
    Vector eigenvalues;         // g kept eigenvalues, descending
    Vector spectrum;            // all N eigenvalues of the centered kernel matrix, clamped at 0
    Vector kernel_column_means; // column means of the uncentered kernel matrix
    double kernel_grand_mean = 0.0;
    Matrix train_projections;   // N x g

    Index components() const { return coefficients.cols(); }
};

double kernel_value(KernelKind kind, double scale, const Vector& u, const Vector& v);

/// Kernel PCA on the centered rows of `c`. Throws InsufficientPositiveEigenvalues when fewer
/// than `components` eigenvalues of the double-centered kernel matrix are positive.
NonlinearSubspace fit_kpca(const Matrix& c, KernelKind kernel, Index components);

/// Kernel PCA keeping every component with sqrt(lambda_q / lambda_1) above `threshold`.
NonlinearSubspace fit_kpca_threshold(const Matrix& c, KernelKind kernel, double threshold);

Vector project_kpca(const NonlinearSubspace& s, const Vector& c);
Matrix project_kpca(const NonlinearSubspace& s, const Matrix& rows);

/// Affine map z -> W z + b back into the full constraint space.
struct InverseMap {
    Matrix weights;  // G x g
    Vector offset;   // G
    double ridge_penalty = 0.0;

    Vector apply(const Vector& z) const;
    /// Row-wise: M x g -> M x G.
    Matrix apply(const Matrix& rows) const;
};

/// Ridge least squares min ||T - (Z W^T + 1 b^T)||_F^2 + ridge ||W||_F^2 via the normal equations.
/// With ridge = 0 a singular Gram matrix raises NotPositiveDefinite.
InverseMap fit_inverse_map(const Matrix& projections, const Matrix& targets, double ridge_penalty);

/// The exact inverse of a linear subspace projection (W = basis, b = column mean).
InverseMap inverse_map(const LinearSubspace& s);

struct SpectrumRow {
    Index index = 0;  // 1-based
    double value = 0.0;
    double normalized = 0.0;
    double cumulative_energy = 0.0;
};

std::vector<SpectrumRow> spectrum(const Vector& singular_values);

}  // namespace lscbo::reduction
