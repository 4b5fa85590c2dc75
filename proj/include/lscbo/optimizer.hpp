#pragma once

#include "lscbo/numkit.hpp"
#include "lscbo/problems.hpp"
#include "lscbo/reduction.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lscbo::optimizer {

using numkit::Index;
using numkit::Matrix;
using numkit::Vector;

enum class Mode { scbo, scbo_pca, scbo_kpca };

Mode parse_mode(std::string_view name);
std::string to_string(Mode mode);

/// sign(y) ln(1 + |y|)
double bilog(double y);
Matrix bilog(const Matrix& y);

/// Sum of positive constraint parts.
double total_violation(const Vector& c);

/// How an evaluated point ranks: any feasible point beats every infeasible one, feasible points
/// compare by objective, infeasible points by total violation.
struct Outcome {
    double objective = 0.0;
    double violation = 0.0;
    bool feasible = false;
};

Outcome make_outcome(double objective, const Vector& c);

/// Strict "a improves on b" under the incumbent ordering.
bool improves(const Outcome& a, const Outcome& b);

/// Evaluated data in unit-cube coordinates. Failed evaluations are kept apart from the model data.
struct Dataset {
    Matrix x;                      // N x D
    Vector f;                      // N
    Matrix c;                      // N x G, raw constraints
    std::vector<Index> eval_index; // position of each row in the evaluation sequence
    std::vector<Index> failed;     // evaluation indices that produced no usable values

    Index size() const { return x.rows(); }
    void append(const Vector& x_unit, double objective, const Vector& constraints, Index eval);
};

struct Incumbent {
    Index index = -1;
    bool feasible = false;
};

/// Best row: min f among feasible rows, else min total violation; ties to the lower index.
Incumbent incumbent(const Dataset& data);

struct TrustRegion {
    Vector center;
    double length = 0.8;
    int success_count = 0;
    int failure_count = 0;
    int success_tolerance = 3;
    int failure_tolerance = 1;
    double length_init = 0.8;
    double length_min = 0.0078125;  // 0.5^7
    double length_max = 1.6;
    bool restart_pending = false;

    static TrustRegion initial(const Vector& center, Index dim, Index batch);
};

struct BatchPoint {
    Vector x;  // unit cube
    Outcome outcome;
};

/// Success/failure bookkeeping after one batch; the center follows the best improving point.
TrustRegion update_trust_region(TrustRegion tr, std::span<const BatchPoint> batch, const Outcome& incumbent_before);

/// One selection step: argmin of the sampled objective over sampled-feasible candidates, else
/// argmin of sampled total violation. `c_draw` rows are candidates in bilog space.
/// Candidates flagged in `taken` are skipped; ties go to the lowest index.
Index select_one(const Vector& f_draw, const Matrix& c_draw, const std::vector<bool>& taken);

/// Applies select_one once per draw, never picking a candidate twice.
std::vector<Index> select_batch(std::span<const Vector> f_draws, std::span<const Matrix> c_draws);

struct VariantConfig {
    Mode mode = Mode::scbo;
    /// Fixed component count g; when empty, the normalized eigenvalue threshold decides.
    std::optional<Index> components;
    double eigen_threshold = 1e-2;
    reduction::KernelKind kernel = reduction::KernelKind::exponential;
    Index batch = 4;
    Index n_init = 10;
    Index max_evals = 200;
    std::uint64_t seed = 0;
    Index n_candidates = 0;    // 0: min(100 D, 5000)
    double perturb_prob = 0.0; // 0: min(1, 20 / D)
    int gp_restarts = 8;
    /// Restarts once a model has a previous fit to warm-start from.
    int gp_warm_restarts = 1;
    int gp_max_iterations = 200;
    double kpca_ridge = 1e-6;

    void validate() const;
};

struct EvalRow {
    Index eval = 0;
    Vector x;  // physical coordinates
    double f = 0.0;
    double violation = 0.0;
    bool feasible = false;
    bool failed = false;
    double best_feasible = 0.0;  // NaN until a feasible point exists
    double tr_length = 0.0;      // 0 for design-of-experiments rows
    double fit_ms = 0.0;         // model-fitting time charged to the first row of each batch
};

struct IterationInfo {
    Index iteration = 0;
    Index components = 0;  // constraint models fitted
    double subspace_error = 0.0;
    Index gp_fits = 0;
    double fit_ms = 0.0;
    Index candidates = 0;
    bool restarted = false;
};

struct RunRecord {
    std::string problem;
    Mode mode = Mode::scbo;
    std::uint64_t seed = 0;
    Index dim = 0;
    std::vector<EvalRow> rows;
    std::vector<IterationInfo> iterations;
    Index incumbent_row = -1;
    bool incumbent_feasible = false;

    double total_fit_ms() const;
    /// Best feasible objective after all evaluations, NaN if none.
    double final_best_feasible() const;
};

/// Constrained batched Thompson sampling inside a single trust region.
RunRecord run(const problems::Problem& problem, const VariantConfig& config);

}  // namespace lscbo::optimizer
