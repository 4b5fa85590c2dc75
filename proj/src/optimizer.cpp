#include "lscbo/optimizer.hpp"

#include "lscbo/design.hpp"
#include "lscbo/errors.hpp"
#include "lscbo/surrogate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lscbo::optimizer {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

Mode parse_mode(std::string_view name) {
    if (name == "scbo") {
        return Mode::scbo;
    }
    if (name == "scbo_pca" || name == "scbo-pca") {
        return Mode::scbo_pca;
    }
    if (name == "scbo_kpca" || name == "scbo-kpca") {
        return Mode::scbo_kpca;
    }
    throw ConfigError("unknown variant: " + std::string(name));
}

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::scbo: return "scbo";
        case Mode::scbo_pca: return "scbo_pca";
        case Mode::scbo_kpca: return "scbo_kpca";
    }
    return "unknown";
}

double bilog(double y) {
    return std::copysign(std::log1p(std::abs(y)), y);
}

Matrix bilog(const Matrix& y) {
    return y.unaryExpr([](double v) { return bilog(v); });
}

double total_violation(const Vector& c) {
    return c.cwiseMax(0.0).sum();
}

Outcome make_outcome(double objective, const Vector& c) {
    const double violation = total_violation(c);
    return {objective, violation, violation == 0.0};
}

bool improves(const Outcome& a, const Outcome& b) {
    if (a.feasible != b.feasible) {
        return a.feasible;
    }
    return a.feasible ? a.objective < b.objective : a.violation < b.violation;
}

void Dataset::append(const Vector& x_unit, double objective, const Vector& constraints, Index eval) {
    const Index n = size();
    if (n == 0) {
        x.resize(0, x_unit.size());
        c.resize(0, constraints.size());
    }
    x.conservativeResize(n + 1, x_unit.size());
    f.conservativeResize(n + 1);
    c.conservativeResize(n + 1, constraints.size());
    x.row(n) = x_unit.transpose();
    f(n) = objective;
    c.row(n) = constraints.transpose();
    eval_index.push_back(eval);
}

Incumbent incumbent(const Dataset& data) {
    Incumbent best;
    Outcome best_outcome;
    for (Index i = 0; i < data.size(); ++i) {
        const Outcome o = make_outcome(data.f(i), data.c.row(i).transpose());
        if (best.index < 0 || improves(o, best_outcome)) {
            best.index = i;
            best_outcome = o;
        }
    }
    best.feasible = best.index >= 0 && best_outcome.feasible;
    return best;
}

TrustRegion TrustRegion::initial(const Vector& center, Index dim, Index batch) {
    TrustRegion tr;
    tr.center = center;
    const double dims = static_cast<double>(std::max<Index>(4, dim));
    tr.failure_tolerance = static_cast<int>(std::ceil(dims / static_cast<double>(std::max<Index>(1, batch))));
    tr.length = tr.length_init;
    return tr;
}

TrustRegion update_trust_region(TrustRegion tr, std::span<const BatchPoint> batch, const Outcome& incumbent_before) {
    if (batch.empty()) {
        throw std::invalid_argument("update_trust_region: empty batch");
    }
    const BatchPoint* best = nullptr;
    for (const BatchPoint& point : batch) {
        if (improves(point.outcome, best ? best->outcome : incumbent_before)) {
            best = &point;
        }
    }
    if (best != nullptr) {
        ++tr.success_count;
        tr.failure_count = 0;
        tr.center = best->x;
    } else {
        ++tr.failure_count;
        tr.success_count = 0;
    }
    if (tr.success_count >= tr.success_tolerance) {
        tr.length = std::min(2.0 * tr.length, tr.length_max);
        tr.success_count = 0;
    }
    if (tr.failure_count >= tr.failure_tolerance) {
        tr.length /= 2.0;
        tr.failure_count = 0;
    }
    if (tr.length <= tr.length_min) {
        tr.restart_pending = true;
    }
    return tr;
}

Index select_one(const Vector& f_draw, const Matrix& c_draw, const std::vector<bool>& taken) {
    Index best_feasible = -1;
    Index best_violation = -1;
    double best_f = kInf;
    double best_v = kInf;
    for (Index i = 0; i < f_draw.size(); ++i) {
        if (!taken.empty() && taken[static_cast<std::size_t>(i)]) {
            continue;
        }
        const double violation = c_draw.row(i).cwiseMax(0.0).sum();
        if (violation == 0.0 && (best_feasible < 0 || f_draw(i) < best_f)) {
            best_feasible = i;
            best_f = f_draw(i);
        }
        if (best_violation < 0 || violation < best_v) {
            best_violation = i;
            best_v = violation;
        }
    }
    return best_feasible >= 0 ? best_feasible : best_violation;
}

std::vector<Index> select_batch(std::span<const Vector> f_draws, std::span<const Matrix> c_draws) {
    if (f_draws.size() != c_draws.size()) {
        throw std::invalid_argument("select_batch: draw counts differ");
    }
    std::vector<Index> chosen;
    if (f_draws.empty()) {
        return chosen;
    }
    const Index n = f_draws.front().size();
    if (static_cast<Index>(f_draws.size()) > n) {
        throw std::invalid_argument("select_batch: batch larger than candidate set");
    }
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    for (std::size_t s = 0; s < f_draws.size(); ++s) {
        if (f_draws[s].size() != n || c_draws[s].rows() != n) {
            throw std::invalid_argument("select_batch: draw sizes differ");
        }
        const Index pick = select_one(f_draws[s], c_draws[s], taken);
        taken[static_cast<std::size_t>(pick)] = true;
        chosen.push_back(pick);
    }
    return chosen;
}

void VariantConfig::validate() const {
    if (batch < 1) {
        throw ConfigError("batch size must be at least 1");
    }
    if (n_init < 2) {
        throw ConfigError("n_init must be at least 2");
    }
    if (max_evals < n_init) {
        throw ConfigError("max_evals must be at least n_init");
    }
    if (mode != Mode::scbo) {
        if (components && *components < 1) {
            throw ConfigError("reduced variants need g >= 1");
        }
        if (!components && !(eigen_threshold > 0.0)) {
            throw ConfigError("eigenvalue threshold must be positive");
        }
    }
    if (gp_restarts < 1 || gp_warm_restarts < 1 || gp_max_iterations < 1) {
        throw ConfigError("GP fitting budget must be positive");
    }
    if (perturb_prob < 0.0 || perturb_prob > 1.0) {
        throw ConfigError("perturb_prob must lie in [0, 1]");
    }
    if (!(kpca_ridge >= 0.0)) {
        throw ConfigError("kpca_ridge must be non-negative");
    }
}

double RunRecord::total_fit_ms() const {
    double total = 0.0;
    for (const IterationInfo& it : iterations) {
        total += it.fit_ms;
    }
    return total;
}

double RunRecord::final_best_feasible() const {
    return rows.empty() ? kNaN : rows.back().best_feasible;
}

namespace {

using surrogate::GPHyperparams;
using surrogate::GPModel;

/// Reduced-space constraint models plus the map back to the full bilog constraint space.
struct ConstraintSurrogate {
    std::vector<GPModel> models;
    bool direct = true;  // models predict the G constraints themselves
    reduction::InverseMap inverse;
    double subspace_error = 0.0;
};

// Joint draws from `model`; falls back to independent marginals if the joint covariance
// cannot be factorized.
Matrix draw(const GPModel& model, const Matrix& points, numkit::Rng& rng, Index count) {
    try {
        return surrogate::sample_posterior(model, points, rng, count);
    } catch (const NotPositiveDefinite&) {
        const surrogate::PosteriorSlice post = surrogate::posterior(model, points, false);
        Matrix out(points.rows(), count);
        for (Index s = 0; s < count; ++s) {
            out.col(s) = post.mean + post.variance.cwiseSqrt().cwiseProduct(numkit::standard_normal(rng, points.rows()));
        }
        return out;
    }
}

class Runner {
public:
    Runner(const problems::Problem& problem, const VariantConfig& config)
        : problem_(problem), config_(config), rng_(numkit::make_rng(config.seed)) {
        record_.problem = problem.name;
        record_.mode = config.mode;
        record_.seed = config.seed;
        record_.dim = problem.dim;
        data_.x.resize(0, problem.dim);
        data_.c.resize(0, problem.n_constraints);
        n_candidates_ = config.n_candidates > 0 ? config.n_candidates : design::default_candidate_count(problem.dim);
        perturb_prob_ = config.perturb_prob > 0.0 ? config.perturb_prob : design::default_perturb_prob(problem.dim);
        if (problem.analytic_blocks) {
            unit_blocks_ = to_unit_blocks(*problem.analytic_blocks);
        }
    }

    RunRecord execute() {
        const Index doe = std::min(config_.n_init, config_.max_evals);
        evaluate(design::latin_hypercube(doe, problem_.dim, rng_), 0.0, 0.0);
        start_trust_region(0);

        Index iteration = 0;
        while (evaluations() < config_.max_evals) {
            IterationInfo info;
            info.iteration = iteration++;
            step(info);
            record_.iterations.push_back(info);
        }

        const Incumbent best = incumbent(data_);
        if (best.index >= 0) {
            record_.incumbent_row = data_.eval_index[static_cast<std::size_t>(best.index)];
            record_.incumbent_feasible = best.feasible;
        }
        return std::move(record_);
    }

private:
    Index evaluations() const { return static_cast<Index>(record_.rows.size()); }

    design::AnalyticBlockSpec to_unit_blocks(const design::AnalyticBlockSpec& physical) const {
        design::AnalyticBlockSpec unit = physical;
        for (design::AnalyticBlock& block : unit.blocks) {
            const auto predicate = block.feasible;
            const Vector lo = problem_.lower.segment(block.begin, block.end - block.begin);
            const Vector span_width = (problem_.upper - problem_.lower).segment(block.begin, block.end - block.begin);
            block.feasible = [predicate, lo, span_width](std::span<const double> u) {
                Vector x(static_cast<Index>(u.size()));
                for (std::size_t i = 0; i < u.size(); ++i) {
                    const auto k = static_cast<Index>(i);
                    x(k) = lo(k) + span_width(k) * u[i];
                }
                return predicate(std::span<const double>(x.data(), u.size()));
            };
        }
        return unit;
    }

    std::vector<BatchPoint> evaluate(const Matrix& unit_points, double tr_length, double fit_ms) {
        std::vector<BatchPoint> batch;
        for (Index i = 0; i < unit_points.rows(); ++i) {
            const Vector u = unit_points.row(i).transpose();
            EvalRow row;
            row.eval = evaluations();
            row.x = problem_.to_physical(u);
            row.tr_length = tr_length;
            row.fit_ms = i == 0 ? fit_ms : 0.0;

            problems::Evaluation e;
            bool ok = false;
            try {
                e = problem_.evaluate(row.x);
                ok = std::isfinite(e.objective) && e.constraints.size() == problem_.n_constraints &&
                     e.constraints.allFinite();
            } catch (const std::exception&) {
                ok = false;
            }

            Outcome outcome{kInf, kInf, false};
            if (ok) {
                outcome = make_outcome(e.objective, e.constraints);
                data_.append(u, e.objective, e.constraints, row.eval);
                row.f = e.objective;
                row.violation = outcome.violation;
                row.feasible = outcome.feasible;
                if (outcome.feasible && (std::isnan(best_feasible_) || e.objective < best_feasible_)) {
                    best_feasible_ = e.objective;
                }
            } else {
                row.failed = true;
                row.f = kNaN;
                row.violation = kInf;
                data_.failed.push_back(row.eval);
            }
            row.best_feasible = best_feasible_;
            record_.rows.push_back(std::move(row));
            batch.push_back({u, outcome});
        }
        return batch;
    }

    // Centers a fresh trust region on the best point among rows [first_row, end) of the data.
    void start_trust_region(Index first_row) {
        Index best = -1;
        Outcome best_outcome;
        for (Index i = first_row; i < data_.size(); ++i) {
            const Outcome o = make_outcome(data_.f(i), data_.c.row(i).transpose());
            if (best < 0 || improves(o, best_outcome)) {
                best = i;
                best_outcome = o;
            }
        }
        if (best < 0) {
            tr_ = TrustRegion::initial(Vector::Constant(problem_.dim, 0.5), problem_.dim, config_.batch);
            local_best_ = Outcome{kInf, kInf, false};
            return;
        }
        tr_ = TrustRegion::initial(data_.x.row(best).transpose(), problem_.dim, config_.batch);
        local_best_ = best_outcome;
    }

    GPModel fit_slot(std::size_t slot, const Vector& targets) {
        if (warm_.size() <= slot) {
            warm_.resize(slot + 1);
        }
        surrogate::FitOptions options;
        options.restarts = warm_[slot] ? config_.gp_warm_restarts : config_.gp_restarts;
        options.max_iterations = config_.gp_max_iterations;
        options.warm_start = warm_[slot];
        GPModel model = surrogate::fit(data_.x, targets, rng_, options);
        warm_[slot] = model.hyperparams();
        return model;
    }

    ConstraintSurrogate fit_constraints(const Matrix& cb) {
        ConstraintSurrogate out;
        const Index g_full = cb.cols();
        if (config_.mode == Mode::scbo) {
            for (Index j = 0; j < g_full; ++j) {
                out.models.push_back(fit_slot(static_cast<std::size_t>(j + 1), cb.col(j)));
            }
            return out;
        }

        out.direct = false;
        Matrix projections;
        try {
            if (config_.mode == Mode::scbo_pca) {
                const reduction::LinearSubspace sub = config_.components
                                                          ? reduction::fit_pca(cb, *config_.components)
                                                          : reduction::fit_pca_threshold(cb, config_.eigen_threshold);
                projections = reduction::project_linear(sub, cb);
                out.inverse = reduction::inverse_map(sub);
            } else {
                reduction::NonlinearSubspace sub;
                try {
                    sub = config_.components ? reduction::fit_kpca(cb, config_.kernel, *config_.components)
                                             : reduction::fit_kpca_threshold(cb, config_.kernel, config_.eigen_threshold);
                } catch (const InsufficientPositiveEigenvalues& e) {
                    if (e.available() == 0) {
                        throw ConstantConstraints();
                    }
                    sub = reduction::fit_kpca(cb, config_.kernel, static_cast<Index>(e.available()));
                }
                projections = sub.train_projections;
                out.inverse = reduction::fit_inverse_map(projections, cb, config_.kpca_ridge);
            }
        } catch (const ConstantConstraints&) {
            projections = Matrix(cb.rows(), 0);
            out.inverse = reduction::InverseMap{Matrix::Zero(g_full, 0), cb.colwise().mean().transpose(), 0.0};
        }

        const double norm2 = cb.squaredNorm();
        out.subspace_error = norm2 > 0.0 ? (cb - out.inverse.apply(projections)).squaredNorm() / norm2 : 0.0;
        for (Index k = 0; k < projections.cols(); ++k) {
            out.models.push_back(fit_slot(static_cast<std::size_t>(k + 1), projections.col(k)));
        }
        return out;
    }

    void step(IterationInfo& info) {
        const Index remaining = config_.max_evals - evaluations();
        Index q = std::min(config_.batch, remaining);
        if (data_.size() == 0) {
            evaluate(design::latin_hypercube(q, problem_.dim, rng_), 0.0, 0.0);
            start_trust_region(0);
            return;
        }

        const Matrix cb = bilog(data_.c);
        const auto t0 = std::chrono::steady_clock::now();
        const GPModel objective = fit_slot(0, data_.f);
        const ConstraintSurrogate constraints = fit_constraints(cb);
        const double fit_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        info.fit_ms = fit_ms;
        info.components = static_cast<Index>(constraints.models.size());
        info.gp_fits = 1 + info.components;
        info.subspace_error = constraints.subspace_error;

        design::CandidateSet candidates = design::trust_region_candidates(
            tr_.center, objective.hyperparams().lengthscales, tr_.length, n_candidates_, perturb_prob_, rng_);
        if (unit_blocks_) {
            candidates = design::repair_analytic(candidates, *unit_blocks_, rng_);
        }
        info.candidates = candidates.size();
        q = std::min(q, candidates.size());

        const Matrix f_all = draw(objective, candidates.points, rng_, q);
        std::vector<Matrix> c_all;
        for (const GPModel& model : constraints.models) {
            c_all.push_back(draw(model, candidates.points, rng_, q));
        }
        std::vector<Vector> f_draws;
        std::vector<Matrix> c_draws;
        for (Index s = 0; s < q; ++s) {
            f_draws.emplace_back(f_all.col(s));
            Matrix sampled(candidates.size(), static_cast<Index>(c_all.size()));
            for (std::size_t k = 0; k < c_all.size(); ++k) {
                sampled.col(static_cast<Index>(k)) = c_all[k].col(s);
            }
            c_draws.push_back(constraints.direct ? sampled : constraints.inverse.apply(sampled));
        }
        const std::vector<Index> chosen = select_batch(f_draws, c_draws);

        Matrix points(static_cast<Index>(chosen.size()), problem_.dim);
        for (std::size_t i = 0; i < chosen.size(); ++i) {
            points.row(static_cast<Index>(i)) = candidates.points.row(chosen[i]);
        }
        const std::vector<BatchPoint> batch = evaluate(points, tr_.length, fit_ms);
        tr_ = update_trust_region(tr_, batch, local_best_);
        for (const BatchPoint& point : batch) {
            if (improves(point.outcome, local_best_)) {
                local_best_ = point.outcome;
            }
        }

        if (tr_.restart_pending && evaluations() < config_.max_evals) {
            info.restarted = true;
            const Index first_new = data_.size();
            const Index n = std::min(config_.n_init, config_.max_evals - evaluations());
            evaluate(design::latin_hypercube(n, problem_.dim, rng_), 0.0, 0.0);
            start_trust_region(first_new);
        }
    }

    const problems::Problem& problem_;
    const VariantConfig& config_;
    numkit::Rng rng_;
    RunRecord record_;
    Dataset data_;
    TrustRegion tr_;
    Outcome local_best_;
    double best_feasible_ = kNaN;
    Index n_candidates_ = 0;
    double perturb_prob_ = 0.0;
    std::optional<design::AnalyticBlockSpec> unit_blocks_;
    std::vector<std::optional<GPHyperparams>> warm_;
};

}  // namespace

RunRecord run(const problems::Problem& problem, const VariantConfig& config) {
    problem.validate();
    config.validate();
    return Runner(problem, config).execute();
}

}  // namespace lscbo::optimizer
