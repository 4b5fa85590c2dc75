#include "doctest.h"

#include "lscbo/errors.hpp"
#include "lscbo/optimizer.hpp"

#include <cmath>
#include <numbers>

using namespace lscbo;
using numkit::Index;
using numkit::Matrix;
using numkit::Vector;
using optimizer::Mode;

namespace {

// Literal reading of the selection rule: among candidates whose sampled constraints are all
// non-positive take the smallest sampled objective; if there are none, take the smallest sum of
// positive constraint parts. Earlier candidates win ties; chosen candidates are not reused.
std::vector<Index> brute_force_select(const std::vector<Vector>& f, const std::vector<Matrix>& c) {
    std::vector<Index> picked;
    for (std::size_t s = 0; s < f.size(); ++s) {
        std::vector<Index> open;
        for (Index i = 0; i < f[s].size(); ++i) {
            if (std::find(picked.begin(), picked.end(), i) == picked.end()) {
                open.push_back(i);
            }
        }
        std::vector<Index> feasible;
        for (Index i : open) {
            bool ok = true;
            for (Index j = 0; j < c[s].cols(); ++j) {
                ok = ok && c[s](i, j) <= 0.0;
            }
            if (ok) {
                feasible.push_back(i);
            }
        }
        Index best = -1;
        if (!feasible.empty()) {
            for (Index i : feasible) {
                if (best < 0 || f[s](i) < f[s](best)) {
                    best = i;
                }
            }
        } else {
            double best_v = 0.0;
            for (Index i : open) {
                double v = 0.0;
                for (Index j = 0; j < c[s].cols(); ++j) {
                    v += std::max(0.0, c[s](i, j));
                }
                if (best < 0 || v < best_v) {
                    best = i;
                    best_v = v;
                }
            }
        }
        picked.push_back(best);
    }
    return picked;
}

optimizer::Dataset dataset(const std::vector<double>& f, const std::vector<std::vector<double>>& c) {
    optimizer::Dataset d;
    for (std::size_t i = 0; i < f.size(); ++i) {
        Vector ci(static_cast<Index>(c[i].size()));
        for (std::size_t j = 0; j < c[i].size(); ++j) {
            ci(static_cast<Index>(j)) = c[i][j];
        }
        d.append(Vector::Constant(2, 0.1 * static_cast<double>(i)), f[i], ci, static_cast<Index>(i));
    }
    return d;
}

optimizer::BatchPoint point(double x, double f, double violation) {
    return {Vector::Constant(2, x), optimizer::Outcome{f, violation, violation == 0.0}};
}

optimizer::VariantConfig small_config(Mode mode, Index evals) {
    optimizer::VariantConfig cfg;
    cfg.mode = mode;
    cfg.max_evals = evals;
    cfg.n_init = 10;
    cfg.batch = 4;
    cfg.seed = 3;
    if (mode != Mode::scbo) {
        cfg.components = 2;
    }
    return cfg;
}

}  // namespace

TEST_CASE("mode names") {
    CHECK(optimizer::parse_mode("scbo") == Mode::scbo);
    CHECK(optimizer::parse_mode("scbo_pca") == Mode::scbo_pca);
    CHECK(optimizer::parse_mode("scbo-kpca") == Mode::scbo_kpca);
    CHECK(optimizer::to_string(Mode::scbo_kpca) == "scbo_kpca");
    CHECK_THROWS_AS(optimizer::parse_mode("turbo"), ConfigError);
}

TEST_CASE("bilog examples") {
    CHECK(optimizer::bilog(0.0) == 0.0);
    CHECK(optimizer::bilog(std::numbers::e - 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(optimizer::bilog(-(std::numbers::e - 1.0)) == doctest::Approx(-1.0).epsilon(1e-15));
    numkit::Rng rng = numkit::make_rng(81);
    std::normal_distribution<double> normal(0.0, 100.0);
    for (int i = 0; i < 10000; ++i) {
        const double y = normal(rng);
        CHECK((optimizer::bilog(y) <= 0.0) == (y <= 0.0));
        CHECK(optimizer::bilog(-y) == -optimizer::bilog(y));
    }
    Matrix m(1, 2);
    m << -3.0, 5.0;
    CHECK(optimizer::bilog(m)(1) == doctest::Approx(std::log(6.0)));
}

TEST_CASE("total violation examples") {
    CHECK(optimizer::total_violation(Vector::Constant(3, -1.0)) == 0.0);
    Vector c(3);
    c << 0.5, -1.0, 2.0;
    CHECK(optimizer::total_violation(c) == 2.5);
}

TEST_CASE("selection examples") {
    Vector f(3);
    f << 2.0, -1.0, 0.5;
    const Matrix feasible = Matrix::Constant(3, 2, -1.0);
    CHECK(optimizer::select_one(f, feasible, {}) == 1);

    Matrix c(3, 1);
    c << 3.0, 0.1, 7.0;
    CHECK(optimizer::select_one(f, c, {}) == 1);
    CHECK(optimizer::select_one(f, c, {false, true, false}) == 0);

    Vector tie = Vector::Constant(3, 1.0);
    CHECK(optimizer::select_one(tie, feasible, {}) == 0);
}

TEST_CASE("select_batch never repeats a candidate") {
    const Vector f = Vector::LinSpaced(5, 0.0, 4.0);
    const Matrix c = Matrix::Constant(5, 2, -1.0);
    std::vector<Vector> fs(3, f);
    std::vector<Matrix> cs(3, c);
    CHECK(optimizer::select_batch(fs, cs) == std::vector<Index>{0, 1, 2});
    std::vector<Vector> too_many(6, f);
    std::vector<Matrix> too_many_c(6, c);
    CHECK_THROWS_AS(optimizer::select_batch(too_many, too_many_c), std::invalid_argument);
}

TEST_CASE("select_batch agrees with the brute-force rule") {
    numkit::Rng rng = numkit::make_rng(82);
    std::uniform_int_distribution<int> n_dist(1, 50);
    std::uniform_int_distribution<int> g_dist(1, 6);
    std::uniform_int_distribution<int> q_dist(1, 4);
    std::uniform_real_distribution<double> shift(-1.5, 1.0);
    std::uniform_int_distribution<int> coarse(-2, 2);
    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const Index n = n_dist(rng);
        const Index g = g_dist(rng);
        const Index q = std::min<Index>(q_dist(rng), n);
        const bool ties = trial % 3 == 0;
        std::vector<Vector> fs;
        std::vector<Matrix> cs;
        for (Index s = 0; s < q; ++s) {
            Vector f(n);
            Matrix c(n, g);
            for (Index i = 0; i < n; ++i) {
                f(i) = ties ? coarse(rng) : numkit::standard_normal(rng, 1)(0);
                for (Index j = 0; j < g; ++j) {
                    c(i, j) = ties ? 0.5 * coarse(rng) : numkit::standard_normal(rng, 1)(0) + shift(rng);
                }
            }
            fs.push_back(f);
            cs.push_back(c);
        }
        mismatches += optimizer::select_batch(fs, cs) == brute_force_select(fs, cs) ? 0 : 1;
    }
    CHECK(mismatches == 0);
}

TEST_CASE("incumbent examples") {
    const auto one_feasible = dataset({5.0, -100.0, 1.0}, {{1.0}, {2.0}, {-1.0}});
    CHECK(optimizer::incumbent(one_feasible).index == 2);
    CHECK(optimizer::incumbent(one_feasible).feasible);

    const auto infeasible = dataset({0.0, 0.0, 0.0}, {{2.0}, {1.0}, {5.0}});
    CHECK(optimizer::incumbent(infeasible).index == 1);
    CHECK_FALSE(optimizer::incumbent(infeasible).feasible);

    const auto tie = dataset({3.0, 3.0}, {{-1.0}, {-2.0}});
    CHECK(optimizer::incumbent(tie).index == 0);

    CHECK(optimizer::incumbent(optimizer::Dataset{}).index == -1);
}

TEST_CASE("trust region constants") {
    const auto tr = optimizer::TrustRegion::initial(Vector::Zero(10), 10, 4);
    CHECK(tr.failure_tolerance == 3);
    CHECK(tr.success_tolerance == 3);
    CHECK(tr.length == 0.8);
    CHECK(tr.length_min == std::pow(0.5, 7));
    CHECK(tr.length_max == 1.6);
    CHECK(optimizer::TrustRegion::initial(Vector::Zero(2), 2, 4).failure_tolerance == 1);
    CHECK(optimizer::TrustRegion::initial(Vector::Zero(7), 7, 1).failure_tolerance == 7);
}

TEST_CASE("trust region success moves the center") {
    auto tr = optimizer::TrustRegion::initial(Vector::Zero(2), 2, 4);
    const optimizer::Outcome before{1.0, 0.0, true};
    const std::vector<optimizer::BatchPoint> batch{point(0.3, 2.0, 0.0), point(0.7, 0.5, 0.0), point(0.9, 0.7, 0.0)};
    tr = optimizer::update_trust_region(tr, batch, before);
    CHECK(tr.success_count == 1);
    CHECK(tr.failure_count == 0);
    CHECK(tr.center(0) == 0.7);
    for (int i = 0; i < 2; ++i) {
        tr = optimizer::update_trust_region(tr, std::vector{point(0.1, -1.0 - i, 0.0)}, before);
    }
    CHECK(tr.length == 1.6);
    CHECK(tr.success_count == 0);
}

TEST_CASE("trust region failures shrink and finally request a restart") {
    auto tr = optimizer::TrustRegion::initial(Vector::Zero(4), 4, 1);
    tr.length_min = tr.length / 2.0;
    const optimizer::Outcome before{1.0, 0.0, true};
    const std::vector<optimizer::BatchPoint> worse{point(0.5, 3.0, 0.0)};
    for (int i = 0; i < tr.failure_tolerance - 1; ++i) {
        tr = optimizer::update_trust_region(tr, worse, before);
        CHECK_FALSE(tr.restart_pending);
    }
    tr = optimizer::update_trust_region(tr, worse, before);
    CHECK(tr.length == 0.4);
    CHECK(tr.restart_pending);
}

TEST_CASE("lower violation counts as success while nothing is feasible") {
    auto tr = optimizer::TrustRegion::initial(Vector::Zero(2), 2, 2);
    const optimizer::Outcome before{0.0, 2.0, false};
    tr = optimizer::update_trust_region(tr, std::vector{point(0.2, 9.0, 1.5), point(0.4, 9.0, 3.0)}, before);
    CHECK(tr.success_count == 1);
    CHECK(tr.center(0) == 0.2);
    tr = optimizer::update_trust_region(tr, std::vector{point(0.6, 9.0, 2.5)}, optimizer::Outcome{0.0, 1.5, false});
    CHECK(tr.failure_count == 1);
}

TEST_CASE("variant configs are validated") {
    optimizer::VariantConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.n_init = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.n_init = 10;
    cfg.batch = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.batch = 4;
    cfg.mode = Mode::scbo_pca;
    cfg.components = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.components = 1;
    cfg.max_evals = 5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("a budget equal to the design yields only the design") {
    const auto p = problems::make_problem("speed-reducer");
    auto cfg = small_config(Mode::scbo_pca, 10);
    const auto rec = optimizer::run(p, cfg);
    CHECK(rec.rows.size() == 10);
    CHECK(rec.iterations.empty());
    CHECK(rec.incumbent_row >= 0);
    for (const auto& row : rec.rows) {
        CHECK(row.tr_length == 0.0);
    }
}

TEST_CASE("runs grow the data monotonically and keep best-so-far non-increasing") {
    for (const Mode mode : {Mode::scbo, Mode::scbo_pca, Mode::scbo_kpca}) {
        const auto p = problems::make_problem("speed-reducer");
        const auto rec = optimizer::run(p, small_config(mode, 34));
        REQUIRE(rec.rows.size() == 34);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < rec.rows.size(); ++i) {
            const auto& row = rec.rows[i];
            CHECK(row.eval == static_cast<Index>(i));
            CHECK((row.x.array() >= p.lower.array()).all());
            CHECK((row.x.array() <= p.upper.array()).all());
            if (!std::isnan(row.best_feasible)) {
                CHECK(row.best_feasible <= best);
                best = row.best_feasible;
            }
            if (row.feasible) {
                CHECK(row.best_feasible <= row.f);
            }
        }
        for (const auto& it : rec.iterations) {
            CHECK(it.gp_fits == it.components + 1);
            CHECK(it.components == (mode == Mode::scbo ? 11 : 2));
        }
    }
}

TEST_CASE("full-rank reduction fits as many models as the full method") {
    const auto p = problems::make_problem("speed-reducer");
    auto full = small_config(Mode::scbo, 28);
    full.n_init = 20;
    auto reduced = full;
    reduced.mode = Mode::scbo_pca;
    reduced.components = 11;
    const auto a = optimizer::run(p, full);
    const auto b = optimizer::run(p, reduced);
    REQUIRE(a.iterations.size() == b.iterations.size());
    for (std::size_t i = 0; i < a.iterations.size(); ++i) {
        CHECK(a.iterations[i].gp_fits == 12);
        CHECK(b.iterations[i].gp_fits == 12);
        CHECK(b.iterations[i].subspace_error < 1e-20);
    }
}

TEST_CASE("threshold mode picks the component count from the data") {
    const auto p = problems::make_problem("loadcase:6x2:1:0");
    optimizer::VariantConfig cfg = small_config(Mode::scbo_pca, 22);
    cfg.components.reset();
    cfg.eigen_threshold = 1e-2;
    const auto rec = optimizer::run(p, cfg);
    for (const auto& it : rec.iterations) {
        CHECK(it.components >= 1);
        CHECK(it.components <= 12);
    }
}

TEST_CASE("runs are deterministic") {
    const auto p = problems::make_problem("ackley10");
    optimizer::VariantConfig cfg;
    cfg.mode = Mode::scbo_pca;
    cfg.components = 1;
    cfg.seed = 0;
    cfg.max_evals = 200;
    const auto a = optimizer::run(p, cfg);
    const auto b = optimizer::run(p, cfg);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].x == b.rows[i].x);
        CHECK(a.rows[i].f == b.rows[i].f);
        CHECK(a.rows[i].tr_length == b.rows[i].tr_length);
    }
    CHECK(a.incumbent_row == b.incumbent_row);
}

TEST_CASE("failed evaluations are recorded and skipped") {
    problems::Problem p = problems::make_problem("speed-reducer");
    const auto inner = p.evaluate;
    p.evaluate = [inner](const Vector& x) {
        if (x(0) > 3.4) {
            throw std::runtime_error("solver diverged");
        }
        problems::Evaluation e = inner(x);
        if (x(0) < 2.7) {
            e.objective = std::numeric_limits<double>::quiet_NaN();
        }
        return e;
    };
    const auto rec = optimizer::run(p, small_config(Mode::scbo, 30));
    CHECK(rec.rows.size() == 30);
    Index failed = 0;
    for (const auto& row : rec.rows) {
        if (row.failed) {
            ++failed;
            CHECK(std::isnan(row.f));
            CHECK(std::isinf(row.violation));
            CHECK_FALSE(row.feasible);
        }
    }
    CHECK(failed > 0);
}

TEST_CASE("analytic blocks are enforced on every proposed point") {
    problems::Problem p = problems::make_problem("ackley10");
    design::AnalyticBlockSpec spec;
    spec.blocks.push_back({0, 2, [](std::span<const double> x) { return x[0] + x[1] <= 1.0; }});
    p.analytic_blocks = spec;
    const auto rec = optimizer::run(p, small_config(Mode::scbo, 30));
    for (const auto& row : rec.rows) {
        if (row.tr_length > 0.0) {
            CHECK(row.x(0) + row.x(1) <= 1.0 + 1e-12);
        }
    }
}
