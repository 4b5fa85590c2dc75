#include "lscbo/problems.hpp"

#include "lscbo/errors.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lscbo::problems {

Vector Problem::to_physical(const Vector& unit) const {
    return lower + (upper - lower).cwiseProduct(unit);
}

Vector Problem::to_unit(const Vector& physical) const {
    return (physical - lower).cwiseQuotient(upper - lower);
}

void Problem::validate() const {
    if (dim < 1 || lower.size() != dim || upper.size() != dim) {
        throw std::invalid_argument("problem '" + name + "': bounds do not match dimension");
    }
    if ((upper.array() <= lower.array()).any()) {
        throw std::invalid_argument("problem '" + name + "': lower bound not below upper bound");
    }
    if (!evaluate) {
        throw std::invalid_argument("problem '" + name + "': missing evaluator");
    }
    if (analytic_blocks) {
        analytic_blocks->validate(dim);
    }
}

double ackley(const Vector& x) {
    const double n = static_cast<double>(x.size());
    const double mean_sq = x.squaredNorm() / n;
    const double mean_cos = (2.0 * std::numbers::pi * x.array()).cos().sum() / n;
    return 20.0 + std::numbers::e - 20.0 * std::exp(-0.2 * std::sqrt(mean_sq)) - std::exp(mean_cos);
}

Problem ackley_constrained() {
    Problem p;
    p.name = "ackley10";
    p.dim = 10;
    p.lower = Vector::Constant(10, -5.0);
    p.upper = Vector::Constant(10, 10.0);
    p.n_constraints = 2;
    p.evaluate = [](const Vector& x) {
        Evaluation e;
        e.objective = ackley(x);
        e.constraints.resize(2);
        e.constraints(0) = x.sum();
        e.constraints(1) = x.norm() - 5.0;
        return e;
    };
    return p;
}

Evaluation speed_reducer_eval(const Vector& x) {
    const double x1 = x(0), x2 = x(1), x3 = x(2), x4 = x(3), x5 = x(4), x6 = x(5), x7 = x(6);
    Evaluation e;
    e.objective = 0.7854 * x1 * x2 * x2 * (3.3333 * x3 * x3 + 14.9334 * x3 - 43.0934) -
                  1.508 * x1 * (x6 * x6 + x7 * x7) + 7.4777 * (x6 * x6 * x6 + x7 * x7 * x7) +
                  0.7854 * (x4 * x6 * x6 + x5 * x7 * x7);
    e.constraints.resize(11);
    Vector& c = e.constraints;
    c(0) = 27.0 / (x1 * x2 * x2 * x3) - 1.0;
    c(1) = 397.5 / (x1 * x2 * x2 * x3 * x3) - 1.0;
    c(2) = 1.93 * x4 * x4 * x4 / (x2 * x3 * std::pow(x6, 4)) - 1.0;
    c(3) = 1.93 * x5 * x5 * x5 / (x2 * x3 * std::pow(x7, 4)) - 1.0;
    c(4) = std::sqrt(std::pow(745.0 * x4 / (x2 * x3), 2) + 16.9e6) / (110.0 * x6 * x6 * x6) - 1.0;
    c(5) = std::sqrt(std::pow(745.0 * x5 / (x2 * x3), 2) + 157.5e6) / (85.0 * x7 * x7 * x7) - 1.0;
    c(6) = x2 * x3 / 40.0 - 1.0;
    c(7) = 5.0 * x2 / x1 - 1.0;
    c(8) = x1 / (12.0 * x2) - 1.0;
    c(9) = (1.5 * x6 + 1.9) / x4 - 1.0;
    c(10) = (1.1 * x7 + 1.9) / x5 - 1.0;
    return e;
}

Problem speed_reducer() {
    Problem p;
    p.name = "speed-reducer";
    p.dim = 7;
    p.lower.resize(7);
    p.upper.resize(7);
    p.lower << 2.6, 0.7, 17.0, 7.3, 7.3, 2.9, 5.0;
    p.upper << 3.6, 0.8, 28.0, 8.3, 8.3, 3.9, 5.5;
    p.n_constraints = 11;
    p.evaluate = speed_reducer_eval;
    return p;
}

LoadcaseFamilySpec LoadcaseFamilySpec::with_defaults(Index n_base, Index m, std::uint64_t seed, double noise_spread) {
    LoadcaseFamilySpec spec;
    spec.n_base = n_base;
    spec.m = m;
    spec.seed = seed;
    spec.noise_spread = noise_spread;
    for (Index k = 0; k < m; ++k) {
        spec.load_scales.push_back(1.0 + 0.5 * static_cast<double>(k));
    }
    return spec;
}

void LoadcaseFamilySpec::validate() const {
    if (n_base < 1 || m < 1) {
        throw std::invalid_argument("loadcase family: n_base and m must be positive");
    }
    if (static_cast<Index>(load_scales.size()) != m) {
        throw std::invalid_argument("loadcase family: need one load scale per loadcase");
    }
    for (double s : load_scales) {
        if (!(s > 0.0)) {
            throw std::invalid_argument("loadcase family: load scales must be positive");
        }
    }
    if (!(noise_spread >= 0.0)) {
        throw std::invalid_argument("loadcase family: noise_spread must be non-negative");
    }
}

namespace {

// Smooth latent responses shared by every constraint; even features are sinusoids, odd ones
// quadratic ridges. Weights decay geometrically so the constraint spectrum decays too.
struct LatentFeatures {
    static constexpr Index kCount = 24;
    static constexpr double kDecay = 0.72;

    Matrix directions;  // kCount x D
    Vector phases;
    Vector offsets;

    explicit LatentFeatures(numkit::Rng& rng) {
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        directions.resize(kCount, kLoadcaseDim);
        phases.resize(kCount);
        offsets.resize(kCount);
        for (Index r = 0; r < kCount; ++r) {
            for (Index d = 0; d < kLoadcaseDim; ++d) {
                directions(r, d) = normal(rng);
            }
            directions.row(r).normalize();
            directions.row(r) *= 2.0 + 2.0 * unit(rng);
            phases(r) = 2.0 * std::numbers::pi * unit(rng);
            offsets(r) = unit(rng);
        }
    }

    Vector eval(const Vector& x) const {
        Vector phi(kCount);
        const Vector centered = (x.array() - 0.5).matrix();
        for (Index r = 0; r < kCount; ++r) {
            const double t = directions.row(r).dot(centered);
            phi(r) = (r % 2 == 0) ? std::sin(t + phases(r)) : 0.5 * (t - offsets(r)) * (t - offsets(r)) - 0.5;
        }
        return phi;
    }
};

Matrix decaying_weights(Index rows, numkit::Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix w(rows, LatentFeatures::kCount);
    for (Index r = 0; r < LatentFeatures::kCount; ++r) {
        const double scale = std::pow(LatentFeatures::kDecay, static_cast<double>(r));
        for (Index j = 0; j < rows; ++j) {
            w(j, r) = normal(rng) * scale;
        }
    }
    return w;
}

}  // namespace

Problem make_loadcase_family(const LoadcaseFamilySpec& spec) {
    spec.validate();
    numkit::Rng rng = numkit::make_rng(spec.seed, 0x10ad);
    const LatentFeatures features(rng);
    const Matrix base_weights = decaying_weights(spec.n_base, rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vector reference(kLoadcaseDim);
    Vector optimum(kLoadcaseDim);
    Vector curvature(kLoadcaseDim);
    for (Index d = 0; d < kLoadcaseDim; ++d) {
        reference(d) = 0.3 + 0.4 * unit(rng);
        optimum(d) = unit(rng);
        curvature(d) = 0.5 + unit(rng);
    }
    // Drawn last so that a family with more loadcases extends one with fewer.
    std::vector<Matrix> perturbations;
    for (Index k = 0; k < spec.m; ++k) {
        perturbations.push_back(decaying_weights(spec.n_base, rng));
    }
    // The reference point is strictly feasible for every constraint by construction.
    const Vector phi_ref = features.eval(reference);
    const Vector base_ref = base_weights * phi_ref;
    const Vector margins = 0.2 * base_weights.cwiseAbs().rowwise().sum();
    std::vector<Vector> perturbation_ref;
    for (const Matrix& p : perturbations) {
        perturbation_ref.push_back(p * phi_ref);
    }

    Problem problem;
    problem.name = "loadcase:" + std::to_string(spec.n_base) + "x" + std::to_string(spec.m) + ":" +
                   std::to_string(spec.seed);
    problem.dim = kLoadcaseDim;
    problem.lower = Vector::Zero(kLoadcaseDim);
    problem.upper = Vector::Ones(kLoadcaseDim);
    problem.n_constraints = spec.n_base * spec.m;
    problem.evaluate = [=](const Vector& x) {
        const Vector phi = features.eval(x);
        const Vector base = base_weights * phi - base_ref - margins;
        Evaluation e;
        e.objective = (x - optimum).cwiseProduct(x - optimum).dot(curvature);
        e.constraints.resize(spec.n_base * spec.m);
        for (Index k = 0; k < spec.m; ++k) {
            const auto sk = static_cast<std::size_t>(k);
            e.constraints.segment(k * spec.n_base, spec.n_base) =
                spec.load_scales[sk] * base + spec.noise_spread * (perturbations[sk] * phi - perturbation_ref[sk]);
        }
        return e;
    };
    return problem;
}

namespace {

template <typename T>
T parse_number(std::string_view text, std::string_view whole) {
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ConfigError("malformed problem name: " + std::string(whole));
    }
    return value;
}

}  // namespace

Problem make_problem(std::string_view name) {
    if (name == "ackley10") {
        return ackley_constrained();
    }
    if (name == "speed-reducer") {
        return speed_reducer();
    }
    constexpr std::string_view prefix = "loadcase:";
    if (name.starts_with(prefix)) {
        std::string_view rest = name.substr(prefix.size());
        const auto x_pos = rest.find('x');
        const auto colon = rest.find(':');
        if (x_pos == std::string_view::npos || colon == std::string_view::npos || x_pos > colon) {
            throw ConfigError("malformed problem name: " + std::string(name));
        }
        const auto n_base = parse_number<Index>(rest.substr(0, x_pos), name);
        const auto m = parse_number<Index>(rest.substr(x_pos + 1, colon - x_pos - 1), name);
        std::string_view tail = rest.substr(colon + 1);
        double noise = 0.05;
        const auto colon2 = tail.find(':');
        if (colon2 != std::string_view::npos) {
            noise = parse_number<double>(tail.substr(colon2 + 1), name);
            tail = tail.substr(0, colon2);
        }
        const auto seed = parse_number<std::uint64_t>(tail, name);
        if (n_base < 1 || m < 1) {
            throw ConfigError("malformed problem name: " + std::string(name));
        }
        Problem p = make_loadcase_family(LoadcaseFamilySpec::with_defaults(n_base, m, seed, noise));
        p.name = std::string(name);
        return p;
    }
    throw ConfigError("unknown problem: " + std::string(name));
}

std::vector<std::string> registered_names() {
    return {"ackley10", "speed-reducer", "loadcase:<n_base>x<m>:<seed>[:<noise_spread>]"};
}

}  // namespace lscbo::problems
