#pragma once

#include "lscbo/design.hpp"
#include "lscbo/numkit.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lscbo::problems {

using numkit::Index;
using numkit::Matrix;
using numkit::Vector;

struct Evaluation {
    double objective = 0.0;
    Vector constraints;  // c_i(x) <= 0 is feasible
};

/// Maps a physical-space point to objective and constraints. May throw or return non-finite
/// values; the optimizer records those as failed evaluations.
using Evaluator = std::function<Evaluation(const Vector& x)>;

struct Problem {
    std::string name;
    Index dim = 0;
    Vector lower;
    Vector upper;
    Index n_constraints = 0;
    Evaluator evaluate;
    /// Analytic feasibility blocks; predicates see physical coordinates.
    std::optional<design::AnalyticBlockSpec> analytic_blocks;
    bool reentrant = true;

    Vector to_physical(const Vector& unit) const;
    Vector to_unit(const Vector& physical) const;
    void validate() const;
};

/// Standard 10-D Ackley on [-5, 10]^10 with c1 = sum x_i and c2 = ||x||_2 - 5.
Problem ackley_constrained();

double ackley(const Vector& x);

/// 7-D speed reducer (gear-train weight) with 11 inequality constraints.
Problem speed_reducer();

Evaluation speed_reducer_eval(const Vector& x);

struct LoadcaseFamilySpec {
    Index n_base = 10;
    Index m = 1;
    std::vector<double> load_scales;  // one per loadcase
    double noise_spread = 0.0;
    std::uint64_t seed = 0;

    /// Scales 1, 1.5, 2, ... for m loadcases.
    static LoadcaseFamilySpec with_defaults(Index n_base, Index m, std::uint64_t seed, double noise_spread);
    void validate() const;
};

inline constexpr Index kLoadcaseDim = 12;

/// Synthetic multi-loadcase family: n_base smooth seeded base constraints, replicated per
/// loadcase as scale_k * g_j(x) plus a seeded x-dependent perturbation of size noise_spread.
/// Constraint (j, k) sits at column k * n_base + j.
Problem make_loadcase_family(const LoadcaseFamilySpec& spec);

/// "ackley10", "speed-reducer", or "loadcase:<n_base>x<m>:<seed>[:<noise_spread>]".
/// Throws ConfigError for unknown names.
Problem make_problem(std::string_view name);

std::vector<std::string> registered_names();

}  // namespace lscbo::problems
