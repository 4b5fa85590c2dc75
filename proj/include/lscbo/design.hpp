#pragma once

#include "lscbo/numkit.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace lscbo::design {

using numkit::Index;
using numkit::Matrix;
using numkit::Rng;
using numkit::Vector;

enum class Provenance { doe, trust_region };

/// Candidate points in the unit cube together with the box they were drawn from.
struct CandidateSet {
    Matrix points;  // N_c x D
    Provenance provenance = Provenance::doe;
    Vector center;
    Vector lower;
    Vector upper;

    Index size() const { return points.rows(); }
};

/// A contiguous coordinate range [begin, end) with its own analytic feasibility test.
struct AnalyticBlock {
    Index begin = 0;
    Index end = 0;
    std::function<bool(std::span<const double>)> feasible;
};

struct AnalyticBlockSpec {
    std::vector<AnalyticBlock> blocks;
    int max_retries = 100;

    /// Throws std::invalid_argument when blocks overlap or leave [0, dim).
    void validate(Index dim) const;
};

/// One jittered sample per stratum per dimension.
Matrix latin_hypercube(Index n, Index d, Rng& rng);

Index max_sobol_dimension();

/// First n points of a digitally shifted Sobol sequence in [0,1)^d. Throws DimensionUnsupported.
Matrix sobol_stream(Index n, Index d, std::uint64_t seed);

/// Per-dimension edge lengths L_i = l_i L / (prod_j l_j)^(1/D).
Vector trust_region_lengths(const Vector& lengthscales, double base_length);

Index default_candidate_count(Index dim);
double default_perturb_prob(Index dim);

/// Sobol candidates in the lengthscale-shaped box around `center`, each perturbing a random
/// coordinate subset (probability `perturb_prob` per coordinate, at least one).
CandidateSet trust_region_candidates(const Vector& center, const Vector& lengthscales, double base_length,
                                     Index n_candidates, double perturb_prob, Rng& rng);

/// Redraws infeasible blocks inside the candidate box; falls back to the center's block values,
/// dropping candidates whose fallback is infeasible too. Throws UnrepairableBlock if nothing survives.
CandidateSet repair_analytic(const CandidateSet& candidates, const AnalyticBlockSpec& spec, Rng& rng);

}  // namespace lscbo::design
