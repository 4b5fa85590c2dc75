#include "lscbo/design.hpp"

#include "lscbo/errors.hpp"

#include <boost/random/sobol.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>

namespace lscbo::design {

void AnalyticBlockSpec::validate(Index dim) const {
    std::vector<bool> used(static_cast<std::size_t>(dim), false);
    for (const AnalyticBlock& block : blocks) {
        if (block.begin < 0 || block.end > dim || block.begin >= block.end) {
            throw std::invalid_argument("analytic block outside the design dimensions");
        }
        if (!block.feasible) {
            throw std::invalid_argument("analytic block without predicate");
        }
        for (Index i = block.begin; i < block.end; ++i) {
            if (used[static_cast<std::size_t>(i)]) {
                throw std::invalid_argument("analytic blocks overlap");
            }
            used[static_cast<std::size_t>(i)] = true;
        }
    }
    if (max_retries < 0) {
        throw std::invalid_argument("max_retries must be non-negative");
    }
}

Matrix latin_hypercube(Index n, Index d, Rng& rng) {
    if (n < 1 || d < 1) {
        throw std::invalid_argument("latin_hypercube: n and d must be positive");
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix out(n, d);
    std::vector<Index> perm(static_cast<std::size_t>(n));
    for (Index j = 0; j < d; ++j) {
        std::iota(perm.begin(), perm.end(), Index{0});
        for (Index i = n - 1; i > 0; --i) {
            std::uniform_int_distribution<Index> pick(0, i);
            std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
        }
        for (Index i = 0; i < n; ++i) {
            out(i, j) = (static_cast<double>(perm[static_cast<std::size_t>(i)]) + unit(rng)) / static_cast<double>(n);
        }
    }
    return out;
}

Index max_sobol_dimension() {
    return static_cast<Index>(boost::random::default_sobol_table::max_dimension);
}

Matrix sobol_stream(Index n, Index d, std::uint64_t seed) {
    if (d < 1 || d > max_sobol_dimension()) {
        throw DimensionUnsupported("sobol_stream: dimension " + std::to_string(d) + " not supported");
    }
    Rng rng = numkit::make_rng(seed, 0x50b01);
    std::vector<std::uint64_t> shift(static_cast<std::size_t>(d));
    for (auto& s : shift) {
        s = rng();
    }
    boost::random::sobol engine(static_cast<std::size_t>(d));
    constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
    Matrix out(n, d);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < d; ++j) {
            const std::uint64_t bits = static_cast<std::uint64_t>(engine()) ^ shift[static_cast<std::size_t>(j)];
            out(i, j) = static_cast<double>(bits >> 11) * kScale;
        }
    }
    return out;
}

Vector trust_region_lengths(const Vector& lengthscales, double base_length) {
    if ((lengthscales.array() <= 0.0).any()) {
        throw std::invalid_argument("trust_region_lengths: lengthscales must be positive");
    }
    const double log_geomean = lengthscales.array().log().mean();
    return lengthscales * (base_length / std::exp(log_geomean));
}

Index default_candidate_count(Index dim) {
    return std::min<Index>(100 * dim, 5000);
}

double default_perturb_prob(Index dim) {
    return std::min(1.0, 20.0 / static_cast<double>(dim));
}

CandidateSet trust_region_candidates(const Vector& center, const Vector& lengthscales, double base_length,
                                     Index n_candidates, double perturb_prob, Rng& rng) {
    const Index d = center.size();
    if (lengthscales.size() != d || n_candidates < 1 || !(base_length > 0.0)) {
        throw std::invalid_argument("trust_region_candidates: invalid arguments");
    }
    const Vector half = 0.5 * trust_region_lengths(lengthscales, base_length);
    CandidateSet set;
    set.provenance = Provenance::trust_region;
    set.center = center;
    set.lower = (center - half).cwiseMax(0.0);
    set.upper = (center + half).cwiseMin(1.0);

    const Matrix sobol = sobol_stream(n_candidates, d, rng());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<Index> any_dim(0, d - 1);
    set.points.resize(n_candidates, d);
    for (Index i = 0; i < n_candidates; ++i) {
        std::vector<bool> perturb(static_cast<std::size_t>(d));
        bool any = false;
        for (Index j = 0; j < d; ++j) {
            perturb[static_cast<std::size_t>(j)] = unit(rng) < perturb_prob;
            any = any || perturb[static_cast<std::size_t>(j)];
        }
        if (!any) {
            perturb[static_cast<std::size_t>(any_dim(rng))] = true;
        }
        for (Index j = 0; j < d; ++j) {
            set.points(i, j) = perturb[static_cast<std::size_t>(j)]
                                   ? set.lower(j) + (set.upper(j) - set.lower(j)) * sobol(i, j)
                                   : center(j);
        }
    }
    return set;
}

CandidateSet repair_analytic(const CandidateSet& candidates, const AnalyticBlockSpec& spec, Rng& rng) {
    const Index d = candidates.points.cols();
    spec.validate(d);
    const Vector lower = candidates.lower.size() == d ? candidates.lower : Vector::Zero(d);
    const Vector upper = candidates.upper.size() == d ? candidates.upper : Vector::Ones(d);
    const Vector center = candidates.center.size() == d ? candidates.center : Vector((lower + upper) / 2);

    auto block_ok = [](const AnalyticBlock& block, const Vector& x) {
        return block.feasible(std::span<const double>(x.data() + block.begin,
                                                      static_cast<std::size_t>(block.end - block.begin)));
    };
    std::vector<bool> center_ok;
    for (const AnalyticBlock& block : spec.blocks) {
        center_ok.push_back(block_ok(block, center));
    }

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Vector> kept;
    std::optional<std::size_t> first_failure;
    for (Index i = 0; i < candidates.size(); ++i) {
        Vector x = candidates.points.row(i).transpose();
        bool keep = true;
        for (std::size_t b = 0; b < spec.blocks.size() && keep; ++b) {
            const AnalyticBlock& block = spec.blocks[b];
            if (block_ok(block, x)) {
                continue;
            }
            Vector trial = x;
            bool repaired = false;
            for (int attempt = 0; attempt < spec.max_retries; ++attempt) {
                for (Index j = block.begin; j < block.end; ++j) {
                    trial(j) = lower(j) + (upper(j) - lower(j)) * unit(rng);
                }
                if (block_ok(block, trial)) {
                    repaired = true;
                    break;
                }
            }
            if (repaired) {
                x.segment(block.begin, block.end - block.begin) = trial.segment(block.begin, block.end - block.begin);
            } else if (center_ok[b]) {
                x.segment(block.begin, block.end - block.begin) = center.segment(block.begin, block.end - block.begin);
            } else {
                keep = false;
                if (!first_failure) {
                    first_failure = b;
                }
            }
        }
        if (keep) {
            kept.push_back(std::move(x));
        }
    }
    if (kept.empty() && candidates.size() > 0) {
        throw UnrepairableBlock(first_failure.value_or(0));
    }

    CandidateSet out = candidates;
    out.points.resize(static_cast<Index>(kept.size()), d);
    for (std::size_t r = 0; r < kept.size(); ++r) {
        out.points.row(static_cast<Index>(r)) = kept[r].transpose();
    }
    return out;
}

}  // namespace lscbo::design
