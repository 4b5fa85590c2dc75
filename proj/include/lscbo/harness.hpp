#pragma once

#include "lscbo/errors.hpp"
#include "lscbo/numkit.hpp"
#include "lscbo/optimizer.hpp"
#include "lscbo/problems.hpp"
#include "lscbo/reduction.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lscbo::harness {

using numkit::Index;
using numkit::Matrix;
using numkit::Vector;

/// One named algorithm variant. Unset fields fall back to the experiment-wide values.
struct VariantSpec {
    std::string name;
    optimizer::Mode mode = optimizer::Mode::scbo;
    std::optional<Index> components;
    std::optional<double> threshold;
    std::optional<reduction::KernelKind> kernel;
    std::optional<Index> n_init;
};

struct ExperimentConfig {
    std::string problem;
    std::vector<VariantSpec> variants;
    std::vector<std::uint64_t> seeds{0};
    Index max_evals = 200;
    Index batch = 4;
    Index n_init = 10;
    std::optional<Index> components;
    std::optional<double> threshold;
    reduction::KernelKind kernel = reduction::KernelKind::exponential;
    std::filesystem::path out = "runs";
    /// Record wall-clock fit times in the run CSVs. Off by default so outputs are byte-stable.
    bool timing = false;

    /// Throws ConfigError. Also checks that the problem name resolves.
    void validate() const;
    optimizer::VariantConfig resolve(const VariantSpec& variant, std::uint64_t seed) const;
};

/// Parses the TOML subset used by experiment files:
///
///     [experiment]
///     problem = "speed-reducer"
///     seeds = [0, 1, 2]
///     evals = 300
///     out = "runs/speed"
///
///     [variants.scbo_pca]
///     mode = "scbo_pca"
///     g = 4
///
/// Supported: table headers, `key = value` with strings, integers, floats, booleans and
/// one-line arrays, and `#` comments. Errors carry the line number.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Command-line values that replace the config file's.
struct Overrides {
    std::optional<std::string> problem;
    std::vector<std::string> variants;  // keep only these; unknown names that are modes become new variants
    std::vector<std::uint64_t> seeds;
    std::optional<Index> max_evals;
    std::optional<Index> batch;
    std::optional<Index> n_init;
    std::optional<Index> components;
    std::optional<double> threshold;
    std::optional<reduction::KernelKind> kernel;
    std::optional<std::filesystem::path> out;
    std::optional<bool> timing;
};

void apply_overrides(ExperimentConfig& cfg, const Overrides& overrides);

/// Worker count from LSCBO_WORKERS, defaulting to the hardware concurrency.
int worker_count_from_env();

std::string run_file_name(const std::string& variant, std::uint64_t seed);

/// CSV columns: eval,seed,variant,x_1..x_D,f,violation,feasible,best_feasible,tr_length,fit_ms.
/// Floats use the shortest representation that round-trips.
void write_run_csv(std::ostream& out, const optimizer::RunRecord& record, const std::string& variant,
                   bool timing);

struct RunTable {
    std::string variant;
    std::uint64_t seed = 0;
    Index dim = 0;
    std::vector<optimizer::EvalRow> rows;
};

/// Throws ParseError with the offending line number.
RunTable parse_run_csv(std::istream& in);
RunTable read_run_csv(const std::filesystem::path& path);

class ParseError : public Error {
public:
    ParseError(const std::string& message, Index line)
        : Error("line " + std::to_string(line) + ": " + message), line_(line) {}
    Index line() const noexcept { return line_; }

private:
    Index line_;
};

struct RunResult {
    std::string variant;
    std::uint64_t seed = 0;
    std::filesystem::path csv;
    optimizer::RunRecord record;
};

/// Runs every (variant, seed) pair on `workers` threads and writes one CSV per run plus
/// summary.json into cfg.out. Nothing is written if the config does not validate.
std::vector<RunResult> run_experiment(const ExperimentConfig& cfg, int workers);

/// Index of the first feasible row, or -1.
Index first_feasible(const std::vector<optimizer::EvalRow>& rows);

/// Best-feasible curves with infeasible prefixes replaced by `fill`, extended to `length` by
/// carrying the last value.
std::vector<double> filled_curve(const std::vector<optimizer::EvalRow>& rows, double fill, std::size_t length);

/// Linear-interpolation quantile of unsorted values (q in [0, 1]).
double quantile(std::vector<double> values, double q);

struct CurvePoint {
    Index eval = 0;
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
};

struct VariantSummary {
    std::string variant;
    std::vector<std::uint64_t> seeds;
    std::vector<CurvePoint> curve;
    double mean_fit_ms = 0.0;
    double median_fit_ms = 0.0;
    Index runs_with_feasible = 0;
    std::optional<double> median_first_feasible;
    std::optional<Index> min_first_feasible;
    std::optional<Index> max_first_feasible;
    double median_final = 0.0;
};

struct SummaryTable {
    double fill_value = 0.0;  // largest feasible objective found by any compared run; NaN if none
    std::vector<VariantSummary> variants;
};

/// Summarizes runs grouped by variant (sorted by name).
SummaryTable summarize(const std::vector<RunTable>& runs);

/// Reads every run CSV in `dir`, writes comparison.csv (variant,eval,median,q25,q75) and
/// comparison.json, and returns the table. Throws MissingRuns if summary.json lists runs whose
/// files are absent.
SummaryTable compare_variants(const std::filesystem::path& dir);

class MissingRuns : public Error {
public:
    explicit MissingRuns(std::vector<std::string> names);
    const std::vector<std::string>& names() const noexcept { return names_; }

private:
    std::vector<std::string> names_;
};

void write_comparison_csv(std::ostream& out, const SummaryTable& table);

/// Numeric CSV matrix; a non-numeric first line is treated as a header.
Matrix parse_matrix_csv(std::istream& in);
Matrix read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(std::ostream& out, const Matrix& m, const std::vector<std::string>& header);

struct SpectrumReport {
    std::vector<reduction::SpectrumRow> rows;
    std::vector<std::pair<double, Index>> components_at_threshold;
    Index train_rows = 0;
    Index test_rows = 0;
    std::vector<std::pair<Index, double>> holdout_error;  // (g, epsilon), empty without a test split
};

/// Spectrum of the full matrix, component counts per threshold, and the hold-out error sweep
/// g = 1..rank with the last round(test_fraction * N) rows held out.
SpectrumReport analyze_spectrum(const Matrix& c, const std::vector<double>& thresholds, double test_fraction);

void write_spectrum_report(std::ostream& out, const SpectrumReport& report);

/// Constraint matrix of `n` Latin-hypercube samples of a problem (rows = samples).
Matrix sample_constraints(const problems::Problem& problem, Index n, std::uint64_t seed);

}  // namespace lscbo::harness
