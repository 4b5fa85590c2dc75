#include "lscbo/errors.hpp"
#include "lscbo/harness.hpp"
#include "lscbo/problems.hpp"
#include "lscbo/reduction.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

using namespace lscbo;

int run_command(const std::string& config_path, const harness::Overrides& overrides) {
    harness::ExperimentConfig cfg;
    if (!config_path.empty()) {
        cfg = harness::load_config(config_path);
    }
    harness::apply_overrides(cfg, overrides);
    cfg.validate();
    const int workers = harness::worker_count_from_env();
    const std::vector<harness::RunResult> results = harness::run_experiment(cfg, workers);
    for (const harness::RunResult& r : results) {
        const double best = r.record.final_best_feasible();
        std::cout << r.variant << " seed " << r.seed << ": " << r.record.rows.size() << " evaluations, best feasible "
                  << (std::isnan(best) ? std::string("none") : std::to_string(best)) << '\n';
    }
    std::cout << "wrote " << results.size() << " runs to " << cfg.out.string() << '\n';
    return 0;
}

int spectrum_command(const std::string& input, const std::vector<double>& thresholds, double test_fraction,
                     bool apply_bilog) {
    numkit::Matrix c = harness::read_matrix_csv(input);
    if (apply_bilog) {
        c = optimizer::bilog(c);
    }
    harness::write_spectrum_report(std::cout, harness::analyze_spectrum(c, thresholds, test_fraction));
    return 0;
}

int compare_command(const std::string& dir) {
    const harness::SummaryTable table = harness::compare_variants(dir);
    std::cout << "fill value " << table.fill_value << '\n';
    for (const harness::VariantSummary& v : table.variants) {
        std::cout << v.variant << ": " << v.seeds.size() << " runs, " << v.runs_with_feasible
                  << " feasible, median final " << v.median_final << ", mean fit " << v.mean_fit_ms << " ms\n";
    }
    return 0;
}

int sample_command(const std::string& problem_name, numkit::Index n, std::uint64_t seed, const std::string& out,
                   bool apply_bilog) {
    const problems::Problem problem = problems::make_problem(problem_name);
    if (n < 2) {
        throw ConfigError("--n must be at least 2");
    }
    numkit::Matrix c = harness::sample_constraints(problem, n, seed);
    if (apply_bilog) {
        c = optimizer::bilog(c);
    }
    std::vector<std::string> header;
    for (numkit::Index j = 0; j < c.cols(); ++j) {
        header.push_back("c_" + std::to_string(j + 1));
    }
    if (out.empty() || out == "-") {
        harness::write_matrix_csv(std::cout, c, header);
    } else {
        std::ofstream file(out, std::ios::binary | std::ios::trunc);
        harness::write_matrix_csv(file, c, header);
        if (!file) {
            throw Error("cannot write " + out);
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trust-region constrained Bayesian optimization with reduced constraint models"};
    app.require_subcommand(1);

    std::string config_path;
    harness::Overrides overrides;
    std::optional<std::string> problem;
    std::vector<std::string> variants;
    std::vector<std::uint64_t> seeds;
    std::optional<numkit::Index> evals, batch, init, g;
    std::optional<double> threshold;
    std::optional<std::string> kernel, out;
    bool timing = false;

    CLI::App* run = app.add_subcommand("run", "Run an experiment and write one CSV per (variant, seed)");
    run->add_option("--config", config_path, "Experiment file (TOML)");
    run->add_option("--problem", problem, "Problem name (ackley10, speed-reducer, loadcase:<n>x<m>:<seed>)");
    run->add_option("--variant", variants, "Variant name(s) to run; mode names create variants");
    run->add_option("--seed", seeds, "Seed(s)");
    run->add_option("--evals", evals, "Evaluation budget per run");
    run->add_option("--batch", batch, "Batch size q");
    run->add_option("--init", init, "Initial design size");
    run->add_option("--g", g, "Reduced component count");
    run->add_option("--threshold", threshold, "Normalized singular value threshold (instead of --g)");
    run->add_option("--kernel", kernel, "kPCA kernel: linear, exponential, squared-exponential");
    run->add_flag("--timing", timing, "Record GP fit wall time in the run CSVs");
    run->add_option("--out", out, "Output directory");

    std::string spectrum_input;
    std::vector<double> thresholds{1e-1, 1e-2, 1e-3};
    double test_fraction = 0.2;
    bool spectrum_bilog = false;
    CLI::App* spectrum = app.add_subcommand("spectrum", "Singular value spectrum and hold-out error of a constraint matrix");
    spectrum->add_option("--input", spectrum_input, "Constraint matrix CSV (rows = samples)")->required();
    spectrum->add_option("--thresholds", thresholds, "Normalized singular value thresholds");
    spectrum->add_option("--test-fraction", test_fraction, "Fraction of trailing rows held out");
    spectrum->add_flag("--bilog", spectrum_bilog, "Apply the bilog transform first");

    std::string compare_dir;
    CLI::App* compare = app.add_subcommand("compare", "Summarize the runs in a directory");
    compare->add_option("--dir", compare_dir, "Run directory")->required();

    std::string sample_problem, sample_out;
    numkit::Index sample_n = 100;
    std::uint64_t sample_seed = 0;
    bool sample_bilog = false;
    CLI::App* sample = app.add_subcommand("sample", "Write the constraint matrix of a Latin hypercube sample");
    sample->add_option("--problem", sample_problem, "Problem name")->required();
    sample->add_option("--n", sample_n, "Number of samples");
    sample->add_option("--seed", sample_seed, "Seed");
    sample->add_option("--out", sample_out, "Output CSV (default stdout)");
    sample->add_flag("--bilog", sample_bilog, "Apply the bilog transform");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    try {
        if (*run) {
            overrides.problem = problem;
            overrides.variants = variants;
            overrides.seeds = seeds;
            overrides.max_evals = evals;
            overrides.batch = batch;
            overrides.n_init = init;
            overrides.components = g;
            overrides.threshold = threshold;
            if (kernel) {
                try {
                    overrides.kernel = reduction::parse_kernel_kind(*kernel);
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(e.what());
                }
            }
            if (out) {
                overrides.out = *out;
            }
            if (timing) {
                overrides.timing = true;
            }
            return run_command(config_path, overrides);
        }
        if (*spectrum) {
            return spectrum_command(spectrum_input, thresholds, test_fraction, spectrum_bilog);
        }
        if (*compare) {
            return compare_command(compare_dir);
        }
        if (*sample) {
            return sample_command(sample_problem, sample_n, sample_seed, sample_out, sample_bilog);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const harness::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const harness::MissingRuns& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return 0;
}
