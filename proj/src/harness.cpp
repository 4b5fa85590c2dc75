#include "lscbo/harness.hpp"

#include "lscbo/design.hpp"
#include "lscbo/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

namespace lscbo::harness {

namespace {

using ojson = nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

ojson json_number(double v) {
    return std::isfinite(v) ? ojson(v) : ojson(nullptr);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, sep)) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == sep) {
        out.emplace_back();
    }
    return out;
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    return line;
}

bool parse_double(std::string_view text, double& out) {
    if (text.starts_with('+')) {
        text.remove_prefix(1);
    }
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size() && !text.empty();
}

template <typename T>
bool parse_integer(std::string_view text, T& out) {
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size() && !text.empty();
}

double number_field(const std::string& text, Index line, const std::string& column) {
    double v = 0.0;
    if (!parse_double(text, v)) {
        throw ParseError("column '" + column + "': not a number: '" + text + "'", line);
    }
    return v;
}

}  // namespace

int worker_count_from_env() {
    if (const char* env = std::getenv("LSCBO_WORKERS")) {
        int n = 0;
        if (parse_integer(std::string_view(env), n) && n > 0) {
            return n;
        }
        throw ConfigError("LSCBO_WORKERS must be a positive integer");
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::string run_file_name(const std::string& variant, std::uint64_t seed) {
    return variant + "_seed" + std::to_string(seed) + ".csv";
}

void write_run_csv(std::ostream& out, const optimizer::RunRecord& record, const std::string& variant, bool timing) {
    out << "eval,seed,variant";
    for (Index d = 0; d < record.dim; ++d) {
        out << ",x_" << d + 1;
    }
    out << ",f,violation,feasible,best_feasible,tr_length,fit_ms\n";
    for (const optimizer::EvalRow& row : record.rows) {
        out << row.eval << ',' << record.seed << ',' << variant;
        for (Index d = 0; d < row.x.size(); ++d) {
            out << ',' << format_double(row.x(d));
        }
        out << ',' << format_double(row.f) << ',' << format_double(row.violation) << ',' << (row.feasible ? 1 : 0)
            << ',' << format_double(row.best_feasible) << ',' << format_double(row.tr_length) << ','
            << format_double(timing ? row.fit_ms : 0.0) << '\n';
    }
}

RunTable parse_run_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("empty run file", 1);
    }
    const std::vector<std::string> header = split(strip_cr(line), ',');
    const std::vector<std::string> tail = {"f", "violation", "feasible", "best_feasible", "tr_length", "fit_ms"};
    if (header.size() < 3 + tail.size() + 1 || header[0] != "eval" || header[1] != "seed" || header[2] != "variant") {
        throw ParseError("unexpected run header", 1);
    }
    RunTable table;
    table.dim = static_cast<Index>(header.size() - 3 - tail.size());
    for (Index d = 0; d < table.dim; ++d) {
        if (header[static_cast<std::size_t>(3 + d)] != "x_" + std::to_string(d + 1)) {
            throw ParseError("unexpected column '" + header[static_cast<std::size_t>(3 + d)] + "'", 1);
        }
    }
    for (std::size_t i = 0; i < tail.size(); ++i) {
        if (header[3 + static_cast<std::size_t>(table.dim) + i] != tail[i]) {
            throw ParseError("unexpected column '" + header[3 + static_cast<std::size_t>(table.dim) + i] + "'", 1);
        }
    }

    Index line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) {
            continue;
        }
        const std::vector<std::string> fields = split(line, ',');
        if (fields.size() != header.size()) {
            throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                                 std::to_string(fields.size()),
                             line_no);
        }
        optimizer::EvalRow row;
        std::uint64_t seed = 0;
        if (!parse_integer(fields[0], row.eval) || !parse_integer(fields[1], seed)) {
            throw ParseError("eval and seed must be integers", line_no);
        }
        if (table.rows.empty()) {
            table.seed = seed;
            table.variant = fields[2];
        } else if (seed != table.seed || fields[2] != table.variant) {
            throw ParseError("seed or variant changes within one run file", line_no);
        }
        row.x.resize(table.dim);
        for (Index d = 0; d < table.dim; ++d) {
            row.x(d) = number_field(fields[static_cast<std::size_t>(3 + d)], line_no, "x_" + std::to_string(d + 1));
        }
        const std::size_t base = 3 + static_cast<std::size_t>(table.dim);
        row.f = number_field(fields[base], line_no, "f");
        row.violation = number_field(fields[base + 1], line_no, "violation");
        if (fields[base + 2] != "0" && fields[base + 2] != "1") {
            throw ParseError("feasible must be 0 or 1", line_no);
        }
        row.feasible = fields[base + 2] == "1";
        row.best_feasible = number_field(fields[base + 3], line_no, "best_feasible");
        row.tr_length = number_field(fields[base + 4], line_no, "tr_length");
        row.fit_ms = number_field(fields[base + 5], line_no, "fit_ms");
        row.failed = std::isnan(row.f);
        table.rows.push_back(std::move(row));
    }
    return table;
}

RunTable read_run_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read " + path.string());
    }
    try {
        return parse_run_csv(in);
    } catch (const ParseError& e) {
        throw ParseError(path.filename().string() + ": " + e.what(), e.line());
    }
}

Index first_feasible(const std::vector<optimizer::EvalRow>& rows) {
    for (const optimizer::EvalRow& row : rows) {
        if (row.feasible) {
            return row.eval;
        }
    }
    return -1;
}

namespace {

ojson run_summary(const RunResult& r, bool timing) {
    ojson j;
    j["variant"] = r.variant;
    j["seed"] = r.seed;
    j["file"] = r.csv.filename().string();
    j["evaluations"] = r.record.rows.size();
    const Index first = first_feasible(r.record.rows);
    j["feasible_found"] = first >= 0;
    j["first_feasible_eval"] = first >= 0 ? ojson(first) : ojson(nullptr);
    j["best_feasible"] = json_number(r.record.final_best_feasible());
    j["incumbent_eval"] = r.record.incumbent_row;
    j["incumbent_feasible"] = r.record.incumbent_feasible;
    if (timing) {
        j["fit_ms"] = r.record.total_fit_ms();
    }
    return j;
}

}  // namespace

std::vector<RunResult> run_experiment(const ExperimentConfig& cfg, int workers) {
    cfg.validate();

    struct Job {
        const VariantSpec* variant;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (const VariantSpec& v : cfg.variants) {
        for (std::uint64_t seed : cfg.seeds) {
            jobs.push_back({&v, seed});
        }
    }

    std::filesystem::create_directories(cfg.out);
    std::vector<RunResult> results(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            try {
                const problems::Problem problem = problems::make_problem(cfg.problem);
                RunResult& r = results[i];
                r.variant = jobs[i].variant->name;
                r.seed = jobs[i].seed;
                r.csv = cfg.out / run_file_name(r.variant, r.seed);
                r.record = optimizer::run(problem, cfg.resolve(*jobs[i].variant, jobs[i].seed));
                std::ofstream out(r.csv, std::ios::binary | std::ios::trunc);
                write_run_csv(out, r.record, r.variant, cfg.timing);
                if (!out) {
                    throw Error("cannot write " + r.csv.string());
                }
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int threads = std::clamp(workers, 1, static_cast<int>(std::max<std::size_t>(1, jobs.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        for (std::thread& t : pool) {
            t.join();
        }
    }
    for (const std::exception_ptr& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }

    ojson summary;
    summary["problem"] = cfg.problem;
    summary["max_evals"] = cfg.max_evals;
    summary["batch"] = cfg.batch;
    summary["n_init"] = cfg.n_init;
    summary["seeds"] = cfg.seeds;
    summary["timing"] = cfg.timing;
    ojson variants = ojson::array();
    for (const VariantSpec& v : cfg.variants) {
        const optimizer::VariantConfig resolved = cfg.resolve(v, cfg.seeds.front());
        ojson j;
        j["name"] = v.name;
        j["mode"] = optimizer::to_string(v.mode);
        j["n_init"] = resolved.n_init;
        if (v.mode != optimizer::Mode::scbo) {
            if (resolved.components) {
                j["g"] = *resolved.components;
            } else {
                j["threshold"] = resolved.eigen_threshold;
            }
            if (v.mode == optimizer::Mode::scbo_kpca) {
                j["kernel"] = reduction::to_string(resolved.kernel);
            }
        }
        variants.push_back(std::move(j));
    }
    summary["variants"] = std::move(variants);
    ojson runs = ojson::array();
    for (const RunResult& r : results) {
        runs.push_back(run_summary(r, cfg.timing));
    }
    summary["runs"] = std::move(runs);
    std::ofstream out(cfg.out / "summary.json", std::ios::binary | std::ios::trunc);
    out << summary.dump(2) << '\n';
    if (!out) {
        throw Error("cannot write summary.json");
    }
    return results;
}

std::vector<double> filled_curve(const std::vector<optimizer::EvalRow>& rows, double fill, std::size_t length) {
    std::vector<double> curve;
    curve.reserve(std::max(length, rows.size()));
    for (const optimizer::EvalRow& row : rows) {
        curve.push_back(std::isnan(row.best_feasible) ? fill : row.best_feasible);
    }
    const double last = curve.empty() ? fill : curve.back();
    while (curve.size() < length) {
        curve.push_back(last);
    }
    return curve;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) {
        return kNaN;
    }
    std::sort(values.begin(), values.end(), [](double a, double b) {
        return std::isnan(b) ? !std::isnan(a) : (!std::isnan(a) && a < b);
    });
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0 || values[lo] == values[hi]) {
        return values[lo];
    }
    if (std::isinf(values[hi])) {
        return values[hi];
    }
    return values[lo] + frac * (values[hi] - values[lo]);
}

SummaryTable summarize(const std::vector<RunTable>& runs) {
    SummaryTable table;
    table.fill_value = kNaN;
    std::size_t length = 0;
    for (const RunTable& run : runs) {
        length = std::max(length, run.rows.size());
        for (const optimizer::EvalRow& row : run.rows) {
            if (row.feasible && (std::isnan(table.fill_value) || row.f > table.fill_value)) {
                table.fill_value = row.f;
            }
        }
    }

    std::map<std::string, std::vector<const RunTable*>> groups;
    for (const RunTable& run : runs) {
        groups[run.variant].push_back(&run);
    }
    for (auto& [name, members] : groups) {
        std::sort(members.begin(), members.end(), [](const RunTable* a, const RunTable* b) { return a->seed < b->seed; });
        VariantSummary s;
        s.variant = name;
        std::vector<std::vector<double>> curves;
        std::vector<double> fit_totals;
        std::vector<double> firsts;
        for (const RunTable* run : members) {
            s.seeds.push_back(run->seed);
            curves.push_back(filled_curve(run->rows, table.fill_value, length));
            double fit = 0.0;
            for (const optimizer::EvalRow& row : run->rows) {
                fit += row.fit_ms;
            }
            fit_totals.push_back(fit);
            const Index first = first_feasible(run->rows);
            if (first >= 0) {
                firsts.push_back(static_cast<double>(first));
                s.min_first_feasible = std::min(s.min_first_feasible.value_or(first), first);
                s.max_first_feasible = std::max(s.max_first_feasible.value_or(first), first);
            }
        }
        s.runs_with_feasible = static_cast<Index>(firsts.size());
        if (!firsts.empty()) {
            s.median_first_feasible = quantile(firsts, 0.5);
        }
        double total = 0.0;
        for (double v : fit_totals) {
            total += v;
        }
        s.mean_fit_ms = total / static_cast<double>(fit_totals.size());
        s.median_fit_ms = quantile(fit_totals, 0.5);
        std::vector<double> column(curves.size());
        for (std::size_t e = 0; e < length; ++e) {
            for (std::size_t r = 0; r < curves.size(); ++r) {
                column[r] = curves[r][e];
            }
            s.curve.push_back({static_cast<Index>(e), quantile(column, 0.5), quantile(column, 0.25), quantile(column, 0.75)});
        }
        s.median_final = s.curve.empty() ? kNaN : s.curve.back().median;
        table.variants.push_back(std::move(s));
    }
    return table;
}

namespace {

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (const std::string& n : names) {
        out += (out.empty() ? "" : ", ") + n;
    }
    return out;
}

}  // namespace

MissingRuns::MissingRuns(std::vector<std::string> names)
    : Error("missing runs: " + join_names(names)), names_(std::move(names)) {}

void write_comparison_csv(std::ostream& out, const SummaryTable& table) {
    out << "variant,eval,median,q25,q75\n";
    for (const VariantSummary& v : table.variants) {
        for (const CurvePoint& p : v.curve) {
            out << v.variant << ',' << p.eval << ',' << format_double(p.median) << ',' << format_double(p.q25) << ','
                << format_double(p.q75) << '\n';
        }
    }
}

SummaryTable compare_variants(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw ConfigError("not a directory: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && entry.path().extension() == ".csv" && name.find("_seed") != std::string::npos) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());

    const std::filesystem::path summary_path = dir / "summary.json";
    if (std::filesystem::exists(summary_path)) {
        std::ifstream in(summary_path);
        const nlohmann::json summary = nlohmann::json::parse(in, nullptr, false);
        if (summary.is_discarded() || !summary.contains("runs")) {
            throw ConfigError("malformed " + summary_path.string());
        }
        std::vector<std::string> missing;
        for (const auto& run : summary["runs"]) {
            const std::string file = run.value("file", "");
            if (!std::filesystem::exists(dir / file)) {
                missing.push_back(run.value("variant", "?") + " seed " + std::to_string(run.value("seed", 0ULL)) +
                                  " (" + file + ")");
            }
        }
        if (!missing.empty()) {
            throw MissingRuns(std::move(missing));
        }
    }
    if (files.empty()) {
        throw ConfigError("no run files in " + dir.string());
    }

    std::vector<RunTable> runs;
    for (const auto& path : files) {
        runs.push_back(read_run_csv(path));
    }
    SummaryTable table = summarize(runs);

    std::ofstream csv(dir / "comparison.csv", std::ios::binary | std::ios::trunc);
    write_comparison_csv(csv, table);
    ojson j;
    j["fill_value"] = json_number(table.fill_value);
    ojson variants = ojson::array();
    for (const VariantSummary& v : table.variants) {
        ojson e;
        e["variant"] = v.variant;
        e["seeds"] = v.seeds;
        e["runs_with_feasible"] = v.runs_with_feasible;
        e["median_final_best_feasible"] = json_number(v.median_final);
        e["mean_fit_ms"] = v.mean_fit_ms;
        e["median_fit_ms"] = v.median_fit_ms;
        e["first_feasible_eval"] = {
            {"median", v.median_first_feasible ? json_number(*v.median_first_feasible) : ojson(nullptr)},
            {"min", v.min_first_feasible ? ojson(*v.min_first_feasible) : ojson(nullptr)},
            {"max", v.max_first_feasible ? ojson(*v.max_first_feasible) : ojson(nullptr)},
        };
        variants.push_back(std::move(e));
    }
    j["variants"] = std::move(variants);
    std::ofstream js(dir / "comparison.json", std::ios::binary | std::ios::trunc);
    js << j.dump(2) << '\n';
    if (!csv || !js) {
        throw Error("cannot write comparison files in " + dir.string());
    }
    return table;
}

Matrix parse_matrix_csv(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    Index line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) {
            continue;
        }
        const std::vector<std::string> fields = split(line, ',');
        std::vector<double> values(fields.size());
        bool numeric = true;
        for (std::size_t i = 0; i < fields.size() && numeric; ++i) {
            std::string f = fields[i];
            f.erase(0, f.find_first_not_of(' '));
            f.erase(f.find_last_not_of(' ') + 1);
            numeric = parse_double(f, values[i]);
        }
        if (!numeric) {
            if (rows.empty() && width == 0) {
                width = fields.size();  // header
                continue;
            }
            throw ParseError("non-numeric field", line_no);
        }
        if (width == 0) {
            width = fields.size();
        }
        if (fields.size() != width) {
            throw ParseError("expected " + std::to_string(width) + " fields, found " + std::to_string(fields.size()),
                             line_no);
        }
        for (double v : values) {
            if (!std::isfinite(v)) {
                throw ParseError("non-finite value", line_no);
            }
        }
        rows.push_back(std::move(values));
    }
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(width));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
        }
    }
    return m;
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read " + path.string());
    }
    try {
        return parse_matrix_csv(in);
    } catch (const ParseError& e) {
        throw ParseError(path.filename().string() + ": " + e.what(), e.line());
    }
}

void write_matrix_csv(std::ostream& out, const Matrix& m, const std::vector<std::string>& header) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        out << (i ? "," : "") << header[i];
    }
    if (!header.empty()) {
        out << '\n';
    }
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            out << (c ? "," : "") << format_double(m(r, c));
        }
        out << '\n';
    }
}

SpectrumReport analyze_spectrum(const Matrix& c, const std::vector<double>& thresholds, double test_fraction) {
    if (c.rows() < 2) {
        throw ConfigError("spectrum analysis needs at least two rows");
    }
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
        throw ConfigError("test fraction must lie in [0, 1)");
    }
    SpectrumReport report;
    const reduction::LinearSubspace full = reduction::fit_pca(c, 0);
    report.rows = reduction::spectrum(full.singular_values);
    for (double t : thresholds) {
        if (!(t > 0.0)) {
            throw ConfigError("thresholds must be positive");
        }
        report.components_at_threshold.emplace_back(t, reduction::count_above(full.singular_values, t));
    }

    const auto n = c.rows();
    const auto n_test = static_cast<Index>(std::llround(test_fraction * static_cast<double>(n)));
    report.test_rows = n_test;
    report.train_rows = n - n_test;
    if (n_test > 0 && report.train_rows >= 2) {
        const Matrix train = c.topRows(report.train_rows);
        const Matrix test = c.bottomRows(n_test);
        const reduction::LinearSubspace fitted = reduction::fit_pca(train, train.cols());
        for (Index g = 1; g <= fitted.components(); ++g) {
            reduction::LinearSubspace truncated = fitted;
            truncated.basis = fitted.basis.leftCols(g);
            report.holdout_error.emplace_back(g, reduction::reconstruction_error(truncated, test));
        }
    }
    return report;
}

void write_spectrum_report(std::ostream& out, const SpectrumReport& report) {
    out << "# spectrum\nindex,sigma,normalized,cumulative_energy\n";
    for (const reduction::SpectrumRow& r : report.rows) {
        out << r.index << ',' << format_double(r.value) << ',' << format_double(r.normalized) << ','
            << format_double(r.cumulative_energy) << '\n';
    }
    out << "# thresholds\nthreshold,components\n";
    for (const auto& [t, g] : report.components_at_threshold) {
        out << format_double(t) << ',' << g << '\n';
    }
    out << "# holdout train=" << report.train_rows << " test=" << report.test_rows << "\ng,epsilon\n";
    for (const auto& [g, eps] : report.holdout_error) {
        out << g << ',' << format_double(eps) << '\n';
    }
}

Matrix sample_constraints(const problems::Problem& problem, Index n, std::uint64_t seed) {
    problem.validate();
    numkit::Rng rng = numkit::make_rng(seed);
    const Matrix unit = design::latin_hypercube(n, problem.dim, rng);
    Matrix c(n, problem.n_constraints);
    for (Index i = 0; i < n; ++i) {
        c.row(i) = problem.evaluate(problem.to_physical(unit.row(i).transpose())).constraints.transpose();
    }
    return c;
}

}  // namespace lscbo::harness
