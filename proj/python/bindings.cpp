#include "lscbo/errors.hpp"
#include "lscbo/harness.hpp"
#include "lscbo/optimizer.hpp"
#include "lscbo/problems.hpp"
#include "lscbo/reduction.hpp"
#include "lscbo/surrogate.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>

namespace py = pybind11;
using namespace lscbo;
using numkit::Index;
using numkit::Matrix;
using numkit::Vector;

namespace {

py::dict record_to_dict(const optimizer::RunRecord& r) {
    const auto n = static_cast<Index>(r.rows.size());
    Matrix x(n, r.dim);
    Vector f(n), violation(n), best(n), tr(n), fit(n);
    std::vector<bool> feasible, failed;
    for (Index i = 0; i < n; ++i) {
        const auto& row = r.rows[static_cast<std::size_t>(i)];
        x.row(i) = row.x.transpose();
        f(i) = row.f;
        violation(i) = row.violation;
        best(i) = row.best_feasible;
        tr(i) = row.tr_length;
        fit(i) = row.fit_ms;
        feasible.push_back(row.feasible);
        failed.push_back(row.failed);
    }
    py::dict d;
    d["problem"] = r.problem;
    d["mode"] = optimizer::to_string(r.mode);
    d["seed"] = r.seed;
    d["x"] = x;
    d["f"] = f;
    d["violation"] = violation;
    d["feasible"] = feasible;
    d["failed"] = failed;
    d["best_feasible"] = best;
    d["tr_length"] = tr;
    d["fit_ms"] = fit;
    d["incumbent"] = r.incumbent_row >= 0 ? py::object(py::int_(r.incumbent_row)) : py::object(py::none());
    d["incumbent_feasible"] = r.incumbent_feasible;
    d["total_fit_ms"] = r.total_fit_ms();
    std::vector<Index> components;
    for (const auto& it : r.iterations) {
        components.push_back(it.components);
    }
    d["components"] = components;
    return d;
}

}  // namespace

PYBIND11_MODULE(_lscbo, m) {
    m.doc() = "Trust-region constrained Bayesian optimization with reduced constraint models";

    // Translators run newest first, so the derived type is registered last.
    py::register_exception<Error>(m, "LscboError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::class_<problems::Problem>(m, "Problem")
        .def_readonly("name", &problems::Problem::name)
        .def_readonly("dim", &problems::Problem::dim)
        .def_readonly("n_constraints", &problems::Problem::n_constraints)
        .def_readonly("lower", &problems::Problem::lower)
        .def_readonly("upper", &problems::Problem::upper)
        .def("evaluate",
             [](const problems::Problem& p, const Vector& x) {
                 if (x.size() != p.dim) {
                     throw py::value_error("expected a point of dimension " + std::to_string(p.dim));
                 }
                 const auto e = p.evaluate(x);
                 return py::make_tuple(e.objective, e.constraints);
             },
             py::arg("x"), "Objective and constraint vector at a physical point.")
        .def("to_physical", &problems::Problem::to_physical, py::arg("unit"))
        .def("to_unit", &problems::Problem::to_unit, py::arg("physical"))
        .def("__repr__", [](const problems::Problem& p) { return "<Problem " + p.name + ">"; });

    m.def("make_problem", &problems::make_problem, py::arg("name"));
    m.def("problem_names", &problems::registered_names);

    m.def(
        "run",
        [](const std::string& problem, const std::string& mode, std::optional<Index> components, double threshold,
           const std::string& kernel, Index batch, Index n_init, Index max_evals, std::uint64_t seed) {
            optimizer::VariantConfig cfg;
            cfg.mode = optimizer::parse_mode(mode);
            cfg.components = components;
            cfg.eigen_threshold = threshold;
            cfg.kernel = reduction::parse_kernel_kind(kernel);
            cfg.batch = batch;
            cfg.n_init = n_init;
            cfg.max_evals = max_evals;
            cfg.seed = seed;
            const problems::Problem p = problems::make_problem(problem);
            optimizer::RunRecord record;
            {
                py::gil_scoped_release release;
                record = optimizer::run(p, cfg);
            }
            return record_to_dict(record);
        },
        py::arg("problem"), py::arg("mode") = "scbo", py::arg("components") = py::none(),
        py::arg("threshold") = 1e-2, py::arg("kernel") = "exponential", py::arg("batch") = 4,
        py::arg("n_init") = 10, py::arg("max_evals") = 200, py::arg("seed") = 0,
        "Runs one optimization and returns its evaluation log as arrays.");

    m.def(
        "run_experiment",
        [](const std::filesystem::path& config, const std::optional<std::filesystem::path>& out, int workers) {
            harness::ExperimentConfig cfg = harness::load_config(config);
            if (out) {
                cfg.out = *out;
            }
            std::vector<harness::RunResult> results;
            {
                py::gil_scoped_release release;
                results = harness::run_experiment(cfg, workers);
            }
            std::vector<std::filesystem::path> files;
            for (const auto& r : results) {
                files.push_back(r.csv);
            }
            return files;
        },
        py::arg("config"), py::arg("out") = py::none(), py::arg("workers") = 1,
        "Runs every (variant, seed) of an experiment file and returns the CSV paths.");

    m.def(
        "compare",
        [](const std::filesystem::path& dir) {
            const auto table = harness::compare_variants(dir);
            py::dict out;
            for (const auto& v : table.variants) {
                py::dict d;
                std::vector<double> median, q25, q75;
                for (const auto& p : v.curve) {
                    median.push_back(p.median);
                    q25.push_back(p.q25);
                    q75.push_back(p.q75);
                }
                d["median"] = median;
                d["q25"] = q25;
                d["q75"] = q75;
                d["median_final"] = v.median_final;
                d["runs_with_feasible"] = v.runs_with_feasible;
                out[py::str(v.variant)] = d;
            }
            return out;
        },
        py::arg("dir"), "Summarizes the run CSVs in a directory (also writes comparison.csv/json).");

    m.def("bilog", py::overload_cast<const Matrix&>(&optimizer::bilog), py::arg("y"));
    m.def("total_violation", &optimizer::total_violation, py::arg("c"));
    m.def(
        "select_batch",
        [](const std::vector<Vector>& f, const std::vector<Matrix>& c) { return optimizer::select_batch(f, c); },
        py::arg("f_draws"), py::arg("c_draws"),
        "Indices picked by constrained Thompson selection, one per draw.");

    m.def(
        "fit_pca",
        [](const Matrix& c, Index components) {
            const auto s = reduction::fit_pca(c, components);
            py::dict d;
            d["mean"] = s.column_mean;
            d["basis"] = s.basis;
            d["singular_values"] = s.singular_values;
            d["rank"] = s.rank;
            return d;
        },
        py::arg("c"), py::arg("components") = 0);
    m.def(
        "reconstruction_error",
        [](const Matrix& train, Index components, const Matrix& test) {
            return reduction::reconstruction_error(reduction::fit_pca(train, components), test);
        },
        py::arg("train"), py::arg("components"), py::arg("test"),
        "Relative squared error of test rows reconstructed from a PCA of the training rows.");
    m.def("count_above", &reduction::count_above, py::arg("singular_values"), py::arg("threshold"));
    m.def(
        "kpca_projections",
        [](const Matrix& c, const std::string& kernel, Index components, const Matrix& queries) {
            const auto s = reduction::fit_kpca(c, reduction::parse_kernel_kind(kernel), components);
            return reduction::project_kpca(s, queries);
        },
        py::arg("c"), py::arg("kernel"), py::arg("components"), py::arg("queries"));

    m.def(
        "sample_constraints",
        [](const std::string& problem, Index n, std::uint64_t seed) {
            return harness::sample_constraints(problems::make_problem(problem), n, seed);
        },
        py::arg("problem"), py::arg("n"), py::arg("seed") = 0);

    m.def(
        "gp_posterior",
        [](const Matrix& x, const Vector& y, const Matrix& queries, std::uint64_t seed) {
            numkit::Rng rng = numkit::make_rng(seed);
            const auto model = surrogate::fit(x, y, rng);
            const auto post = surrogate::posterior(model, queries, false);
            return py::make_tuple(post.mean, post.variance);
        },
        py::arg("x"), py::arg("y"), py::arg("queries"), py::arg("seed") = 0,
        "Fits a GP on unit-cube inputs and returns the posterior mean and variance at the queries.");
}
