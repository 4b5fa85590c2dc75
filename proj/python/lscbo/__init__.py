"""Trust-region constrained Bayesian optimization with reduced constraint models."""

from ._lscbo import (
    ConfigError,
    LscboError,
    Problem,
    bilog,
    compare,
    count_above,
    fit_pca,
    gp_posterior,
    kpca_projections,
    make_problem,
    problem_names,
    reconstruction_error,
    run,
    run_experiment,
    sample_constraints,
    select_batch,
    total_violation,
)

__all__ = [
    "ConfigError",
    "LscboError",
    "Problem",
    "bilog",
    "compare",
    "count_above",
    "fit_pca",
    "gp_posterior",
    "kpca_projections",
    "make_problem",
    "problem_names",
    "reconstruction_error",
    "run",
    "run_experiment",
    "sample_constraints",
    "select_batch",
    "total_violation",
]
