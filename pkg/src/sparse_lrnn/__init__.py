"""Sparse (L1 / epsilon-insensitive) versus quadratic identification of linear
recurrent networks on chaotic time series."""

from .costs import (
    CostFunction,
    CostTerm,
    EpsInsensitive,
    MultiTermExpr,
    Regime,
    SquaredK,
    assemble_lp,
    assemble_qp,
    eval_cost,
    eval_residual,
)
from .lrnn import (
    LrnnModel,
    TrainingProblem,
    TrainingState,
    default_lambdas,
    predict_insample,
    predict_recursive,
    random_model,
    train,
)
from .optimize import LinearProgram, LpStatus, minimize_quadratic, solve_lp
from .series import MgConfig, Source, TimeSeries, gen_henon, gen_mackey_glass, scale_to_unit
from .stats import crossing_stats, eps_error_timeavg, kurtosis, nmrse, sparsity_fraction
from .experiment import ExperimentConfig, emit_report, problem_series, run_experiments

__version__ = "0.1.0"
