"""Variance-reduced stochastic gradient solvers with sufficient decrease."""

from .data_io import Dataset, normalize_rows, parse_libsvm, read_libsvm, synth_regression, write_libsvm
from .problem import Problem, Regularizer, StepPlan, make_step_plan
from .solvers import SolverConfig, run, run_prox_svrg, run_saga, run_saga_sd, run_svrg, run_svrg_sd
from .trace import ReferenceOptimum, Trace, TraceRecord, reference_optimum

__all__ = [
    "Dataset",
    "Problem",
    "ReferenceOptimum",
    "Regularizer",
    "SolverConfig",
    "StepPlan",
    "Trace",
    "TraceRecord",
    "make_step_plan",
    "normalize_rows",
    "parse_libsvm",
    "read_libsvm",
    "reference_optimum",
    "run",
    "run_prox_svrg",
    "run_saga",
    "run_saga_sd",
    "run_svrg",
    "run_svrg_sd",
    "synth_regression",
    "write_libsvm",
]

__version__ = "0.1.0"
