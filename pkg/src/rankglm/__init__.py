"""Pairwise rank composite likelihood for high-dimensional semiparametric GLMs.

Estimation with lasso/SCAD/MCP penalties, directional likelihood ratio tests
and Wald intervals for single coefficients, selection-weighted variants for
responses missing by design, and a Monte Carlo harness.
"""

from .errors import DataError, DegenerateLikelihoodError, NumericalError
from .estimator import (
    CVResult,
    FitResult,
    PenaltyConfig,
    SolverOptions,
    cross_validate,
    default_lambda_grid,
    fit_cv,
    fit_path,
    fit_penalized,
)
from .inference import InferenceReport, dlrt_test, holm_adjust, infer, infer_many
from .projector import DirectionFit, estimate_w
from .ranklik import (
    Dataset,
    hajek_sigma,
    kernel_diagnostics,
    pairwise_gradient,
    pairwise_hessian,
    pairwise_loglik,
)

__all__ = [
    "CVResult",
    "DataError",
    "Dataset",
    "DegenerateLikelihoodError",
    "DirectionFit",
    "FitResult",
    "InferenceReport",
    "NumericalError",
    "PenaltyConfig",
    "SolverOptions",
    "cross_validate",
    "default_lambda_grid",
    "dlrt_test",
    "estimate_w",
    "fit_cv",
    "fit_path",
    "fit_penalized",
    "hajek_sigma",
    "holm_adjust",
    "infer",
    "infer_many",
    "kernel_diagnostics",
    "pairwise_gradient",
    "pairwise_hessian",
    "pairwise_loglik",
]

__version__ = "0.1.0"
