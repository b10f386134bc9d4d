"""Discrete Weibull generalized additive regression for count data."""

__version__ = "0.1.0"

from .basis import CovariateSpec, build_design, place_knots  # noqa: E402
from .data import Dataset, read_csv  # noqa: E402
from .distribution import DWParams, MomentOptions  # noqa: E402
from .regression import (  # noqa: E402
    FitOptions, FittedModel, ModelSpec, fit, randomized_quantile_residuals,
    residual_normality, standard_errors, stepwise_select,
)

__all__ = [
    "CovariateSpec", "DWParams", "Dataset", "FitOptions", "FittedModel", "ModelSpec",
    "MomentOptions", "build_design", "fit", "place_knots", "randomized_quantile_residuals",
    "read_csv", "residual_normality", "standard_errors", "stepwise_select",
]
