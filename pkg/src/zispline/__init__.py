"""Zero-inflated count regression with B-spline covariate effects.

Covariates enter the count and structural-zero components either linearly or
as B-spline curves whose interior knots can be fixed or optimized under
adaptive box constraints. Models are fit by maximum likelihood and compared
by AIC, BIC, and cross-validated mean residual error.
"""

from .distributions import ZinbParams, ZipParams, zi_mean, zinb_logpmf, zip_logpmf
from .estimation import FittedModel, ebok_fit, fit, fit_fixed_knots, initial_boxes
from .model import (
    ComponentSpec,
    Dataset,
    LinearTerm,
    ModelSpec,
    SplineTerm,
    assemble,
    initial_knots,
)
from .regressor import ZISplineRegressor
from .selection import cv_mre, grid_run, make_folds, score
from .splines import KnotGrid, basis_eval, basis_matrix, natural_cubic_map, spline_eval

__version__ = "0.1.0"

__all__ = [
    "ZipParams",
    "ZinbParams",
    "zip_logpmf",
    "zinb_logpmf",
    "zi_mean",
    "KnotGrid",
    "basis_eval",
    "basis_matrix",
    "spline_eval",
    "natural_cubic_map",
    "LinearTerm",
    "SplineTerm",
    "ComponentSpec",
    "ModelSpec",
    "Dataset",
    "assemble",
    "initial_knots",
    "initial_boxes",
    "fit",
    "fit_fixed_knots",
    "ebok_fit",
    "FittedModel",
    "ZISplineRegressor",
    "score",
    "make_folds",
    "cv_mre",
    "grid_run",
    "__version__",
]
