"""Scikit-learn style estimator wrapping the maximum-likelihood machinery.

The estimator follows the usual conventions: constructor arguments are
stored verbatim, ``fit(X, y)`` returns ``self`` and exposes fitted state
through trailing-underscore attributes, and ``get_params``/``set_params``
make it clone-compatible with scikit-learn pipelines and model selection
tools.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .distributions import zinb_logpmf, zip_logpmf
from .estimation import fit as _fit
from .model import ComponentSpec, Dataset, LinearTerm, ModelSpec, SplineTerm
from .validation import check_covariates, check_X_y

__all__ = ["ZISplineRegressor"]


def _component_from(terms, intercept, n_cols, what) -> ComponentSpec:
    if terms is None:
        built = ()
    elif terms == "linear":
        built = tuple(LinearTerm(j) for j in range(n_cols))
    else:
        built = tuple(terms)
        for t in built:
            if not isinstance(t, (LinearTerm, SplineTerm)):
                raise TypeError(f"{what} must contain LinearTerm or SplineTerm, got {t!r}")
    return ComponentSpec(terms=built, intercept=intercept)


class ZISplineRegressor(BaseEstimator):
    """Count regression with optional zero inflation and spline terms.

    Parameters
    ----------
    family : {"zip", "zinb", "poisson", "negbin"}
        Count distribution; the "zi" families add a structural-zero
        component behind a logit link.
    count_terms, zero_terms : "linear", None, or sequence of terms
        Terms of each component. "linear" enters every column linearly;
        None leaves the component intercept-only. ``zero_terms`` is ignored
        for families without zero inflation.
    count_intercept, zero_intercept : bool
        Component intercepts. When a component contains spline terms its
        intercept is absorbed into the first spline's leading coefficient.
    eps_frac : float
        Minimal knot separation for variable-knot terms, as a fraction of
        the covariate range.
    max_ebok_iter : int
        Cap on box-adaptation rounds for variable-knot fits.
    tol_g, tol_f, max_iter : float, float, int
        Inner optimizer tolerances (projected gradient, relative objective
        change) and iteration cap.

    Attributes
    ----------
    result_ : FittedModel
    params_ : ndarray of fitted scalars (layout in ``param_names_``)
    knots_ : dict of final interior knots per spline term
    loglik_, n_params_, aic_, bic_ : floats / int
    converged_ : bool
    """

    def __init__(
        self,
        family: str = "zip",
        count_terms="linear",
        zero_terms=None,
        count_intercept: bool = True,
        zero_intercept: bool = True,
        eps_frac: float = 1e-3,
        max_ebok_iter: int = 50,
        tol_g: float = 1e-6,
        tol_f: float = 1e-9,
        max_iter: int = 500,
    ):
        self.family = family
        self.count_terms = count_terms
        self.zero_terms = zero_terms
        self.count_intercept = count_intercept
        self.zero_intercept = zero_intercept
        self.eps_frac = eps_frac
        self.max_ebok_iter = max_ebok_iter
        self.tol_g = tol_g
        self.tol_f = tol_f
        self.max_iter = max_iter

    def _build_spec(self, n_cols: int) -> ModelSpec:
        count = _component_from(self.count_terms, self.count_intercept, n_cols, "count_terms")
        zero = None
        if self.family in ("zip", "zinb"):
            zero = _component_from(self.zero_terms, self.zero_intercept, n_cols, "zero_terms")
        return ModelSpec(family=self.family, count=count, zero=zero)

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        data = Dataset(y=y, X=X)
        spec = self._build_spec(X.shape[1])
        result = _fit(
            spec,
            data,
            eps_frac=self.eps_frac,
            max_ebok_iter=self.max_ebok_iter,
            tol_g=self.tol_g,
            tol_f=self.tol_f,
            max_iter=self.max_iter,
        )
        self.n_features_in_ = X.shape[1]
        self.result_ = result
        self.params_ = result.params
        self.param_names_ = result.model.slot_names
        self.knots_ = result.knots
        self.loglik_ = result.loglik
        self.n_params_ = result.dimension
        self.aic_ = -2.0 * result.loglik + 2.0 * result.dimension
        self.bic_ = -2.0 * result.loglik + result.dimension * float(np.log(result.n))
        self.converged_ = result.converged
        return self

    def _check_fitted(self):
        if not hasattr(self, "result_"):
            raise RuntimeError("this estimator is not fitted yet; call fit first")

    def predict(self, X, clip: bool = False) -> np.ndarray:
        """Expected count (1 - pi) * mu per row."""
        self._check_fitted()
        X = check_covariates(X)
        _, _, mean = self.result_.predict(X, clip=clip)
        return mean

    def predict_components(self, X, clip: bool = False):
        """Per-row (mu, pi, mean)."""
        self._check_fitted()
        X = check_covariates(X)
        return self.result_.predict(X, clip=clip)

    def score(self, X, y, clip: bool = False) -> float:
        """Mean out-of-sample log-likelihood per observation (higher is better)."""
        self._check_fitted()
        X, y = check_X_y(X, y)
        mu, pi, _ = self.result_.predict(X, clip=clip)
        pi = np.clip(pi, 0.0, 1.0 - 1e-12)
        if self.family in ("zinb", "negbin"):
            nu = float(np.exp(self.params_[self.result_.model.nu_slot]))
            ll = zinb_logpmf(y, mu, nu, pi)
        else:
            ll = zip_logpmf(y, mu, pi)
        return float(np.mean(ll))
