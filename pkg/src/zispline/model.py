"""Declarative model specs assembled into an evaluable log-likelihood.

A :class:`ModelSpec` names a count family and, per component (count and
structural zero), an intercept flag plus linear or spline terms. The
assembler turns it into an :class:`AssembledModel` holding a flat parameter
layout: intercepts, linear coefficients, spline coefficients (after the
identifiability and natural-cubic reductions), the log dispersion when the
family is negative binomial, and free knot positions last.

Identifiability: within a component the spline bases each sum to one, so
their leading coefficients are all confounded with a constant. When a
component contains spline terms, exactly one of them (the first) keeps its
first basis function, the rest have it dropped, and the component intercept
is removed. With no spline terms the intercept flag stands as given.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, gammaln, log_expit

from .splines import KnotGrid, basis_matrix, constrained_coef_map
from .validation import check_X_y

__all__ = [
    "LinearTerm",
    "SplineTerm",
    "ComponentSpec",
    "ModelSpec",
    "Dataset",
    "initial_knots",
    "assemble",
    "AssembledModel",
]

FAMILIES = ("poisson", "negbin", "zip", "zinb")

_ETA_COUNT_CLIP = 700.0  # exp() saturates instead of overflowing


@dataclass(frozen=True)
class LinearTerm:
    """One covariate entering a component linearly."""

    col: int

    def __post_init__(self):
        if int(self.col) != self.col or self.col < 0:
            raise ValueError(f"col must be a non-negative integer, got {self.col!r}")
        object.__setattr__(self, "col", int(self.col))


@dataclass(frozen=True)
class SplineTerm:
    """One covariate entering a component as a B-spline curve.

    ``knots`` pins explicit interior knot locations; otherwise ``n_knots``
    equiprobable quantiles of the training column are used. ``free_knots``
    makes the interior knots estimated parameters.
    """

    col: int
    degree: int = 3
    n_knots: int = 1
    free_knots: bool = False
    natural: bool = False
    knots: tuple[float, ...] | None = None

    def __post_init__(self):
        if int(self.col) != self.col or self.col < 0:
            raise ValueError(f"col must be a non-negative integer, got {self.col!r}")
        object.__setattr__(self, "col", int(self.col))
        if self.degree < 1:
            raise ValueError(f"spline degree must be >= 1, got {self.degree}")
        if self.natural and self.degree != 3:
            raise ValueError("natural splines require degree 3")
        if self.knots is not None:
            knots = tuple(float(t) for t in self.knots)
            object.__setattr__(self, "knots", knots)
            object.__setattr__(self, "n_knots", len(knots))
        if self.n_knots < 0:
            raise ValueError(f"n_knots must be >= 0, got {self.n_knots}")


Term = LinearTerm | SplineTerm


@dataclass(frozen=True)
class ComponentSpec:
    """Additive predictor of one component: optional intercept plus terms."""

    terms: tuple[Term, ...] = ()
    intercept: bool = True

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if not isinstance(t, (LinearTerm, SplineTerm)):
                raise TypeError(f"terms must be LinearTerm or SplineTerm, got {t!r}")

    @property
    def is_empty(self) -> bool:
        return not self.terms and not self.intercept


@dataclass(frozen=True)
class ModelSpec:
    """Count regression model: family plus count and zero components.

    Families "poisson" and "negbin" have no zero component (the structural
    zero probability is pinned to 0); "zip" and "zinb" model it through a
    logit link.
    """

    family: str
    count: ComponentSpec
    zero: ComponentSpec | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.zero_inflated:
            if self.zero is None:
                object.__setattr__(self, "zero", ComponentSpec(intercept=True))
        else:
            if self.zero is not None and not self.zero.is_empty:
                raise ValueError(f"family {self.family!r} does not admit a zero component")
            object.__setattr__(self, "zero", ComponentSpec(terms=(), intercept=False))

    @property
    def zero_inflated(self) -> bool:
        return self.family in ("zip", "zinb")

    @property
    def has_dispersion(self) -> bool:
        return self.family in ("negbin", "zinb")

    def components(self):
        yield "count", self.count
        if self.zero_inflated:
            yield "zero", self.zero


@dataclass(frozen=True)
class Dataset:
    """Counts plus a real covariate matrix, with no missing values."""

    y: np.ndarray
    X: np.ndarray
    columns: tuple[str, ...] = ()

    def __post_init__(self):
        X, y = check_X_y(self.X, self.y)
        X = X.copy()
        y = y.copy()
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if not self.columns:
            object.__setattr__(self, "columns", tuple(f"x{j}" for j in range(X.shape[1])))
        elif len(self.columns) != X.shape[1]:
            raise ValueError(
                f"{len(self.columns)} column names for {X.shape[1]} covariate columns"
            )

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def n_cols(self) -> int:
        return self.X.shape[1]

    def column_range(self, j: int) -> tuple[float, float]:
        col = self.X[:, j]
        return float(col.min()), float(col.max())


def initial_knots(values, m: int) -> np.ndarray:
    """Equiprobable quantile knots: the m quantiles at r/(m+1), r = 1..m.

    Quantiles interpolate linearly between order statistics at plotting
    positions k/(n+1). Knots are forced strictly inside (min, max) and
    strictly increasing; a knot colliding with its lower neighbor is nudged
    to the midpoint between that bound and the next distinct data value.
    """
    values = np.asarray(values, dtype=float)
    if m < 1:
        raise ValueError(f"need at least one knot, got m={m}")
    uniq = np.unique(values)
    if uniq.size < m + 1:
        raise ValueError(
            f"column has only {uniq.size} distinct values; cannot place {m} interior knots"
        )
    lo, hi = uniq[0], uniq[-1]
    probs = np.arange(1, m + 1) / (m + 1)
    raw = np.quantile(values, probs, method="weibull")
    knots = np.empty(m)
    prev = lo
    for r in range(m):
        k = raw[r]
        if k <= prev or k >= hi:
            # tie with the neighbor below: nudge to the midpoint between that
            # bound and the next distinct data value
            nxt = uniq[np.searchsorted(uniq, prev, side="right")]
            k = 0.5 * (prev + nxt)
        knots[r] = k
        prev = k
    return knots


@dataclass
class _BuiltTerm:
    component: str
    spec: Term
    col: int
    name: str
    coef_slots: np.ndarray
    # spline-only fields
    grid: KnotGrid | None = None
    free: bool = False
    natural: bool = False
    drop_first: bool = False
    knot_slots: np.ndarray | None = None
    coef_map: np.ndarray | None = field(default=None, repr=False)

    @property
    def is_spline(self) -> bool:
        return self.grid is not None

    def design(self, values: np.ndarray, interior=None) -> np.ndarray:
        """Columns this term contributes to the design, for given covariate values."""
        if not self.is_spline:
            return np.asarray(values, dtype=float).reshape(-1, 1)
        grid = self.grid if interior is None else self.grid.with_interior(interior)
        B = basis_matrix(values, grid)
        if self.natural:
            cmap = self.coef_map if interior is None else constrained_coef_map(
                grid, True, self.drop_first
            )
            return B @ cmap
        if self.drop_first:
            return B[:, 1:]
        return B


class AssembledModel:
    """A model spec bound to training data, evaluable on a flat parameter vector.

    Immutable after construction; `log_likelihood` and `predict` are pure in
    the parameter vector, so concurrent use with distinct vectors is safe.
    """

    def __init__(self, spec: ModelSpec, data: Dataset, apply_identifiability: bool = True):
        self.spec = spec
        self.data = data
        self.n = data.n

        slot_names: list[str] = []
        self.terms: list[_BuiltTerm] = []
        self.intercept_slot = {"count": None, "zero": None}
        used_names: dict[str, int] = {}

        for comp_name, comp in spec.components():
            has_spline = any(isinstance(t, SplineTerm) for t in comp.terms)
            if comp.intercept and not (has_spline and apply_identifiability):
                self.intercept_slot[comp_name] = len(slot_names)
                slot_names.append(f"{comp_name}:intercept")
            first_spline = True
            for t in comp.terms:
                if t.col >= data.n_cols:
                    raise ValueError(
                        f"term refers to column {t.col} but data has {data.n_cols} columns"
                    )
                base = f"{comp_name}:{data.columns[t.col]}"
                if base in used_names:
                    used_names[base] += 1
                    base = f"{base}#{used_names[base]}"
                else:
                    used_names[base] = 1
                if isinstance(t, LinearTerm):
                    slot = len(slot_names)
                    slot_names.append(f"{base}:lin")
                    self.terms.append(
                        _BuiltTerm(comp_name, t, t.col, base, np.array([slot]))
                    )
                    continue
                lo, hi = data.column_range(t.col)
                if lo >= hi:
                    raise ValueError(
                        f"column {data.columns[t.col]!r} is constant; spline terms need variation"
                    )
                if t.knots is not None:
                    interior = np.asarray(t.knots, dtype=float)
                    if np.any(interior <= lo) or np.any(interior >= hi) or np.any(
                        np.diff(interior) <= 0
                    ):
                        raise ValueError(
                            f"explicit knots for column {data.columns[t.col]!r} must be "
                            f"strictly increasing inside ({lo}, {hi})"
                        )
                elif t.n_knots > 0:
                    interior = initial_knots(data.X[:, t.col], t.n_knots)
                else:
                    interior = np.empty(0)
                grid = KnotGrid(lo, hi, tuple(interior), t.degree)
                drop_first = apply_identifiability and has_spline and not first_spline
                first_spline = False
                cmap = constrained_coef_map(grid, t.natural, drop_first) if t.natural else None
                n_coef = grid.n_basis - (2 if t.natural else 0) - (1 if drop_first else 0)
                coef_slots = np.arange(len(slot_names), len(slot_names) + n_coef)
                slot_names.extend(f"{base}:c{l + 1}" for l in range(n_coef))
                self.terms.append(
                    _BuiltTerm(
                        comp_name,
                        t,
                        t.col,
                        base,
                        coef_slots,
                        grid=grid,
                        free=t.free_knots,
                        natural=t.natural,
                        drop_first=drop_first,
                        coef_map=cmap,
                    )
                )

        self.nu_slot = None
        if spec.has_dispersion:
            self.nu_slot = len(slot_names)
            slot_names.append("log_nu")

        self.n_coef_slots = len(slot_names)
        for term in self.terms:
            if term.is_spline and term.free and term.grid.n_interior > 0:
                term.knot_slots = np.arange(
                    len(slot_names), len(slot_names) + term.grid.n_interior
                )
                slot_names.extend(
                    f"knot:{term.name}:{r + 1}" for r in range(term.grid.n_interior)
                )
        self.slot_names = tuple(slot_names)
        self.n_slots = len(slot_names)

        # Fixed part of each component's design, precomputed on the training rows.
        self._fixed_slots: dict[str, np.ndarray] = {}
        self._fixed_design: dict[str, np.ndarray] = {}
        self._free_terms: dict[str, list[_BuiltTerm]] = {"count": [], "zero": []}
        for comp_name in ("count", "zero"):
            cols = []
            slots = []
            if self.intercept_slot[comp_name] is not None:
                cols.append(np.ones((self.n, 1)))
                slots.append(self.intercept_slot[comp_name])
            for term in self.terms:
                if term.component != comp_name:
                    continue
                if term.is_spline and term.free and term.grid.n_interior > 0:
                    self._free_terms[comp_name].append(term)
                    continue
                cols.append(term.design(data.X[:, term.col]))
                slots.extend(term.coef_slots.tolist())
            self._fixed_slots[comp_name] = np.asarray(slots, dtype=np.intp)
            self._fixed_design[comp_name] = (
                np.hstack(cols) if cols else np.zeros((self.n, 0))
            )

        # Cached pieces of the likelihood sum.
        y = data.y.astype(float)
        self._yf = y
        self._is_zero = data.y == 0
        self._idx_pos = np.nonzero(~self._is_zero)[0]
        self._y_pos = y[self._idx_pos]
        self._logfact_pos = gammaln(self._y_pos + 1.0)
        self._logfact_total = float(gammaln(y + 1.0).sum())
        # Memo of the last design build per free-knot term. Coordinate-wise
        # gradient probes mostly leave the knots untouched, so this avoids
        # rebuilding the basis. Worst case under concurrent use is a
        # recomputation, never a wrong result.
        self._design_memo: dict[str, tuple[bytes, np.ndarray]] = {}

    # ----- parameter vector handling -------------------------------------

    def check_params(self, params) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_slots,):
            raise ValueError(f"expected parameter vector of length {self.n_slots}, got {params.shape}")
        return params

    def free_knot_slots(self) -> np.ndarray:
        slots = [t.knot_slots for t in self.terms if t.knot_slots is not None]
        return np.concatenate(slots) if slots else np.empty(0, dtype=np.intp)

    def knots_of(self, params) -> dict[str, np.ndarray]:
        """Interior knots per spline term (current values for free terms)."""
        params = self.check_params(params)
        out = {}
        for t in self.terms:
            if not t.is_spline:
                continue
            if t.knot_slots is not None:
                out[t.name] = params[t.knot_slots].copy()
            else:
                out[t.name] = np.asarray(t.grid.interior, dtype=float)
        return out

    def _term_interior(self, term: _BuiltTerm, params: np.ndarray):
        if term.knot_slots is None:
            return None
        return params[term.knot_slots]

    def _valid_free_knots(self, params: np.ndarray) -> bool:
        for term in self.terms:
            if term.knot_slots is None:
                continue
            k = params[term.knot_slots]
            if k[0] <= term.grid.a or k[-1] >= term.grid.b or np.any(np.diff(k) <= 0):
                return False
        return True

    # ----- evaluation -----------------------------------------------------

    def _eta(self, comp: str, params: np.ndarray) -> np.ndarray:
        eta = self._fixed_design[comp] @ params[self._fixed_slots[comp]]
        for term in self._free_terms[comp]:
            interior = params[term.knot_slots]
            key = interior.tobytes()
            memo = self._design_memo.get(term.name)
            if memo is not None and memo[0] == key:
                design = memo[1]
            else:
                design = term.design(self.data.X[:, term.col], interior=interior)
                self._design_memo[term.name] = (key, design)
            eta = eta + design @ params[term.coef_slots]
        return eta

    def log_likelihood(self, params) -> float:
        """Sum of log pmf values at the training counts; -inf for disordered knots."""
        params = self.check_params(params)
        if not self._valid_free_knots(params):
            return -np.inf
        eta_c = np.clip(self._eta("count", params), -_ETA_COUNT_CLIP, _ETA_COUNT_CLIP)
        mu = np.exp(eta_c)
        nu = np.exp(params[self.nu_slot]) if self.nu_slot is not None else None

        z = self._is_zero
        p = self._idx_pos
        if self.spec.family == "poisson":
            ll = float(self._yf @ eta_c - mu.sum() - self._logfact_total)
        elif self.spec.family == "negbin":
            log_ratio = np.log1p(mu / nu)
            ll = float(
                gammaln(self._yf + nu).sum()
                - self.n * gammaln(nu)
                - self._logfact_total
                + self._yf @ (eta_c - np.log(mu + nu))
                - nu * log_ratio.sum()
            )
        else:
            eta_z = self._eta("zero", params)
            log_pi = log_expit(eta_z)
            log_1mpi = log_expit(-eta_z)
            if self.spec.family == "zip":
                log_base0 = -mu[z]
                ll_pos = (
                    log_1mpi[p].sum()
                    + self._y_pos @ eta_c[p]
                    - mu[p].sum()
                    - self._logfact_pos.sum()
                )
            else:
                log_p0 = -nu * np.log1p(mu / nu)
                log_base0 = log_p0[z]
                mu_p = mu[p]
                ll_pos = (
                    log_1mpi[p].sum()
                    + gammaln(self._y_pos + nu).sum()
                    - p.size * gammaln(nu)
                    - self._logfact_pos.sum()
                    + self._y_pos @ (eta_c[p] - np.log(mu_p + nu))
                    + log_p0[p].sum()
                )
            ll_zero = np.logaddexp(log_pi[z], log_1mpi[z] + log_base0).sum()
            ll = float(ll_zero + ll_pos)
        return ll if np.isfinite(ll) else -np.inf

    def _eta_for_rows(self, comp: str, params: np.ndarray, X: np.ndarray, clip: bool) -> np.ndarray:
        eta = np.zeros(X.shape[0])
        if self.intercept_slot[comp] is not None:
            eta += params[self.intercept_slot[comp]]
        for term in self.terms:
            if term.component != comp:
                continue
            values = X[:, term.col]
            if term.is_spline:
                interior = self._term_interior(term, params)
                grid = term.grid if interior is None else term.grid.with_interior(interior)
                if clip:
                    values = np.clip(values, grid.a, grid.b)
                design = term.design(values, interior=interior)
            else:
                design = term.design(values)
            eta += design @ params[term.coef_slots]
        return eta

    def predict(self, params, X=None, clip: bool = False):
        """Per-row (mu, pi, mean) with mean = (1 - pi) * mu.

        Spline covariates outside their training boundary knots raise a
        ValueError unless ``clip=True`` clamps them onto the boundary.
        """
        params = self.check_params(params)
        X = self.data.X if X is None else np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.data.n_cols:
            raise ValueError(f"expected {self.data.n_cols} covariate columns, got shape {X.shape}")
        eta_c = np.clip(self._eta_for_rows("count", params, X, clip), -_ETA_COUNT_CLIP, _ETA_COUNT_CLIP)
        mu = np.exp(eta_c)
        if self.spec.zero_inflated:
            pi = expit(self._eta_for_rows("zero", params, X, clip))
        else:
            pi = np.zeros(X.shape[0])
        return mu, pi, (1.0 - pi) * mu

    def linear_predictor(self, params, X=None, component: str = "count") -> np.ndarray:
        """Component linear predictor for given rows (training rows by default)."""
        params = self.check_params(params)
        if X is None:
            return self._eta(component, params)
        X = np.asarray(X, dtype=float)
        return self._eta_for_rows(component, params, X, clip=False)

    def term_curve(self, params, term_name: str, values) -> np.ndarray:
        """Contribution of one spline or linear term along covariate values."""
        params = self.check_params(params)
        for term in self.terms:
            if term.name == term_name:
                interior = self._term_interior(term, params)
                design = term.design(np.asarray(values, dtype=float), interior=interior)
                return design @ params[term.coef_slots]
        raise KeyError(f"no term named {term_name!r}")

    def model_dimension(self) -> int:
        """Number of estimated scalars, every layout slot counting once."""
        return self.n_slots


def assemble(spec: ModelSpec, data: Dataset, apply_identifiability: bool = True) -> AssembledModel:
    """Bind a model spec to data, producing the parameter layout and designs.

    ``apply_identifiability=False`` keeps every spline term's first basis and
    the component intercepts; useful only for diagnosing the redundant
    parameterization.
    """
    return AssembledModel(spec, data, apply_identifiability=apply_identifiability)
