"""Maximum-likelihood fitting: fixed knots, and the adaptive box-constrained
knot loop for variable-knot spline terms.

The adaptive loop works per variable-knot term:

1. place initial knots at equiprobable quantiles of the covariate;
2. give each knot a box, bounded by the midpoints between neighboring
   initial knots, shrunk so adjacent boxes keep a minimal separation eps;
3. fit coefficients with the knots held at their initial positions;
4. jointly maximize the likelihood over coefficients and box-constrained
   knots, warm started from the previous optimum;
5. every knot sitting on a box edge gets that edge moved outward to the
   midpoint between the knot and its neighboring knot (or the domain
   endpoint), with the neighbor's box edge shifted to preserve disjointness
   and the eps gap; if the neighbor is too close (midpoint within eps of the
   neighboring knot) the edge stays, which usually signals a sharp break in
   curvature there;
6. repeat from step 4 while any edge moved, up to ``max_ebok_iter``.

Each joint maximization starts from a point feasible for the updated boxes,
so the likelihood trace is non-decreasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .model import (
    AssembledModel,
    ComponentSpec,
    Dataset,
    ModelSpec,
    SplineTerm,
    assemble,
    initial_knots,
)
from .optimize import BoxBounds, OptimReport, maximize

__all__ = [
    "BoxConfig",
    "FittedModel",
    "initial_knots",
    "initial_boxes",
    "fit_fixed_knots",
    "ebok_fit",
]

DEFAULT_EPS_FRAC = 1e-3
DEFAULT_MAX_EBOK_ITER = 50
ACTIVE_TOL_FRAC = 1e-8


@dataclass
class BoxConfig:
    """Per-knot closed intervals plus the minimal separation distance."""

    lo: np.ndarray
    hi: np.ndarray
    eps: float
    a: float
    b: float

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        self.validate()

    def validate(self):
        slack = 1e-9 * (self.b - self.a)
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if np.any(self.lo > self.hi):
            raise ValueError("every box must satisfy lo <= hi")
        if self.lo.size and (self.lo[0] < self.a - slack or self.hi[-1] > self.b + slack):
            raise ValueError("boxes must lie inside the domain")
        gaps = self.lo[1:] - self.hi[:-1]
        if np.any(gaps < self.eps - slack):
            raise ValueError("adjacent boxes must be separated by at least eps")

    def contains(self, knots) -> bool:
        knots = np.asarray(knots, dtype=float)
        return bool(np.all(knots >= self.lo) and np.all(knots <= self.hi))

    def copy(self) -> "BoxConfig":
        return BoxConfig(self.lo.copy(), self.hi.copy(), self.eps, self.a, self.b)


def initial_boxes(knots, a: float, b: float, eps: float) -> BoxConfig:
    """Boxes bounded by midpoints between neighboring knots, eps-separated.

    The outermost edges sit eps inside the domain so no basis function
    degenerates.
    """
    knots = np.asarray(knots, dtype=float)
    m = knots.size
    if m == 0:
        raise ValueError("need at least one knot")
    if knots[0] <= a or knots[-1] >= b or np.any(np.diff(knots) <= 0):
        raise ValueError("knots must be strictly increasing inside (a, b)")
    if np.any(np.diff(knots) < 2 * eps):
        raise ValueError(f"adjacent knots must be at least 2*eps = {2 * eps} apart")
    mids = 0.5 * (knots[:-1] + knots[1:])
    lo = np.empty(m)
    hi = np.empty(m)
    lo[0] = a + eps
    hi[-1] = b - eps
    lo[1:] = mids + 0.5 * eps
    hi[:-1] = mids - 0.5 * eps
    cfg = BoxConfig(lo, hi, eps, a, b)
    if not cfg.contains(knots):
        raise ValueError("initial knots do not fit inside their boxes")
    return cfg


@dataclass(frozen=True)
class FittedModel:
    """Converged parameters bound to their assembled model."""

    spec: ModelSpec
    model: AssembledModel = field(repr=False)
    params: np.ndarray = field(repr=False)
    knots: dict[str, np.ndarray]
    loglik: float
    dimension: int
    n: int
    converged: bool
    n_iter: int
    ebok_iterations: int = 0
    ebok_trace: tuple = field(default=(), repr=False)
    warnings: tuple[str, ...] = ()
    optim: OptimReport | None = field(default=None, repr=False)

    def predict(self, X=None, clip: bool = False):
        return self.model.predict(self.params, X=X, clip=clip)

    def param_table(self) -> list[tuple[str, float]]:
        return list(zip(self.model.slot_names, self.params.tolist()))


def _initial_params(model: AssembledModel, jitter_rng=None) -> np.ndarray:
    """Starting point: count level at log(mean(y) + 0.5), zero intercept at
    the logit of the moment estimate of the excess zero fraction, log
    dispersion at 0, free knots at their initial grid positions.

    ``jitter_rng`` perturbs the coefficient slots (cross-validation retries
    use this after a non-converged fold fit)."""
    theta = np.zeros(model.n_slots)
    y = model.data.y
    ybar = float(y.mean())
    v_count = np.log(ybar + 0.5)

    p0_obs = float((y == 0).mean())
    p0_pois = float(np.exp(-ybar))
    denom = max(1.0 - p0_pois, 1e-12)
    pi0 = min(max(0.01, (p0_obs - p0_pois) / denom), 0.99)
    v_zero = float(np.log(pi0) - np.log1p(-pi0))

    for comp, v in (("count", v_count), ("zero", v_zero)):
        slot = model.intercept_slot[comp]
        if slot is not None:
            theta[slot] = v
            continue
        for term in model.terms:
            if term.component == comp and term.is_spline and not term.drop_first:
                if term.natural:
                    # closest natural coefficient vector to (v, 0, ..., 0)
                    theta[term.coef_slots] = v * term.coef_map[0, :]
                else:
                    theta[term.coef_slots[0]] = v
                break

    if jitter_rng is not None:
        theta[: model.n_coef_slots] += jitter_rng.normal(0.0, 0.25, model.n_coef_slots)
    for term in model.terms:
        if term.knot_slots is not None:
            theta[term.knot_slots] = term.grid.interior
    return theta


def _coef_fit(
    model: AssembledModel, start=None, knot_bounds=None, *, tol_g, tol_f, max_iter, jitter_rng=None
):
    """Maximize the likelihood; knot slots are pinned unless bounds are given."""
    theta0 = (
        _initial_params(model, jitter_rng) if start is None else np.asarray(start, dtype=float)
    )
    lo = np.full(model.n_slots, -np.inf)
    hi = np.full(model.n_slots, np.inf)
    for term in model.terms:
        if term.knot_slots is None:
            continue
        if knot_bounds is not None and term.name in knot_bounds:
            box = knot_bounds[term.name]
            lo[term.knot_slots] = box.lo
            hi[term.knot_slots] = box.hi
        else:
            lo[term.knot_slots] = theta0[term.knot_slots]
            hi[term.knot_slots] = theta0[term.knot_slots]
    return maximize(
        model.log_likelihood,
        theta0,
        BoxBounds(lo, hi),
        tol_g=tol_g,
        tol_f=tol_f,
        max_iter=max_iter,
    )


def _pin_spec(spec: ModelSpec, data: Dataset, knots=None) -> ModelSpec:
    """Rewrite a spec with explicit fixed knot locations for every spline term.

    ``knots`` may be None (keep explicit or quantile defaults), a single
    array (model with exactly one spline term), or a dict keyed by term name
    as produced by the assembler (for example ``"count:x0"``).
    """
    built = assemble(spec, data)
    spline_names = [t.name for t in built.terms if t.is_spline]
    if knots is None:
        by_name = {}
    elif isinstance(knots, dict):
        unknown = set(knots) - set(spline_names)
        if unknown:
            raise KeyError(f"unknown spline term names {sorted(unknown)}; have {spline_names}")
        by_name = {k: np.asarray(v, dtype=float) for k, v in knots.items()}
    else:
        if len(spline_names) != 1:
            raise ValueError(
                "bare knot array is ambiguous with several spline terms; pass a dict keyed by term name"
            )
        by_name = {spline_names[0]: np.asarray(knots, dtype=float)}

    built_splines = iter([t for t in built.terms if t.is_spline])
    new_comp = {}
    for comp_name, comp in spec.components():
        new_terms = []
        for t in comp.terms:
            if isinstance(t, SplineTerm):
                bt = next(built_splines)
                interior = by_name.get(bt.name, np.asarray(bt.grid.interior))
                new_terms.append(
                    replace(t, knots=tuple(float(v) for v in interior), free_knots=False)
                )
            else:
                new_terms.append(t)
        new_comp[comp_name] = ComponentSpec(terms=tuple(new_terms), intercept=comp.intercept)
    return ModelSpec(
        family=spec.family,
        count=new_comp["count"],
        zero=new_comp.get("zero"),
    )


def fit_fixed_knots(
    spec: ModelSpec,
    data: Dataset,
    knots=None,
    *,
    tol_g: float = 1e-6,
    tol_f: float = 1e-9,
    max_iter: int = 500,
    jitter_rng=None,
) -> FittedModel:
    """Maximize the likelihood over coefficients (and dispersion) with every
    spline term's knots held fixed.

    Non-convergence is not an exception: the fit is returned flagged with
    ``converged=False`` and a warning record.
    """
    pinned = _pin_spec(spec, data, knots)
    model = assemble(pinned, data)
    report = _coef_fit(model, tol_g=tol_g, tol_f=tol_f, max_iter=max_iter, jitter_rng=jitter_rng)
    warnings = ()
    if not report.converged:
        warnings = (f"optimizer did not converge: {report.message}",)
    return FittedModel(
        spec=pinned,
        model=model,
        params=report.argmax,
        knots=model.knots_of(report.argmax),
        loglik=report.value,
        dimension=model.model_dimension(),
        n=data.n,
        converged=report.converged,
        n_iter=report.iterations,
        warnings=warnings,
        optim=report,
    )


def _feasible_knots(knots: np.ndarray, a: float, b: float, eps: float) -> np.ndarray:
    """Nudge knots so boxes can be built: inside [a+2eps, b-2eps] with gaps >= 2eps.

    Quantile knots on degenerate columns can start too close together; the
    fit would fail outright otherwise.
    """
    m = knots.size
    if (m + 1) * 2 * eps >= (b - a):
        raise ValueError(f"domain [{a}, {b}] is too narrow for {m} knots with eps={eps}")
    k = np.clip(knots.astype(float), a + 2 * eps, b - 2 * eps)
    for r in range(1, m):
        k[r] = max(k[r], k[r - 1] + 2 * eps)
    for r in range(m - 2, -1, -1):
        k[r] = min(k[r], k[r + 1] - 2 * eps)
    return k


def _adapt_boxes(knots: np.ndarray, cfg: BoxConfig, tol_active: float) -> bool:
    """Move box edges the knots are pressing against; returns True if any moved."""
    moved = False
    m = knots.size
    eps = cfg.eps
    for r in range(m):
        if cfg.hi[r] - knots[r] <= tol_active:  # pressing upward
            if r < m - 1:
                mid = 0.5 * (knots[r] + knots[r + 1])
                if knots[r + 1] - mid >= eps:
                    new_hi, new_lo = mid - 0.5 * eps, mid + 0.5 * eps
                    if abs(new_hi - cfg.hi[r]) > tol_active or abs(new_lo - cfg.lo[r + 1]) > tol_active:
                        cfg.hi[r], cfg.lo[r + 1] = new_hi, new_lo
                        moved = True
            else:
                new_hi = min(cfg.b - eps, 0.5 * (knots[r] + cfg.b))
                if abs(new_hi - cfg.hi[r]) > tol_active:
                    cfg.hi[r] = new_hi
                    moved = True
        if knots[r] - cfg.lo[r] <= tol_active:  # pressing downward
            if r > 0:
                mid = 0.5 * (knots[r - 1] + knots[r])
                if mid - knots[r - 1] >= eps:
                    new_lo, new_hi = mid + 0.5 * eps, mid - 0.5 * eps
                    if abs(new_lo - cfg.lo[r]) > tol_active or abs(new_hi - cfg.hi[r - 1]) > tol_active:
                        cfg.lo[r], cfg.hi[r - 1] = new_lo, new_hi
                        moved = True
            else:
                new_lo = max(cfg.a + eps, 0.5 * (cfg.a + knots[r]))
                if abs(new_lo - cfg.lo[r]) > tol_active:
                    cfg.lo[r] = new_lo
                    moved = True
    cfg.validate()
    return moved


def ebok_fit(
    spec: ModelSpec,
    data: Dataset,
    *,
    eps_frac: float = DEFAULT_EPS_FRAC,
    max_ebok_iter: int = DEFAULT_MAX_EBOK_ITER,
    tol_g: float = 1e-6,
    tol_f: float = 1e-9,
    max_iter: int = 500,
    jitter_rng=None,
) -> FittedModel:
    """Adaptive box-constrained knot fit; see the module docstring for the loop.

    Requires at least one variable-knot spline term. The minimal knot
    separation for a term is ``eps_frac`` times its covariate range.
    """
    model = assemble(spec, data)
    free_terms = [t for t in model.terms if t.knot_slots is not None]
    if not free_terms:
        raise ValueError("ebok_fit requires at least one variable-knot spline term")

    boxes: dict[str, BoxConfig] = {}
    theta = _initial_params(model, jitter_rng)
    for term in free_terms:
        a, b = term.grid.a, term.grid.b
        eps = eps_frac * (b - a)
        knots0 = _feasible_knots(np.asarray(term.grid.interior, dtype=float), a, b, eps)
        theta[term.knot_slots] = knots0
        boxes[term.name] = initial_boxes(knots0, a, b, eps)

    # stage 3: coefficients at the initial fixed knots
    start_report = _coef_fit(model, start=theta, tol_g=tol_g, tol_f=tol_f, max_iter=max_iter)
    theta = start_report.argmax

    trace = []
    warnings = []
    boundaries_converged = False
    report = start_report
    iterations = 0
    for iterations in range(1, max_ebok_iter + 1):
        report = _coef_fit(
            model, start=theta, knot_bounds=boxes, tol_g=tol_g, tol_f=tol_f, max_iter=max_iter
        )
        theta = report.argmax
        if not report.converged:
            warnings.append(f"joint maximization {iterations} did not converge: {report.message}")
        snapshot = {
            "iteration": iterations,
            "loglik": report.value,
            "knots": {t.name: theta[t.knot_slots].copy() for t in free_terms},
            "boxes": {name: cfg.copy() for name, cfg in boxes.items()},
        }
        trace.append(snapshot)

        moved = False
        for term in free_terms:
            tol_active = ACTIVE_TOL_FRAC * (term.grid.b - term.grid.a)
            moved |= _adapt_boxes(theta[term.knot_slots], boxes[term.name], tol_active)
        if not moved:
            boundaries_converged = True
            break

    if not boundaries_converged:
        warnings.append(f"box adaptation did not settle within {max_ebok_iter} iterations")

    return FittedModel(
        spec=spec,
        model=model,
        params=theta,
        knots=model.knots_of(theta),
        loglik=report.value,
        dimension=model.model_dimension(),
        n=data.n,
        converged=boundaries_converged and report.converged,
        n_iter=report.iterations,
        ebok_iterations=iterations,
        ebok_trace=tuple(trace),
        warnings=tuple(warnings),
        optim=report,
    )


def fit(spec: ModelSpec, data: Dataset, **options) -> FittedModel:
    """Dispatch: adaptive-knot fit when the spec has variable knots, else fixed."""
    has_free = any(
        isinstance(t, SplineTerm) and t.free_knots and t.n_knots > 0
        for _, comp in spec.components()
        for t in comp.terms
    )
    if has_free:
        return ebok_fit(spec, data, **options)
    options.pop("eps_frac", None)
    options.pop("max_ebok_iter", None)
    return fit_fixed_knots(spec, data, **options)
