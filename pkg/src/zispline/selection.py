"""Model comparison: AIC, BIC, K-fold cross-validated mean residual error,
and a grid runner that fits a list of candidate specs and designates a winner.

The grid workflow preselects the best models by AIC, then checks their
predictive power by cross-validated mean residual error; the MRE minimizer
among the preselected models is the designated winner.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .estimation import FittedModel, fit
from .model import Dataset, ModelSpec

__all__ = [
    "SelectionScore",
    "FoldPlan",
    "CVResult",
    "GridEntry",
    "GridReport",
    "score",
    "make_folds",
    "cv_mre",
    "grid_run",
]


@dataclass(frozen=True)
class SelectionScore:
    loglik: float
    dimension: int
    n: int
    aic: float
    bic: float
    converged: bool
    cv_mre: float | None = None

    @classmethod
    def from_fit(cls, result: FittedModel, cv_mre: float | None = None) -> "SelectionScore":
        p = result.dimension
        n = result.n
        return cls(
            loglik=result.loglik,
            dimension=p,
            n=n,
            aic=-2.0 * result.loglik + 2.0 * p,
            bic=-2.0 * result.loglik + p * float(np.log(n)),
            converged=result.converged,
            cv_mre=cv_mre,
        )


def score(result: FittedModel) -> SelectionScore:
    """AIC and BIC of a fit; every estimated scalar counts toward the dimension."""
    return SelectionScore.from_fit(result)


@dataclass(frozen=True)
class FoldPlan:
    """Disjoint folds covering all rows, sizes differing by at most one."""

    n: int
    k: int
    assignment: np.ndarray
    seed: int

    def fold_rows(self, fold: int) -> np.ndarray:
        return np.nonzero(self.assignment == fold)[0]


def make_folds(n: int, k: int, seed: int = 0) -> FoldPlan:
    """Randomly split n rows into k non-overlapping folds of near-equal size."""
    if k < 1 or k > n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    for fold, rows in enumerate(np.array_split(perm, k)):
        assignment[rows] = fold
    return FoldPlan(n=n, k=k, assignment=assignment, seed=seed)


@dataclass(frozen=True)
class CVResult:
    value: float
    kind: str
    plan: FoldPlan
    n_clamped: int
    n_retried: int
    valid: bool
    fold_failures: tuple[int, ...] = ()


def _spline_bounds(result: FittedModel):
    out = []
    for term in result.model.terms:
        if term.is_spline:
            out.append((term.col, term.grid.a, term.grid.b))
    return out


def cv_mre(
    spec: ModelSpec,
    data: Dataset,
    plan: FoldPlan | None = None,
    *,
    folds: int = 20,
    seed: int = 0,
    kind: str = "abs",
    **fit_options,
) -> CVResult:
    """Cross-validated mean residual error of the raw residuals y - (1-pi)mu.

    ``kind="abs"`` averages absolute residuals; ``kind="sq"`` reports the
    root mean squared residual. Held-out spline covariates outside the
    training boundary knots are clamped onto the boundary (and counted), so
    every observation receives a prediction. A fold whose fit does not
    converge is retried once from a perturbed start; if both attempts fail
    the result is flagged invalid.
    """
    if kind not in ("abs", "sq"):
        raise ValueError(f"kind must be 'abs' or 'sq', got {kind!r}")
    if plan is None:
        plan = make_folds(data.n, folds, seed)
    if plan.n != data.n:
        raise ValueError(f"fold plan is for n={plan.n} but data has n={data.n}")

    residuals = np.empty(data.n)
    n_clamped = 0
    n_retried = 0
    failures = []
    for fold in range(plan.k):
        test_rows = plan.fold_rows(fold)
        train_rows = np.nonzero(plan.assignment != fold)[0]
        train = Dataset(
            y=data.y[train_rows], X=data.X[train_rows], columns=data.columns
        )
        try:
            result = fit(spec, train, **fit_options)
        except Exception:
            result = None
        if result is None or not result.converged:
            n_retried += 1
            rng = np.random.default_rng((plan.seed, fold, 1))
            try:
                result = fit(spec, train, jitter_rng=rng, **fit_options)
            except Exception:
                result = None
        if result is None:
            failures.append(fold)
            residuals[test_rows] = np.nan
            continue
        X_test = data.X[test_rows]
        for col, a, b in _spline_bounds(result):
            vals = X_test[:, col]
            n_clamped += int(np.sum((vals < a) | (vals > b)))
        _, _, mean = result.predict(X_test, clip=True)
        residuals[test_rows] = data.y[test_rows] - mean

    valid = not failures
    usable = residuals[~np.isnan(residuals)]
    if usable.size == 0:
        value = np.nan
    elif kind == "abs":
        value = float(np.mean(np.abs(usable)))
    else:
        value = float(np.sqrt(np.mean(usable**2)))
    return CVResult(
        value=value,
        kind=kind,
        plan=plan,
        n_clamped=n_clamped,
        n_retried=n_retried,
        valid=valid,
        fold_failures=tuple(failures),
    )


@dataclass
class GridEntry:
    index: int
    name: str
    spec: ModelSpec
    result: FittedModel | None = None
    score: SelectionScore | None = None
    cv: CVResult | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.score is not None


@dataclass
class GridReport:
    entries: list[GridEntry]
    ranked: list[int] = field(default_factory=list)  # entry indices, best AIC first
    winner: int | None = None  # entry index of the MRE winner among the AIC top T
    top_t: int = 0

    def ranked_entries(self) -> list[GridEntry]:
        return [self.entries[i] for i in self.ranked]


def grid_run(
    specs,
    data: Dataset,
    *,
    names=None,
    top_t: int = 20,
    folds: int = 20,
    seed: int = 0,
    mre_kind: str = "abs",
    **fit_options,
) -> GridReport:
    """Fit every candidate spec, rank by AIC, cross-validate the top ``top_t``
    by MRE, and designate the MRE minimizer as the winner.

    Per-model failures are recorded and never abort the grid. Results are
    ordered deterministically by spec index, not completion order.
    """
    specs = list(specs)
    if not specs:
        raise ValueError("the model grid is empty")
    if names is None:
        names = [f"model{i}" for i in range(len(specs))]
    entries = [GridEntry(index=i, name=names[i], spec=s) for i, s in enumerate(specs)]

    for entry in entries:
        try:
            result = fit(entry.spec, data, **fit_options)
            entry.result = result
            entry.score = SelectionScore.from_fit(result)
        except Exception as exc:  # noqa: BLE001 - failures are data, not bugs
            entry.error = f"{type(exc).__name__}: {exc}"

    ok = [e for e in entries if e.ok]
    if not ok:
        return GridReport(entries=entries, ranked=[], winner=None, top_t=top_t)
    ranked = sorted(ok, key=lambda e: (e.score.aic, e.index))

    winner = None
    best_mre = np.inf
    for entry in ranked[: max(0, top_t)]:
        cv = cv_mre(
            entry.spec, data, folds=folds, seed=seed, kind=mre_kind, **fit_options
        )
        entry.cv = cv
        entry.score = SelectionScore.from_fit(entry.result, cv_mre=cv.value)
        if cv.valid and cv.value < best_mre:
            best_mre = cv.value
            winner = entry.index
    return GridReport(
        entries=entries,
        ranked=[e.index for e in ranked],
        winner=winner,
        top_t=top_t,
    )
