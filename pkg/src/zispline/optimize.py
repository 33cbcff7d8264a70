"""Box-constrained smooth maximization with finite-difference gradients.

A thin layer over scipy's L-BFGS-B (projected quasi-Newton) that

* maximizes instead of minimizing,
* supplies central finite-difference gradients with per-coordinate steps
  ``1e-6 * max(1, |x_i|)``, switching to one-sided differences next to an
  active bound so no trial point leaves the box,
* treats non-finite objective values as rejected steps (they are mapped to a
  huge negative value, which the line search backs away from),
* falls back to a bounded Nelder-Mead simplex when the quasi-Newton run fails
  to improve, since objectives involving knot positions are only piecewise
  smooth,
* never returns a point outside the box or worse than the start.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

__all__ = ["BoxBounds", "OptimReport", "maximize", "fd_gradient"]

_EPS = np.finfo(float).eps
_REJECT = -1e300  # stand-in for -inf / nan objective values


@dataclass(frozen=True)
class BoxBounds:
    """Closed per-coordinate intervals; +-inf endpoints mean unbounded."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lo and hi must be 1-d arrays of equal length")
        if np.any(lo > hi):
            raise ValueError("every bound must satisfy lo <= hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def unbounded(cls, n: int) -> "BoxBounds":
        return cls(np.full(n, -np.inf), np.full(n, np.inf))

    def contains(self, x, atol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - atol) and np.all(x <= self.hi + atol))

    def clip(self, x) -> np.ndarray:
        return np.minimum(np.maximum(np.asarray(x, dtype=float), self.lo), self.hi)


@dataclass
class OptimReport:
    argmax: np.ndarray
    value: float
    iterations: int
    n_evals: int
    converged: bool
    active_bounds: frozenset[int]
    best_trace: list[float] = field(repr=False, default_factory=list)
    message: str = ""


def fd_gradient(objective, x, bounds: BoxBounds, rel_step: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient, one-sided next to an active bound.

    Probe steps shrink by a factor of 10 (up to three times) when the
    objective is non-finite at a probe point.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    grad = np.zeros(n)
    f_center = None
    for i in range(n):
        h = rel_step * max(1.0, abs(x[i]))
        for _ in range(4):
            up_ok = x[i] + h <= bounds.hi[i]
            dn_ok = x[i] - h >= bounds.lo[i]
            if up_ok and dn_ok:
                xp = x.copy(); xp[i] += h
                xm = x.copy(); xm[i] -= h
                fp, fm = objective(xp), objective(xm)
                if np.isfinite(fp) and np.isfinite(fm):
                    grad[i] = (fp - fm) / (2.0 * h)
                    break
            else:
                if f_center is None:
                    f_center = objective(x)
                if up_ok:
                    xp = x.copy(); xp[i] += h
                    fp = objective(xp)
                    if np.isfinite(fp) and np.isfinite(f_center):
                        grad[i] = (fp - f_center) / h
                        break
                elif dn_ok:
                    xm = x.copy(); xm[i] -= h
                    fm = objective(xm)
                    if np.isfinite(fm) and np.isfinite(f_center):
                        grad[i] = (f_center - fm) / h
                        break
                else:
                    # fully pinned coordinate
                    break
            h /= 10.0
        # else: leave the component at 0; the objective is flat or broken here
    return grad


def maximize(
    objective,
    start,
    bounds: BoxBounds | None = None,
    *,
    tol_g: float = 1e-6,
    tol_f: float = 1e-9,
    max_iter: int = 500,
    rel_step: float = 1e-6,
) -> OptimReport:
    """Maximize a smooth objective under box constraints.

    Stops when the projected gradient infinity norm drops below ``tol_g``,
    the relative objective change drops below ``tol_f``, or after
    ``max_iter`` iterations. The returned point always lies inside the
    bounds and its value is never below the starting value.
    """
    x0 = np.asarray(start, dtype=float).copy()
    if bounds is None:
        bounds = BoxBounds.unbounded(x0.size)
    if x0.shape != bounds.lo.shape:
        raise ValueError(f"start has shape {x0.shape} but bounds have shape {bounds.lo.shape}")
    if not bounds.contains(x0):
        raise ValueError("start point lies outside the bounds")

    f0 = float(objective(x0))
    if not np.isfinite(f0):
        raise ValueError("objective is not finite at the start point")

    state = {"best_x": x0.copy(), "best_f": f0, "n_evals": 1, "trace": [f0]}

    def eval_obj(x):
        val = objective(x)
        val = float(val) if np.isfinite(val) else _REJECT
        state["n_evals"] += 1
        if val > state["best_f"] and bounds.contains(x, atol=1e-12):
            state["best_f"] = val
            state["best_x"] = np.array(x, dtype=float)
        state["trace"].append(state["best_f"])
        return val

    def neg_fun(x):
        return -eval_obj(x)

    def neg_jac(x):
        return -fd_gradient(eval_obj, x, bounds, rel_step=rel_step)

    scipy_bounds = list(zip(bounds.lo, bounds.hi))
    res = minimize(
        neg_fun,
        x0,
        jac=neg_jac,
        method="L-BFGS-B",
        bounds=scipy_bounds,
        options={
            "maxiter": max_iter,
            "ftol": tol_f,
            "gtol": tol_g,
            "maxls": 40,
            "maxcor": 25,
        },
    )
    iterations = int(res.nit)
    converged = bool(res.success)
    message = str(res.message)

    # Fallback for piecewise-smooth objectives: a failed line search (status
    # 2) usually means a kink; polish with a bounded simplex. Hitting the
    # iteration cap (status 1) stays a non-convergence.
    if res.status == 2:
        res_nm = minimize(
            neg_fun,
            state["best_x"],
            method="Nelder-Mead",
            bounds=scipy_bounds,
            options={"maxiter": 200 * x0.size, "xatol": 1e-8, "fatol": 1e-10},
        )
        iterations += int(res_nm.nit)
        if res_nm.success:
            converged = True
            message = str(res_nm.message)

    x_best = bounds.clip(state["best_x"])
    f_best = max(state["best_f"], f0)

    span = np.where(np.isfinite(bounds.hi - bounds.lo), bounds.hi - bounds.lo, 1.0)
    atol = 1e-10 * np.maximum(1.0, np.abs(span))
    active = frozenset(
        int(i)
        for i in range(x_best.size)
        if (np.isfinite(bounds.lo[i]) and x_best[i] - bounds.lo[i] <= atol[i])
        or (np.isfinite(bounds.hi[i]) and bounds.hi[i] - x_best[i] <= atol[i])
    )
    return OptimReport(
        argmax=x_best,
        value=f_best,
        iterations=iterations,
        n_evals=state["n_evals"],
        converged=converged,
        active_bounds=active,
        best_trace=state["trace"],
        message=message,
    )
