"""Univariate B-spline bases on clamped knot vectors.

Everything here is a pure function of its inputs. A basis is described by a
:class:`KnotGrid`: boundary knots ``a < b``, a strictly increasing list of
interior knots, and a degree ``d``. The boundary knots are repeated ``d + 1``
times (clamped convention), so the basis has ``len(interior) + d + 1``
functions, the first of which takes the value 1 at ``a`` and the last the
value 1 at ``b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "KnotGrid",
    "NaturalCubicMap",
    "basis_eval",
    "basis_matrix",
    "spline_eval",
    "spline_derivative",
    "spline_deriv2_at_boundary",
    "natural_cubic_map",
]

# Evaluation points this close to a boundary (relative to b - a) are snapped
# onto it, to absorb floating point drift in generated covariates.
SNAP_REL_TOL = 1e-12


@dataclass(frozen=True)
class KnotGrid:
    """Domain of one spline term: boundary knots, interior knots, degree."""

    a: float
    b: float
    interior: tuple[float, ...]
    degree: int

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "interior", tuple(float(t) for t in self.interior))
        if not isinstance(self.degree, (int, np.integer)) or self.degree < 0:
            raise ValueError(f"degree must be a non-negative integer, got {self.degree!r}")
        object.__setattr__(self, "degree", int(self.degree))
        if not np.isfinite(self.a) or not np.isfinite(self.b) or self.a >= self.b:
            raise ValueError(f"boundary knots must satisfy a < b, got a={self.a}, b={self.b}")
        prev = self.a
        for t in self.interior:
            if not np.isfinite(t) or t <= prev:
                raise ValueError(
                    f"interior knots must be strictly increasing inside ({self.a}, {self.b}), got {self.interior}"
                )
            prev = t
        if self.interior and self.interior[-1] >= self.b:
            raise ValueError(
                f"interior knots must be strictly increasing inside ({self.a}, {self.b}), got {self.interior}"
            )

    @property
    def n_interior(self) -> int:
        return len(self.interior)

    @property
    def n_basis(self) -> int:
        return len(self.interior) + self.degree + 1

    def full_knots(self) -> np.ndarray:
        """Clamped knot vector: a repeated d+1 times, interior, b repeated d+1 times."""
        d = self.degree
        return np.concatenate([np.full(d + 1, self.a), self.interior, np.full(d + 1, self.b)])

    def with_interior(self, interior) -> "KnotGrid":
        return replace(self, interior=tuple(float(t) for t in interior))


def _snap(u: np.ndarray, grid: KnotGrid) -> np.ndarray:
    tol = SNAP_REL_TOL * (grid.b - grid.a)
    u = np.where(np.abs(u - grid.a) <= tol, grid.a, u)
    u = np.where(np.abs(u - grid.b) <= tol, grid.b, u)
    return u


def basis_matrix(values, grid: KnotGrid) -> np.ndarray:
    """Evaluate all basis functions at each value; row i is the basis at values[i].

    Uses the triangular Cox-de Boor scheme on the clamped knot vector,
    vectorized over evaluation points. Support intervals are half open,
    closed at ``b`` so the last basis equals 1 there.

    Raises ValueError naming the first offending index if any value lies
    outside ``[a, b]`` (after boundary snapping).
    """
    u = np.atleast_1d(np.asarray(values, dtype=float))
    if u.ndim != 1:
        raise ValueError("values must be one-dimensional")
    n = u.shape[0]
    d = grid.degree
    out = np.zeros((n, grid.n_basis))
    if n == 0:
        return out

    u = _snap(u, grid)
    bad = (u < grid.a) | (u > grid.b) | ~np.isfinite(u)
    if bad.any():
        i = int(np.argmax(bad))
        raise ValueError(
            f"value {values[i]!r} at index {i} is outside the spline domain [{grid.a}, {grid.b}]"
        )

    t = grid.full_knots()
    # Knot span per point: largest j with t[j] <= u, clipped to the
    # non-degenerate spans [d, len(t) - d - 2]; u == b lands on the last span.
    spans = np.searchsorted(t, u, side="right") - 1
    spans = np.clip(spans, d, len(t) - d - 2)

    basis = np.zeros((n, d + 1))
    basis[:, 0] = 1.0
    if d > 0:
        # neighborhood knots per point, gathered once: column k holds t[span + 1 - d + k]
        nbr = t[spans[:, None] + np.arange(1 - d, d + 1)[None, :]]
        for j in range(1, d + 1):
            saved = np.zeros(n)
            for r in range(j):
                right = nbr[:, r + d] - u
                left = u - nbr[:, r - j + d]
                temp = basis[:, r] / (right + left)
                basis[:, r] = saved + right * temp
                saved = left * temp
            basis[:, j] = saved

    rows = np.repeat(np.arange(n), d + 1)
    cols = (spans[:, None] - d + np.arange(d + 1)).ravel()
    out[rows, cols] = basis.ravel()
    return out


def basis_eval(u: float, grid: KnotGrid) -> np.ndarray:
    """Vector of the m+d+1 basis function values at a single point in [a, b]."""
    return basis_matrix([u], grid)[0]


def spline_eval(u, grid: KnotGrid, coeffs) -> float | np.ndarray:
    """Spline value(s): dot product of the basis at u with the coefficients."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (grid.n_basis,):
        raise ValueError(
            f"expected {grid.n_basis} coefficients for this grid, got {coeffs.shape}"
        )
    scalar = np.isscalar(u) or np.ndim(u) == 0
    vals = basis_matrix(np.atleast_1d(u), grid) @ coeffs
    return float(vals[0]) if scalar else vals


def _derivative_coeffs(t: np.ndarray, coeffs: np.ndarray, degree: int) -> np.ndarray:
    # Standard difference formula; denominators are positive on a clamped
    # vector with strictly increasing interior knots.
    i = np.arange(len(coeffs) - 1)
    denom = t[i + degree + 1] - t[i + 1]
    return degree * (coeffs[1:] - coeffs[:-1]) / denom


def spline_derivative(grid: KnotGrid, coeffs) -> tuple[KnotGrid, np.ndarray]:
    """Grid and coefficients of the first derivative spline (degree d-1).

    The derivative of a clamped spline is again clamped, over the same
    interior knots.
    """
    if grid.degree < 1:
        raise ValueError("cannot differentiate a degree-0 spline")
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (grid.n_basis,):
        raise ValueError(
            f"expected {grid.n_basis} coefficients for this grid, got {coeffs.shape}"
        )
    dcoeffs = _derivative_coeffs(grid.full_knots(), coeffs, grid.degree)
    return replace(grid, degree=grid.degree - 1), dcoeffs


def second_derivative_matrix(grid: KnotGrid) -> np.ndarray:
    """Matrix M with (M @ coeffs) = coefficients of the second derivative spline."""
    if grid.degree < 2:
        raise ValueError("second derivative requires degree >= 2")
    t = grid.full_knots()
    n = grid.n_basis
    d = grid.degree

    def diff_matrix(tt, nn, dd):
        i = np.arange(nn - 1)
        denom = tt[i + dd + 1] - tt[i + 1]
        m = np.zeros((nn - 1, nn))
        m[i, i] = -dd / denom
        m[i, i + 1] = dd / denom
        return m

    d1 = diff_matrix(t, n, d)
    d2 = diff_matrix(t[1:-1], n - 1, d - 1)
    return d2 @ d1


def spline_deriv2_at_boundary(grid: KnotGrid, coeffs, side: str) -> float:
    """Analytic second derivative of the spline at boundary knot a or b."""
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (grid.n_basis,):
        raise ValueError(
            f"expected {grid.n_basis} coefficients for this grid, got {coeffs.shape}"
        )
    d2 = second_derivative_matrix(grid) @ coeffs
    # The second derivative spline is clamped, so its value at a boundary is
    # the first (or last) coefficient.
    return float(d2[0] if side == "left" else d2[-1])


@dataclass(frozen=True)
class NaturalCubicMap:
    """Orthonormal basis of cubic coefficient vectors with zero second
    derivative at both boundary knots.

    ``reduction`` has shape (m+4, m+2); multiplying a reduced coefficient
    vector by it yields full B-spline coefficients of a natural cubic spline.
    """

    grid: KnotGrid
    reduction: np.ndarray = field(repr=False)

    @property
    def n_reduced(self) -> int:
        return self.reduction.shape[1]

    def expand(self, reduced) -> np.ndarray:
        reduced = np.asarray(reduced, dtype=float)
        if reduced.shape != (self.n_reduced,):
            raise ValueError(
                f"expected {self.n_reduced} reduced coefficients, got {reduced.shape}"
            )
        return self.reduction @ reduced


def _orthonormal_columns(mat: np.ndarray) -> np.ndarray:
    # QR with a sign convention so the result is deterministic and varies
    # continuously with the knots (needed when knots are optimized).
    q, r = np.linalg.qr(mat)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def constrained_coef_map(grid: KnotGrid, natural: bool, drop_first: bool) -> np.ndarray:
    """Map from free coefficients to full B-spline coefficients.

    ``drop_first`` pins the first coefficient to zero (used to remove the
    redundant constant when several spline terms share a component).
    ``natural`` additionally imposes zero second derivatives at both
    boundaries; the natural map is orthonormalized because its columns are
    constructed by eliminating two dependent coefficients.
    """
    n = grid.n_basis
    if not natural:
        if not drop_first:
            return np.eye(n)
        m = np.zeros((n, n - 1))
        m[1:, :] = np.eye(n - 1)
        return m

    if grid.degree != 3:
        raise ValueError("natural constraint requires a cubic spline (degree 3)")
    constraints = second_derivative_matrix(grid)[[0, -1], :]
    # Eliminate coefficients 1 and n-2: each boundary constraint couples only
    # three coefficients at its own end, so this 2x2 solve is well posed.
    dep = [1, n - 2]
    free = [i for i in range(n) if i not in dep]
    sol = np.linalg.solve(constraints[:, dep], -constraints[:, free])
    mat = np.zeros((n, len(free)))
    mat[free, :] = np.eye(len(free))
    mat[dep, :] = sol
    if drop_first:
        mat = mat[:, 1:]
    return _orthonormal_columns(mat)


def natural_cubic_map(grid: KnotGrid) -> NaturalCubicMap:
    """Reduction of a cubic grid onto the natural (boundary-flat) subspace."""
    if grid.degree != 3:
        raise ValueError(f"natural cubic map requires degree 3, got degree {grid.degree}")
    return NaturalCubicMap(grid=grid, reduction=constrained_coef_map(grid, True, False))
