"""B-spline basis, derivative, and natural-constraint tests.

The reference implementation here is a deliberately naive textbook
recursion, independent of the production triangular scheme.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zispline.splines import (
    KnotGrid,
    basis_eval,
    basis_matrix,
    natural_cubic_map,
    spline_derivative,
    spline_deriv2_at_boundary,
    spline_eval,
)


def naive_basis(x, i, d, t, b):
    """Recursive two-term recurrence, support closed at the right boundary."""
    if d == 0:
        if t[i] <= x < t[i + 1]:
            return 1.0
        if x == b and t[i] < t[i + 1] and t[i + 1] == b:
            return 1.0
        return 0.0
    v = 0.0
    if t[i + d] != t[i]:
        v += (x - t[i]) / (t[i + d] - t[i]) * naive_basis(x, i, d - 1, t, b)
    if t[i + d + 1] != t[i + 1]:
        v += (t[i + d + 1] - x) / (t[i + d + 1] - t[i + 1]) * naive_basis(x, i + 1, d - 1, t, b)
    return v


def naive_row(u, grid):
    t = grid.full_knots()
    return np.array([naive_basis(float(u), i, grid.degree, t, grid.b) for i in range(grid.n_basis)])


def random_grid(rng, degree=None, m=None):
    d = int(rng.integers(0, 4)) if degree is None else degree
    m = int(rng.integers(0, 7)) if m is None else m
    a = float(rng.normal(0, 2))
    b = a + float(rng.uniform(0.5, 4.0))
    interior = np.sort(rng.uniform(a + 0.02, b - 0.02, m))
    while np.any(np.diff(interior) < 1e-3):
        interior = np.sort(rng.uniform(a + 0.02, b - 0.02, m))
    return KnotGrid(a, b, tuple(interior), d)


class TestKnotGrid:
    def test_basis_count(self):
        g = KnotGrid(0.0, 1.0, (0.3, 0.6), 3)
        assert g.n_basis == 2 + 3 + 1
        assert len(g.full_knots()) == 2 + 2 * (3 + 1)

    def test_clamping(self):
        g = KnotGrid(0.0, 2.0, (1.0,), 2)
        t = g.full_knots()
        assert list(t[:3]) == [0.0, 0.0, 0.0]
        assert list(t[-3:]) == [2.0, 2.0, 2.0]

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(a=1.0, b=0.0, interior=(), degree=1),
            dict(a=0.0, b=1.0, interior=(0.5, 0.5), degree=1),
            dict(a=0.0, b=1.0, interior=(0.0,), degree=1),
            dict(a=0.0, b=1.0, interior=(1.0,), degree=1),
            dict(a=0.0, b=1.0, interior=(), degree=-1),
        ],
    )
    def test_invalid_grids(self, kwargs):
        with pytest.raises(ValueError):
            KnotGrid(**kwargs)


class TestBasisEval:
    def test_degree_zero_constant(self):
        g = KnotGrid(0.0, 1.0, (), 0)
        assert basis_eval(0.5, g).tolist() == [1.0]

    def test_clamped_left_endpoint(self):
        g = KnotGrid(0.0, 1.0, (1 / 3, 2 / 3), 3)
        np.testing.assert_array_equal(basis_eval(0.0, g), [1, 0, 0, 0, 0, 0])

    def test_right_endpoint_closed(self):
        g = KnotGrid(0.0, 1.0, (1 / 3, 2 / 3), 3)
        np.testing.assert_array_equal(basis_eval(1.0, g), [0, 0, 0, 0, 0, 1])

    def test_midpoint_frozen_values(self):
        # independently computed with the naive recursion: exact 32nds
        g = KnotGrid(0.0, 1.0, (1 / 3, 2 / 3), 3)
        expected = np.array([0.0, 1 / 32, 15 / 32, 15 / 32, 1 / 32, 0.0])
        np.testing.assert_allclose(basis_eval(0.5, g), expected, atol=1e-14)

    def test_matches_naive_recursion(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            g = random_grid(rng)
            us = np.concatenate([[g.a, g.b], rng.uniform(g.a, g.b, 5)])
            B = basis_matrix(us, g)
            for i, u in enumerate(us):
                np.testing.assert_allclose(B[i], naive_row(u, g), atol=1e-12)

    def test_non_negative(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            g = random_grid(rng)
            B = basis_matrix(rng.uniform(g.a, g.b, 20), g)
            assert np.all(B >= 0)

    def test_local_support(self):
        # basis i vanishes outside its d+2 consecutive knots
        g = KnotGrid(0.0, 1.0, tuple(np.linspace(0.2, 0.8, 4)), 3)
        t = g.full_knots()
        us = np.linspace(0, 1, 501)
        B = basis_matrix(us, g)
        for i in range(g.n_basis):
            outside = (us < t[i] - 1e-12) | (us > t[i + g.degree + 1] + 1e-12)
            assert np.all(B[outside, i] == 0.0)

    def test_domain_error_names_index(self):
        g = KnotGrid(0.0, 1.0, (0.5,), 2)
        with pytest.raises(ValueError, match="index 2"):
            basis_matrix([0.1, 0.2, 1.7], g)

    def test_boundary_snap(self):
        g = KnotGrid(0.0, 1.0, (0.5,), 3)
        row = basis_matrix([1.0 + 1e-13], g)
        np.testing.assert_array_equal(row[0], basis_eval(1.0, g))
        with pytest.raises(ValueError):
            basis_matrix([1.0 + 1e-6], g)


@settings(max_examples=150, deadline=None)
@given(
    degree=st.integers(0, 3),
    m=st.integers(0, 6),
    u01=st.floats(0.0, 1.0),
    seed=st.integers(0, 10_000),
)
def test_partition_of_unity(degree, m, u01, seed):
    rng = np.random.default_rng(seed)
    g = random_grid(rng, degree=degree, m=m)
    u = g.a + u01 * (g.b - g.a)
    assert abs(basis_eval(u, g).sum() - 1.0) < 1e-12


class TestBasisMatrix:
    def test_empty(self):
        g = KnotGrid(0.0, 1.0, (0.5,), 1)
        assert basis_matrix([], g).shape == (0, 3)

    def test_single_left_endpoint_row(self):
        g = KnotGrid(0.0, 1.0, (0.4,), 3)
        np.testing.assert_array_equal(basis_matrix([0.0], g), [[1, 0, 0, 0, 0]])

    def test_rows_match_basis_eval(self):
        rng = np.random.default_rng(3)
        g = random_grid(rng, degree=3, m=3)
        us = rng.uniform(g.a, g.b, 50)
        B = basis_matrix(us, g)
        for i, u in enumerate(us):
            np.testing.assert_array_equal(B[i], basis_eval(u, g))


class TestSplineEval:
    def test_partition_of_unity_constant(self):
        g = KnotGrid(0.0, 1.0, (0.2, 0.7), 3)
        for u in np.linspace(0, 1, 17):
            assert abs(spline_eval(u, g, np.full(6, 3.25)) - 3.25) < 1e-12

    def test_alternating_coeffs_left_value(self):
        g = KnotGrid(0.0, 1.0, (1 / 3, 2 / 3), 3)
        coeffs = 2.0 * np.array([1, -1, 1, -1, 1, -1], dtype=float)
        assert spline_eval(0.0, g, coeffs) == 2.0

    def test_matches_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            g = random_grid(rng)
            coeffs = rng.normal(0, 2, g.n_basis)
            u = rng.uniform(g.a, g.b)
            expected = naive_row(u, g) @ coeffs
            assert abs(spline_eval(u, g, coeffs) - expected) < 1e-12

    def test_size_mismatch(self):
        g = KnotGrid(0.0, 1.0, (0.5,), 3)
        with pytest.raises(ValueError, match="coefficients"):
            spline_eval(0.5, g, np.ones(4))


class TestDerivatives:
    def test_first_derivative_matches_finite_differences(self):
        rng = np.random.default_rng(21)
        g = random_grid(rng, degree=3, m=3)
        coeffs = rng.normal(0, 1, g.n_basis)
        dgrid, dcoeffs = spline_derivative(g, coeffs)
        h = 1e-6 * (g.b - g.a)
        for u in np.linspace(g.a + 5 * h, g.b - 5 * h, 13):
            fd = (spline_eval(u + h, g, coeffs) - spline_eval(u - h, g, coeffs)) / (2 * h)
            exact = spline_eval(u, dgrid, dcoeffs)
            assert abs(fd - exact) <= 1e-5 * max(1.0, abs(exact))

    def test_deriv2_boundary_matches_finite_differences(self):
        rng = np.random.default_rng(22)
        for _ in range(10):
            g = random_grid(rng, degree=3, m=2)
            coeffs = rng.normal(0, 1, g.n_basis)
            h = 1e-4 * (g.b - g.a)
            for side, x0, sgn in (("left", g.a, 1), ("right", g.b, -1)):
                # second-order one-sided stencil pointing into the domain
                f = [spline_eval(x0 + sgn * k * h, g, coeffs) for k in range(4)]
                fd = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / h**2
                exact = spline_deriv2_at_boundary(g, coeffs, side)
                assert abs(fd - exact) <= 1e-4 * max(1.0, abs(exact))

    def test_linear_trend_zero_second_derivative(self):
        g = KnotGrid(0.0, 2.0, (0.5, 1.2), 3)
        t = g.full_knots()
        # Greville abscissae make these coefficients reproduce 2x + 1 exactly
        greville = np.array([t[i + 1 : i + 4].mean() for i in range(g.n_basis)])
        coeffs = 2.0 * greville + 1.0
        assert abs(spline_deriv2_at_boundary(g, coeffs, "left")) < 1e-10
        assert abs(spline_deriv2_at_boundary(g, coeffs, "right")) < 1e-10

    def test_degree_too_low(self):
        g = KnotGrid(0.0, 1.0, (0.5,), 1)
        with pytest.raises(ValueError):
            spline_deriv2_at_boundary(g, np.ones(3), "left")


class TestNaturalCubicMap:
    def test_requires_cubic(self):
        with pytest.raises(ValueError):
            natural_cubic_map(KnotGrid(0.0, 1.0, (0.5,), 2))

    def test_no_interior_knots_spans_affine(self):
        g = KnotGrid(0.0, 1.0, (), 3)
        nm = natural_cubic_map(g)
        assert nm.reduction.shape == (4, 2)
        # affine functions are representable in the reduced space
        xs = np.linspace(0, 1, 9)
        design = basis_matrix(xs, g) @ nm.reduction
        target = 3.0 * xs + 1.0
        coef, *_ = np.linalg.lstsq(design, target, rcond=None)
        np.testing.assert_allclose(design @ coef, target, atol=1e-12)

    def test_two_interior_knots_shape(self):
        g = KnotGrid(0.0, 1.0, (1 / 3, 2 / 3), 3)
        nm = natural_cubic_map(g)
        assert nm.reduction.shape == (6, 4)

    def test_full_column_rank_and_orthonormal(self):
        rng = np.random.default_rng(31)
        for m in (0, 1, 2, 4):
            g = random_grid(rng, degree=3, m=m)
            nm = natural_cubic_map(g)
            assert np.linalg.matrix_rank(nm.reduction) == m + 2
            np.testing.assert_allclose(
                nm.reduction.T @ nm.reduction, np.eye(m + 2), atol=1e-12
            )

    def test_boundary_second_derivatives_vanish(self):
        rng = np.random.default_rng(32)
        for m in (0, 1, 3, 5):
            g = random_grid(rng, degree=3, m=m)
            nm = natural_cubic_map(g)
            for _ in range(5):
                reduced = rng.normal(0, 3, nm.n_reduced)
                coeffs = nm.expand(reduced)
                assert abs(spline_deriv2_at_boundary(g, coeffs, "left")) < 1e-10
                assert abs(spline_deriv2_at_boundary(g, coeffs, "right")) < 1e-10

    def test_map_continuous_in_knots(self):
        # the reduction must not jump when knots move slightly (variable
        # knot fits rely on this)
        g1 = KnotGrid(0.0, 1.0, (0.3, 0.6), 3)
        g2 = KnotGrid(0.0, 1.0, (0.3 + 1e-7, 0.6), 3)
        m1 = natural_cubic_map(g1).reduction
        m2 = natural_cubic_map(g2).reduction
        assert np.abs(m1 - m2).max() < 1e-5
