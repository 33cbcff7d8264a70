"""Information criteria, fold construction, cross-validation, and grid runner tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zispline.estimation import FittedModel, fit_fixed_knots
from zispline.model import ComponentSpec, Dataset, LinearTerm, ModelSpec, SplineTerm, assemble
from zispline.selection import cv_mre, grid_run, make_folds, score
from zispline.simulation import Study1Config, study1_generate


def _fake_fit(loglik, dimension, n):
    spec = ModelSpec(family="poisson", count=ComponentSpec(intercept=True))
    data = Dataset(y=np.ones(n, dtype=int), X=np.zeros((n, 1)))
    model = assemble(spec, data)
    return FittedModel(
        spec=spec,
        model=model,
        params=np.zeros(1),
        knots={},
        loglik=loglik,
        dimension=dimension,
        n=n,
        converged=True,
        n_iter=0,
    )


class TestScore:
    def test_formulas(self):
        s = score(_fake_fit(-100.0, 5, 200))
        assert s.aic == 210.0
        assert s.bic == pytest.approx(200.0 + 5 * np.log(200.0), abs=1e-12)
        assert s.bic == pytest.approx(226.4915, abs=1e-3)

    def test_extra_parameter_costs_two_aic(self):
        s5 = score(_fake_fit(-100.0, 5, 200))
        s6 = score(_fake_fit(-100.0, 6, 200))
        assert s6.aic - s5.aic == pytest.approx(2.0)

    def test_rank_invariance_under_loglik_shift(self):
        lls = np.array([-120.0, -100.0, -110.0])
        dims = np.array([3, 8, 5])
        base = [score(_fake_fit(ll, d, 100)) for ll, d in zip(lls, dims)]
        shifted = [score(_fake_fit(ll + 17.3, d, 100)) for ll, d in zip(lls, dims)]
        assert np.argmin([s.aic for s in base]) == np.argmin([s.aic for s in shifted])
        assert np.argmin([s.bic for s in base]) == np.argmin([s.bic for s in shifted])


class TestMakeFolds:
    def test_equal_sizes(self):
        plan = make_folds(200, 20, seed=0)
        sizes = np.bincount(plan.assignment)
        assert sizes.tolist() == [10] * 20

    def test_leave_one_out(self):
        plan = make_folds(10, 10, seed=1)
        assert sorted(np.bincount(plan.assignment).tolist()) == [1] * 10

    def test_deterministic(self):
        a = make_folds(57, 7, seed=3).assignment
        b = make_folds(57, 7, seed=3).assignment
        np.testing.assert_array_equal(a, b)

    def test_k_greater_than_n_rejected(self):
        with pytest.raises(ValueError):
            make_folds(5, 6)

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(2, 120), seed=st.integers(0, 999))
    def test_exhaustive_disjoint_balanced(self, n, seed):
        k = min(n, 1 + seed % 25)
        plan = make_folds(n, k, seed=seed)
        sizes = np.bincount(plan.assignment, minlength=k)
        assert sizes.sum() == n
        assert sizes.max() - sizes.min() <= 1


class TestCvMre:
    def test_constant_data_zero_error(self):
        data = Dataset(y=np.full(40, 3, dtype=int), X=np.linspace(0, 1, 40).reshape(-1, 1))
        spec = ModelSpec(family="poisson", count=ComponentSpec(intercept=True))
        res = cv_mre(spec, data, folds=5, seed=0, tol_g=1e-10)
        assert res.value == pytest.approx(0.0, abs=1e-6)
        assert res.valid

    def test_leave_one_out_matches_hand_rolled_loop(self):
        rng = np.random.default_rng(4)
        y = rng.poisson(3.0, 10)
        y[0] = max(y[0], 1)  # keep every training fold non-degenerate
        data = Dataset(y=y, X=np.zeros((10, 1)))
        spec = ModelSpec(family="poisson", count=ComponentSpec(intercept=True))
        plan = make_folds(10, 10, seed=5)
        res = cv_mre(spec, data, plan=plan, tol_g=1e-12)

        resid = np.empty(10)
        for fold in range(10):
            held = plan.fold_rows(fold)
            train_rows = np.nonzero(plan.assignment != fold)[0]
            train = Dataset(y=y[train_rows], X=np.zeros((len(train_rows), 1)))
            fitted = fit_fixed_knots(spec, train, tol_g=1e-12)
            _, _, mean = fitted.predict(np.zeros((len(held), 1)))
            resid[held] = y[held] - mean
        assert res.value == pytest.approx(np.abs(resid).mean(), abs=1e-9)

    def test_squared_kind_is_rmse(self):
        rng = np.random.default_rng(6)
        y = rng.poisson(2.0, 30)
        data = Dataset(y=y, X=np.zeros((30, 1)))
        spec = ModelSpec(family="poisson", count=ComponentSpec(intercept=True))
        res_abs = cv_mre(spec, data, folds=5, seed=7, kind="abs")
        res_sq = cv_mre(spec, data, folds=5, seed=7, kind="sq")
        assert res_sq.value >= res_abs.value

    def test_out_of_range_held_out_rows_are_clamped(self):
        # one extreme covariate lands alone in a fold; prediction must clamp
        x = np.concatenate([np.linspace(0, 1, 29), [5.0]])
        rng = np.random.default_rng(8)
        y = rng.poisson(2.0, 30)
        data = Dataset(y=y, X=x.reshape(-1, 1))
        spec = ModelSpec(
            family="poisson",
            count=ComponentSpec(terms=(SplineTerm(0, degree=3, n_knots=1),), intercept=True),
        )
        res = cv_mre(spec, data, folds=5, seed=9)
        assert np.isfinite(res.value)
        assert res.n_clamped >= 1

    def test_invalid_kind(self):
        data = Dataset(y=np.ones(10, dtype=int), X=np.zeros((10, 1)))
        spec = ModelSpec(family="poisson", count=ComponentSpec(intercept=True))
        with pytest.raises(ValueError, match="abs"):
            cv_mre(spec, data, kind="median")


def _study1_specs():
    zero = ComponentSpec(terms=(LinearTerm(0),), intercept=True)
    linear = ModelSpec("zip", ComponentSpec(terms=(LinearTerm(0),), intercept=True), zero)
    true_spline = ModelSpec(
        "zip",
        ComponentSpec(terms=(SplineTerm(0, degree=3, knots=(1 / 3, 2 / 3)),), intercept=True),
        zero,
    )
    return [("linear", linear), ("true", true_spline)]


class TestGridRun:
    def test_single_model_wins(self):
        data = study1_generate(Study1Config(alpha=2.0, seed=1), 0)
        named = _study1_specs()[:1]
        rep = grid_run([named[0][1]], data, names=[named[0][0]], top_t=1, folds=5)
        assert rep.winner == 0
        assert rep.ranked == [0]

    def test_true_spec_wins_aic_majority(self):
        wins = 0
        for rep_i in range(5):
            data = study1_generate(Study1Config(alpha=3.0, n=400, seed=10), rep_i)
            named = _study1_specs()
            report = grid_run([s for _, s in named], data, names=[n for n, _ in named], top_t=0)
            best = report.ranked[0]
            wins += report.entries[best].name == "true"
        assert wins >= 3

    def test_failures_recorded_not_fatal(self):
        data = study1_generate(Study1Config(alpha=1.0, seed=11), 0)
        bad = ModelSpec(
            family="poisson",
            count=ComponentSpec(terms=(SplineTerm(0, degree=3, n_knots=500),), intercept=True),
        )
        good = _study1_specs()[0][1]
        report = grid_run([bad, good], data, names=["bad", "good"], top_t=1, folds=5)
        assert report.entries[0].error is not None
        assert report.ranked == [1]
        assert report.winner == 1

    def test_empty_grid_rejected(self):
        data = study1_generate(Study1Config(alpha=1.0, seed=12), 0)
        with pytest.raises(ValueError, match="empty"):
            grid_run([], data)

    def test_mre_only_computed_for_top_t(self):
        data = study1_generate(Study1Config(alpha=3.0, seed=13), 0)
        named = _study1_specs()
        report = grid_run(
            [s for _, s in named], data, names=[n for n, _ in named], top_t=1, folds=5
        )
        ranked = report.ranked_entries()
        assert ranked[0].cv is not None
        assert ranked[1].cv is None


def test_true_model_beats_null_in_cv_median():
    # strongly structured data: the generating model's cross-validated error
    # should not exceed the intercept-only model's, in the median over seeds
    true_spec = ModelSpec(
        family="poisson", count=ComponentSpec(terms=(LinearTerm(0),), intercept=True)
    )
    null_spec = ModelSpec(family="poisson", count=ComponentSpec(intercept=True))
    diffs = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        x = rng.uniform(0, 1, 150)
        y = rng.poisson(np.exp(0.5 + 2.0 * x))
        data = Dataset(y=y, X=x.reshape(-1, 1))
        mre_true = cv_mre(true_spec, data, folds=10, seed=seed).value
        mre_null = cv_mre(null_spec, data, folds=10, seed=seed).value
        diffs.append(mre_true - mre_null)
    assert np.median(diffs) <= 0
