import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oste.dataset import Feature, FeatureSchema, SurvivalDataset
from oste.errors import ConcordanceUndefinedError, MetricUndefinedError
from oste.estimators import StepFunction, censoring_km
from oste.metrics import (
    brier_curve_from_matrix,
    brier_score,
    c_index,
    default_eval_grid,
    integrated_brier_score,
)

from oracles import brier_oracle, cindex_oracle, trapezoid_oracle


def one_feature_dataset(times, status):
    schema = FeatureSchema((Feature("row", "numeric"),))
    n = len(times)
    return SurvivalDataset(schema, np.arange(n, dtype=float)[:, None], times, status)


def curve_predictor(values_by_row, knot=0.5):
    """predict(x) -> flat survival curve with value values_by_row[int(x[0])]."""

    def predict(x):
        return StepFunction([knot], [values_by_row[int(x[0])]], initial_value=1.0)

    return predict


class TestCIndex:
    def test_perfect_concordance(self):
        res = c_index([3, 2, 1], [1, 2, 3], [True, True, True])
        assert res.concordance == 1.0
        assert res.permissible_pairs == 3
        assert res.error == 0.0

    def test_anti_perfect(self):
        res = c_index([1, 2, 3], [1, 2, 3], [True, True, True])
        assert res.concordance == 0.0

    def test_tied_scores_unequal_times(self):
        res = c_index([1.0, 1.0], [1, 2], [True, True])
        assert res.concordance == 0.5

    def test_discard_rules(self):
        # equal times, both events: discarded
        with pytest.raises(ConcordanceUndefinedError):
            c_index([1, 2], [5, 5], [True, True])
        # censored at the lower time point: discarded
        with pytest.raises(ConcordanceUndefinedError):
            c_index([1, 2], [1, 2], [False, True])

    def test_equal_times_one_event(self):
        # event subject scored riskier: full credit
        assert c_index([2, 1], [5, 5], [True, False]).concordance == 1.0
        # censored subject scored riskier: half credit
        assert c_index([1, 2], [5, 5], [True, False]).concordance == 0.5
        # tied scores at tied times: full credit
        assert c_index([1, 1], [5, 5], [True, False]).concordance == 1.0

    def test_equal_times_both_censored(self):
        assert c_index([1, 1], [5, 5], [False, False]).concordance == 1.0
        assert c_index([1, 2], [5, 5], [False, False]).concordance == 0.5

    def test_six_row_hand_case_matches_oracle(self):
        scores = [3.0, 1.0, 2.0, 2.0, 5.0, 0.5]
        times = [2.0, 4.0, 4.0, 6.0, 6.0, 6.0]
        status = [True, True, False, True, False, False]
        res = c_index(scores, times, status)
        conc, pairs, credited = cindex_oracle(scores, times, status)
        assert res.concordance == conc
        assert res.permissible_pairs == pairs
        assert res.concordant == credited

    def test_matches_oracle_randomized(self):
        rng = np.random.default_rng(123)
        checked = 0
        for _ in range(500):
            n = rng.integers(2, 11)
            times = rng.integers(1, 5, size=n).astype(float)
            scores = rng.integers(0, 4, size=n).astype(float)
            status = rng.random(n) < 0.6
            expected = cindex_oracle(scores.tolist(), times.tolist(), status.tolist())
            if expected is None:
                with pytest.raises(ConcordanceUndefinedError):
                    c_index(scores, times, status)
                continue
            res = c_index(scores, times, status)
            assert res.concordance == expected[0]
            assert res.permissible_pairs == expected[1]
            checked += 1
        assert checked > 300

    def test_random_scores_near_half(self):
        rng = np.random.default_rng(77)
        times = rng.exponential(size=4000)
        status = rng.random(4000) < 0.7
        scores = rng.standard_normal(4000)
        assert abs(c_index(scores, times, status).concordance - 0.5) < 0.05


@given(
    st.lists(st.integers(-50, 50), min_size=2, max_size=12),
    st.integers(0, 2**31),
)
@settings(max_examples=150, deadline=None)
def test_cindex_rank_invariance(score_ints, seed):
    rng = np.random.default_rng(seed)
    n = len(score_ints)
    times = rng.integers(1, 6, size=n).astype(float)
    status = rng.random(n) < 0.6
    scores = np.asarray(score_ints, dtype=float)
    transformed = scores**3  # strictly increasing, exact on small ints
    try:
        base = c_index(scores, times, status)
    except ConcordanceUndefinedError:
        return
    trans = c_index(transformed, times, status)
    assert base.concordance == trans.concordance


@given(st.integers(0, 2**31))
@settings(max_examples=100, deadline=None)
def test_cindex_antisymmetry_tie_free(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 12))
    times = rng.permutation(np.arange(1.0, n + 1))  # distinct times
    scores = rng.permutation(np.arange(1.0, n + 1))  # distinct scores
    status = rng.random(n) < 0.7
    try:
        forward = c_index(scores, times, status)
    except ConcordanceUndefinedError:
        return
    backward = c_index(-scores, times, status)
    assert forward.concordance + backward.concordance == pytest.approx(1.0, abs=1e-12)


class TestBrierScore:
    def test_perfect_prediction_no_censoring(self):
        times = np.array([1.0, 2.0, 3.0])
        status = np.array([True, True, True])
        ds = one_feature_dataset(times, status)

        def predict(x):
            i = int(x[0])
            return StepFunction([times[i]], [0.0], initial_value=1.0)

        assert brier_score(predict, ds, 1.5) == 0.0

    def test_uncensored_equals_mean_squared_residual(self):
        rng = np.random.default_rng(5)
        n = 12
        times = rng.exponential(size=n) + 0.1
        status = np.ones(n, dtype=bool)
        values = rng.random(n)
        ds = one_feature_dataset(times, status)
        t0 = float(np.median(times))
        expected = np.mean(((times > t0).astype(float) - values) ** 2)
        got = brier_score(curve_predictor(values, knot=1e-9), ds, t0)
        assert got == pytest.approx(expected, abs=1e-12)

    def test_five_row_hand_case(self):
        times = np.array([2.0, 3.0, 5.0, 7.0, 8.0])
        status = np.array([True, False, True, True, False])
        values = np.array([0.2, 0.4, 0.4, 0.7, 0.9])
        ds = one_feature_dataset(times, status)
        got = brier_score(curve_predictor(values, knot=1e-9), ds, 5.0)
        # weights: 1, 0, 1/G(5-)=4/3, 1/G(5)=4/3, 4/3; total/5 = 29/375
        assert got == pytest.approx(29 / 375, abs=1e-12)
        oracle = brier_oracle(times.tolist(), status.tolist(), values.tolist(), 5.0)
        assert got == pytest.approx(oracle, abs=1e-12)

    def test_matches_oracle_randomized(self):
        rng = np.random.default_rng(9)
        for _ in range(40):
            n = int(rng.integers(3, 10))
            times = rng.integers(1, 8, size=n).astype(float)
            status = rng.random(n) < 0.6
            values = rng.random(n)
            ds = one_feature_dataset(times, status)
            t0 = float(rng.uniform(0.5, times.max()))
            oracle = brier_oracle(times.tolist(), status.tolist(), values.tolist(), t0)
            if oracle is None:
                continue
            got = brier_score(curve_predictor(values, knot=1e-9), ds, t0)
            assert got == pytest.approx(oracle, abs=1e-12)

    def test_bounded_by_max_weight(self):
        rng = np.random.default_rng(31)
        times = rng.integers(1, 9, size=15).astype(float)
        status = rng.random(15) < 0.5
        values = rng.random(15)
        ds = one_feature_dataset(times, status)
        ghat = censoring_km(times, status)
        t0 = float(np.median(times))
        w_max = max(1.0 / max(ghat(t0), 1e-300), 1.0 / max(ghat.left_limit(times).min(), 1e-300))
        try:
            got = brier_score(curve_predictor(values, knot=1e-9), ds, t0)
        except MetricUndefinedError:
            return
        assert 0.0 <= got <= w_max

    def test_undefined_with_external_ghat(self):
        # external censoring estimate that dies before survivors do
        times = np.array([1.0, 5.0])
        status = np.array([True, True])
        ds = one_feature_dataset(times, status)
        dead_ghat = StepFunction([2.0], [0.0], initial_value=1.0)
        with pytest.raises(MetricUndefinedError):
            brier_score(curve_predictor([0.5, 0.5]), ds, 3.0, ghat=dead_ghat)

    def test_t0_out_of_range(self):
        ds = one_feature_dataset(np.array([1.0, 2.0]), np.array([True, True]))
        with pytest.raises(ValueError):
            brier_score(curve_predictor([0.5, 0.5]), ds, 99.0)


def linear_bs_predictor(times, grid, b):
    """Single-subject predictor making BS(t) = b*(t-grid[0])/(span) at grid points."""
    span = grid[-1] - grid[0]
    surv_vals = 1.0 - np.sqrt(b * (grid - grid[0]) / span)

    def predict(x):
        return StepFunction(grid, surv_vals, initial_value=1.0)

    return predict


class TestIntegratedBrierScore:
    def test_constant_bs_integrates_to_itself(self):
        c = 0.09
        times = np.array([11.0])
        status = np.array([True])
        ds = one_feature_dataset(times, status)
        grid = np.linspace(1.0, 10.0, 10)

        def predict(x):
            return StepFunction([1e-9], [1.0 - np.sqrt(c)], initial_value=1.0)

        curve = integrated_brier_score(predict, ds, grid=grid)
        assert curve.ibs == pytest.approx(c, abs=1e-12)

    def test_linear_bs_integrates_to_half_peak(self):
        b = 0.36
        times = np.array([11.0])
        status = np.array([True])
        ds = one_feature_dataset(times, status)
        grid = np.linspace(1.0, 10.0, 19)
        curve = integrated_brier_score(linear_bs_predictor(times, grid, b), ds, grid=grid)
        assert curve.ibs == pytest.approx(b / 2.0, abs=1e-9)

    def test_refinement_consistency(self):
        # piecewise-linear BS: refining the grid on the linear pieces
        # leaves the trapezoidal integral unchanged
        b = 0.25
        times = np.array([11.0])
        status = np.array([True])
        ds = one_feature_dataset(times, status)
        coarse = np.linspace(1.0, 10.0, 4)
        fine = np.unique(np.concatenate((coarse, np.linspace(1.0, 10.0, 10))))
        predict = linear_bs_predictor(times, fine, b)
        ibs_coarse = integrated_brier_score(predict, ds, grid=coarse).ibs
        ibs_fine = integrated_brier_score(predict, ds, grid=fine).ibs
        assert ibs_fine == pytest.approx(ibs_coarse, abs=1e-9)

    def test_default_grid_is_event_times(self):
        times = np.array([1.0, 2.0, 2.0, 3.0, 4.0])
        status = np.array([True, False, True, True, False])
        ds = one_feature_dataset(times, status)
        grid = default_eval_grid(times, status)
        np.testing.assert_array_equal(grid, [1.0, 2.0, 3.0])
        curve = integrated_brier_score(curve_predictor(np.full(5, 0.5), knot=1e-9), ds)
        np.testing.assert_array_equal(curve.grid, grid)
        assert curve.t_star == 3.0

    def test_matches_trapezoid_oracle(self):
        rng = np.random.default_rng(21)
        times = rng.integers(1, 10, size=20).astype(float)
        status = rng.random(20) < 0.7
        values = rng.random(20)
        ds = one_feature_dataset(times, status)
        curve = integrated_brier_score(curve_predictor(values, knot=1e-9), ds)
        if curve.grid.size > 1:
            expected = trapezoid_oracle(curve.grid.tolist(), curve.scores.tolist()) / (
                curve.t_star - curve.grid[0]
            )
            assert curve.ibs == pytest.approx(expected, abs=1e-12)

    def test_skipping_with_external_ghat(self):
        times = np.array([1.0, 2.0, 6.0])
        status = np.array([True, True, True])
        ds = one_feature_dataset(times, status)
        dying_ghat = StepFunction([3.0], [0.0], initial_value=1.0)
        with pytest.warns(UserWarning, match="skipped"):
            curve = integrated_brier_score(
                curve_predictor([0.5, 0.5, 0.5], knot=1e-9), ds,
                grid=np.array([1.5, 4.0]), ghat=dying_ghat,
            )
        assert curve.skipped == (4.0,)
        np.testing.assert_array_equal(curve.grid, [1.5])

    def test_all_skipped_raises(self):
        times = np.array([1.0, 6.0])
        status = np.array([True, True])
        ds = one_feature_dataset(times, status)
        dead_ghat = StepFunction([0.5], [0.0], initial_value=1.0)
        with pytest.raises(MetricUndefinedError):
            integrated_brier_score(
                curve_predictor([0.5, 0.5]), ds, grid=np.array([2.0, 3.0]), ghat=dead_ghat
            )

    def test_matrix_path_equals_predict_path(self):
        rng = np.random.default_rng(55)
        times = rng.integers(1, 10, size=15).astype(float)
        status = rng.random(15) < 0.6
        values = rng.random(15)
        ds = one_feature_dataset(times, status)
        predict = curve_predictor(values, knot=1e-9)
        via_predict = integrated_brier_score(predict, ds)
        grid = via_predict.grid
        surv = np.vstack([predict(ds.X[i])(grid) for i in range(ds.n)])
        via_matrix = brier_curve_from_matrix(
            times, status, surv, grid, censoring_km(times, status)
        )
        assert via_matrix.ibs == via_predict.ibs

    def test_csv_and_summary(self):
        times = np.array([1.0, 2.0, 3.0])
        status = np.array([True, True, True])
        ds = one_feature_dataset(times, status)
        curve = integrated_brier_score(curve_predictor([0.5, 0.5, 0.5], knot=1e-9), ds)
        lines = curve.to_csv().strip().splitlines()
        assert lines[0] == "time,brier_score"
        assert len(lines) == curve.grid.size + 1
        summary = curve.summary_record()
        assert summary.endswith(",0")
        assert repr(curve.ibs) in summary
