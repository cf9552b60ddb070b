import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from metacal import metrics
from metacal.errors import AlignmentError, DegenerateMetricError, InvalidInputError
from metacal.estuary import TimeSeries

SIM = [1.0, 2.0, 3.0]
OBS = [0.0, 2.0, 4.0]

finite = st.floats(-10, 10, allow_nan=False)


class TestRMSE:
    def test_identical(self):
        assert metrics.rmse(SIM, SIM) == 0.0

    def test_constant_offset(self):
        assert metrics.rmse(np.array(OBS) + 0.3, OBS) == pytest.approx(0.3, abs=1e-15)

    def test_hand_value(self):
        assert abs(metrics.rmse(SIM, OBS) - math.sqrt(2 / 3)) <= 1e-12

    def test_length_mismatch(self):
        with pytest.raises(AlignmentError):
            metrics.rmse([1.0, 2.0], [1.0])

    def test_grid_mismatch(self):
        with pytest.raises(AlignmentError):
            metrics.rmse(TimeSeries(0.0, 60.0, np.zeros(3)), TimeSeries(0.0, 30.0, np.zeros(3)))


class TestBias:
    def test_values(self):
        assert metrics.bias(SIM, SIM) == 0.0
        assert abs(metrics.bias([3.0, 3.0], [1.0, 1.0]) - 2.0) <= 1e-12
        assert abs(metrics.bias(SIM, OBS)) <= 1e-12

    def test_sign_kept(self):
        assert metrics.bias([1.0, 1.0], [3.0, 3.0]) == -2.0


class TestNash:
    def test_perfect(self):
        assert metrics.nash(SIM, SIM) == 1.0

    def test_hand_value(self):
        # numerator 2, denominator sum (T - mean(O))^2 = 1 + 0 + 1
        assert abs(metrics.nash(SIM, OBS) - 0.0) <= 1e-12

    def test_standard_variant(self):
        # textbook denominator uses the observations: 4 + 0 + 4
        assert abs(metrics.nash(SIM, OBS, standard_nse=True) - 0.75) <= 1e-12

    def test_constant_at_observed_mean(self):
        with pytest.raises(DegenerateMetricError):
            metrics.nash([2.0, 2.0, 2.0], OBS)


class TestAggregate:
    def test_examples(self):
        assert metrics.aggregate([0.1, 0.1, 0.1], "mean") == pytest.approx(0.1)
        assert metrics.aggregate([0.1, 0.3], "std") == pytest.approx(0.1, abs=1e-15)
        assert metrics.aggregate([0.05, 0.2, 0.12], "max") == 0.2

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            metrics.aggregate([], "mean")

    def test_unknown_kind(self):
        with pytest.raises(InvalidInputError):
            metrics.aggregate([0.1], "median")

    @given(arrays(float, st.integers(1, 8), elements=st.floats(0, 5)))
    def test_order(self, e):
        mx, mean = metrics.aggregate(e, "max"), metrics.aggregate(e, "mean")
        assert mx >= mean - 1e-12 and mean >= e.min() - 1e-12

    def test_rows_match_scalar(self, rng):
        E = rng.random((5, 6))
        for kind in metrics.AGGREGATES:
            rows = metrics.aggregate_rows(E, kind)
            assert np.allclose(rows, [metrics.aggregate(r, kind) for r in E], rtol=0, atol=1e-15)


pairs = st.integers(1, 60).flatmap(lambda n: st.tuples(arrays(float, n, elements=finite), arrays(float, n, elements=finite)))


@settings(max_examples=200)
@given(pairs)
def test_rmse_bounds_bias(pair):
    a, b = pair
    assert metrics.rmse(a, b) >= abs(metrics.bias(a, b)) - 1e-12


@given(pairs, st.randoms(use_true_random=False))
def test_rmse_order_invariant(pair, rnd):
    a, b = pair
    idx = list(range(len(a)))
    rnd.shuffle(idx)
    assert metrics.rmse(a[idx], b[idx]) == pytest.approx(metrics.rmse(a, b), rel=1e-12, abs=1e-12)


@given(arrays(float, st.integers(2, 30), elements=finite))
def test_nash_one_iff_rmse_zero(a):
    if np.ptp(a) > 1e-6:
        assert metrics.nash(a, a) == 1.0
        assert metrics.nash(a + 0.1, a) < 1.0
