import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from treeclust.errors import LengthMismatch
from treeclust.metrics import ReplicationMetrics, mse_intercepts, mse_linear, summarize_cell
from treeclust.simulate import Scenario, simulate
from treeclust.study import run_cell, run_replication, score_gfm

finite = st.floats(-1e3, 1e3, allow_nan=False)


class TestMse:
    def test_exact_is_zero(self):
        assert mse_intercepts([1.0, 2.0], [1.0, 2.0]) == 0.0
        assert mse_linear([2.0, 2.0], [2.0, 2.0]) == 0.0

    def test_hand_values(self):
        assert mse_intercepts([1.0, -1.0], [0.0, 0.0]) == pytest.approx(1.0)
        assert mse_linear([2.1, 1.7], [2.0, 2.0]) == pytest.approx(0.05)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            mse_intercepts([1.0], [1.0, 2.0])
        with pytest.raises(LengthMismatch):
            mse_linear([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])

    @given(st.lists(st.tuples(finite, finite), min_size=1, max_size=30), st.randoms())
    def test_permutation_invariant_and_nonnegative(self, pairs, rnd):
        est, tru = map(np.array, zip(*pairs))
        value = mse_intercepts(est, tru)
        assert value >= 0
        perm = list(range(len(pairs)))
        rnd.shuffle(perm)
        assert mse_intercepts(est[perm], tru[perm]) == pytest.approx(value, rel=1e-12, abs=1e-12)


class TestSummarizeCell:
    def test_single_replication(self):
        rm = ReplicationMetrics("TSC", 0.4, 0.03, 5)
        s = summarize_cell([rm])["TSC"]
        assert (s.mse_intercepts, s.mse_linear, s.n_clusters) == (0.4, 0.03, 5.0)
        assert s.replications == 1

    def test_two_replications_mean(self):
        s = summarize_cell([ReplicationMetrics("TSC", 0.4, 0.0, 4, 0),
                            ReplicationMetrics("TSC", 0.6, 0.0, 6, 1)])
        assert s["TSC"].mse_intercepts == pytest.approx(0.5)
        assert s["TSC"].n_clusters == pytest.approx(5.0)
        assert 0.4 <= s["TSC"].p10["mse_intercepts"] <= s["TSC"].p90["mse_intercepts"] <= 0.6

    def test_failures_counted_not_averaged(self):
        s = summarize_cell([ReplicationMetrics("TSC", 0.4, 0.1, 3, 0),
                            ReplicationMetrics.failure("TSC", 1)])
        assert s["TSC"].n_failed == 1
        assert s["TSC"].replications == 2
        assert s["TSC"].mse_intercepts == 0.4

    def test_all_failed_is_nan(self):
        s = summarize_cell([ReplicationMetrics.failure("GFM", 0)])
        assert math.isnan(s["GFM"].mse_intercepts)

    def test_empty(self):
        with pytest.raises(ValueError):
            summarize_cell([])


class TestHarness:
    def test_gfm_matches_direct_least_squares(self):
        sim = simulate(Scenario.standard(40, 20, 5, seed=8))
        data = sim.dataset
        X = np.column_stack([data.X, np.eye(data.n_units)[data.unit]])
        coef, *_ = np.linalg.lstsq(X, data.y, rcond=None)
        expected = mse_intercepts(coef[2:], sim.true_unit_intercepts)
        got = score_gfm(sim)
        assert got.mse_intercepts == pytest.approx(expected, abs=1e-10)
        assert got.mse_linear == pytest.approx(mse_linear(coef[:2], sim.true_beta), abs=1e-10)
        assert got.n_clusters == 40

    def test_replication_methods(self):
        sc = Scenario.standard(20, 10, 5, seed=1)
        rows = run_replication(sc, 0)
        assert [r.method for r in rows] == ["GFM", "TSC"]
        binary = run_replication(Scenario.standard(20, 20, 5, dist="chisq", family="binomial", seed=1), 0)
        assert [r.method for r in binary] == ["TSC"]

    def test_cell_means_within_replication_range(self):
        rows = run_cell(Scenario.standard(20, 10, 5, seed=2), 5)
        summary = summarize_cell(rows)
        for method in ("GFM", "TSC"):
            vals = [r.mse_intercepts for r in rows if r.method == method]
            assert min(vals) <= summary[method].mse_intercepts <= max(vals)

    def test_parallel_matches_serial(self):
        sc = Scenario.standard(20, 10, 5, seed=3)
        assert run_cell(sc, 4, workers=2) == run_cell(sc, 4)
