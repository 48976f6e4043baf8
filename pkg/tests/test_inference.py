import numpy as np
import pytest
from helpers import gaussian_units

from treeclust import inference
from treeclust.errors import FullModelUnfit, TooManyFailures
from treeclust.inference import bootstrap_ci, draw_indices
from treeclust.tsc import ModelSpec, fit_tsc


def planted(seed):
    return gaussian_units([-2] * 4 + [2] * 4, n_i=15, seed=seed, covariates=2, beta=[1.0, -0.5])


class TestBootstrap:
    def test_identical_resamples_give_zero_width(self):
        data = planted(0)
        idx = np.tile(np.arange(data.n_units), (2, 1))
        res = bootstrap_ci(data, ModelSpec(), B=2, indices=idx)
        for lo, hi in res.intervals.values():
            assert hi - lo == pytest.approx(0.0, abs=1e-12)
        # Resampling every unit once reproduces the original fit.
        np.testing.assert_allclose([res.intervals[n][0] for n in res.names], res.estimates, atol=1e-8)

    def test_fixed_seed_bit_exact(self):
        data = planted(1)
        a = bootstrap_ci(data, ModelSpec(), B=20, seed=5)
        b = bootstrap_ci(data, ModelSpec(), B=20, seed=5)
        assert a.replicates.tobytes() == b.replicates.tobytes()
        assert a.cluster_replicates.tobytes() == b.cluster_replicates.tobytes()
        assert a.intervals == b.intervals

    def test_parallel_matches_serial(self):
        data = planted(2)
        a = bootstrap_ci(data, ModelSpec(), B=8, seed=3)
        b = bootstrap_ci(data, ModelSpec(), B=8, seed=3, workers=2)
        assert a.replicates.tobytes() == b.replicates.tobytes()

    def test_draws_depend_only_on_seed_and_index(self):
        np.testing.assert_array_equal(draw_indices(10, 5, 7)[:3], draw_indices(10, 3, 7))

    def test_level_nesting(self):
        data = planted(3)
        wide = bootstrap_ci(data, ModelSpec(), B=30, level=0.99, seed=1)
        narrow = bootstrap_ci(data, ModelSpec(), B=30, level=0.90, seed=1)
        for name in wide.names:
            assert wide.intervals[name][0] <= narrow.intervals[name][0]
            assert narrow.intervals[name][1] <= wide.intervals[name][1]

    def test_structure(self):
        data = planted(4)
        res = bootstrap_ci(data, ModelSpec(), B=10, seed=0)
        assert res.names[:2] == ("x1", "x2")
        assert res.replicates.shape == (res.n_used, 2)
        assert res.n_used == res.B - res.n_failed
        for lo, hi in res.intervals.values():
            assert lo <= hi

    @pytest.mark.parametrize("B,level", [(1, 0.95), (10, 1.0), (10, 0.0)])
    def test_preconditions(self, B, level):
        with pytest.raises(ValueError):
            bootstrap_ci(planted(0), ModelSpec(), B=B, level=level)

    def test_too_many_failures(self, monkeypatch):
        data = planted(0)
        fit = fit_tsc(data)

        def unfit(*args, **kwargs):
            raise FullModelUnfit("injected")

        monkeypatch.setattr(inference, "fit_tsc", unfit)
        with pytest.raises(TooManyFailures):
            bootstrap_ci(data, ModelSpec(), B=4, fit=fit)

    @pytest.mark.slow
    def test_coverage_of_shared_slope(self):
        hits = 0
        for outer in range(100):
            # Percentile intervals over 8 resampled units undercover (about 86%).
            data = gaussian_units([-2] * 10 + [2] * 10, n_i=10, seed=100 + outer, covariates=2, beta=[1.0, -0.5])
            res = bootstrap_ci(data, ModelSpec(), B=200, seed=outer)
            lo, hi = res.intervals["x1"]
            hits += lo <= 1.0 <= hi
        assert 90 <= hits <= 100
