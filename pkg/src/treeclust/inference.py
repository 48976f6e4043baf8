"""Unit-level nonparametric bootstrap with percentile intervals."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import TooManyFailures, TreeClustError
from .partition import cluster_design
from .simulate import replication_rng
from .tsc import ModelSpec, TreeFit, fit_tsc, fit_with_fallback


@dataclass(frozen=True)
class BootstrapResult:
    """Percentile intervals for shared coefficients and cluster intercepts.

    Cluster-intercept draws hold the original partition fixed; a cluster
    absent from a resample contributes ``nan`` for that replicate.
    """

    names: tuple[str, ...]
    estimates: np.ndarray
    replicates: np.ndarray
    cluster_replicates: np.ndarray
    intervals: dict[str, tuple[float, float]]
    level: float
    n_failed: int
    B: int

    @property
    def n_used(self) -> int:
        return self.B - self.n_failed


def draw_indices(n: int, B: int, seed: int) -> np.ndarray:
    """Unit indices for each replicate; row ``b`` depends only on ``(seed, b)``."""
    return np.vstack([replication_rng(seed, b).integers(0, n, size=n) for b in range(B)])


def _replicate(args):
    data, spec, units, cluster_of, n_clusters = args
    sample = data.take_units(units)
    try:
        tree = fit_tsc(sample, spec)
    except TreeClustError:
        return None
    labels = cluster_of[units]
    present = np.unique(labels)
    # Re-index to the clusters present so the dummy design stays full rank.
    remap = np.full(n_clusters, -1)
    remap[present] = np.arange(present.size)
    design = cluster_design(sample, remap[labels], present.size)
    intercepts = np.full(n_clusters, np.nan)
    try:
        fit = fit_with_fallback(sample.y, design, spec.family, spec.ridge_fallback)
        intercepts[present] = fit.coefficients[data.n_covariates:]
    except TreeClustError:
        pass
    return tree.shared_beta, intercepts


def _percentile_intervals(draws: np.ndarray, level: float) -> np.ndarray:
    g = 1.0 - level
    with np.errstate(all="ignore"):
        lo = np.nanquantile(draws, g / 2.0, axis=0, method="linear")
        hi = np.nanquantile(draws, 1.0 - g / 2.0, axis=0, method="linear")
    return np.column_stack([lo, hi])


def bootstrap_ci(data: Dataset, spec: ModelSpec, B: int, level: float = 0.95, seed: int = 0,
                 *, fit: TreeFit | None = None, indices=None, workers: int = 1) -> BootstrapResult:
    """Resample units with replacement, refit, and take percentile intervals.

    ``indices`` (shape ``(B, n)``) overrides the random unit draws.
    """
    if B < 2:
        raise ValueError("B must be at least 2")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    fit = fit or fit_tsc(data, spec)
    n = data.n_units
    if indices is None:
        indices = draw_indices(n, B, seed)
    indices = np.asarray(indices, dtype=np.int64)
    if indices.shape != (B, n):
        raise ValueError(f"indices must have shape ({B}, {n})")
    cluster_of = fit.partition.cluster_of
    m = fit.n_clusters
    jobs = [(data, spec, indices[b], cluster_of, m) for b in range(B)]
    if workers <= 1:
        results = [_replicate(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate, jobs, chunksize=max(1, B // (4 * workers))))
    ok = [r for r in results if r is not None]
    n_failed = B - len(ok)
    if n_failed > B / 2:
        raise TooManyFailures(f"{n_failed} of {B} bootstrap replicates failed")
    p = data.n_covariates
    shared = np.array([r[0] for r in ok]).reshape(len(ok), p)
    clusters = np.array([r[1] for r in ok]).reshape(len(ok), m)
    names = tuple(data.covariate_names) + tuple(f"cluster{k + 1}" for k in range(m))
    estimates = np.concatenate([fit.shared_beta, fit.cluster_intercepts.values])
    bounds = _percentile_intervals(np.hstack([shared, clusters]), level)
    intervals = {name: (float(lo), float(hi)) for name, (lo, hi) in zip(names, bounds)}
    return BootstrapResult(names, estimates, shared, clusters, intervals, level, n_failed, B)
