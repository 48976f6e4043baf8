"""Tree-structured clustering of unit-specific intercepts.

Units are ordered by their fixed-effects intercepts; the search then adds
one threshold indicator at a time.  At every step all free thresholds are
scored by the likelihood-ratio statistic of "current model + candidate"
against the current model, and the best one is kept only if the current
clustered model is rejected against the full fixed-effects model, tested
with ``n - l`` degrees of freedom at step ``l``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import FullModelUnfit, RankDeficient, Separation, TreeClustError
from .glm import DEFAULT_RIDGE, Family, GlmFit, fit_glm, lr_test
from .partition import (
    ClusterIntercepts,
    Partition,
    UnitOrder,
    expand_design,
    finalize,
    fit_full,
    full_design,
    order_units,
    unit_intercepts,
)


@dataclass(frozen=True)
class ModelSpec:
    family: Family = Family.GAUSSIAN
    alpha: float = 0.05
    max_splits: int | None = None
    ridge_ordering: float = DEFAULT_RIDGE
    ridge_fallback: float = DEFAULT_RIDGE

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.max_splits is not None and self.max_splits < 0:
            raise ValueError("max_splits must be non-negative")
        if self.ridge_ordering < 0 or self.ridge_fallback < 0:
            raise ValueError("ridge values must be non-negative")


@dataclass(frozen=True)
class SplitRecord:
    step: int
    chosen_threshold: int
    candidate_stats: tuple[tuple[int, float, float], ...]
    global_stat: float
    global_df: int
    global_p: float
    accepted: bool


@dataclass(frozen=True)
class TreeFit:
    spec: ModelSpec
    order: UnitOrder
    partition: Partition
    cluster_intercepts: ClusterIntercepts
    shared_beta: np.ndarray
    path: tuple[np.ndarray, ...]
    records: tuple[SplitRecord, ...]
    final_log_likelihood: float
    accepted: tuple[int, ...]
    covariate_names: tuple[str, ...] = ()
    unit_labels: tuple[str, ...] = ()
    full_model_penalized: bool = False
    final_fit: GlmFit = field(default=None, repr=False)

    @property
    def n_clusters(self) -> int:
        return self.partition.n_clusters

    @property
    def unit_intercepts(self) -> np.ndarray:
        return self.cluster_intercepts.per_unit(self.partition)


def fit_with_fallback(y, design, family: Family, ridge_fallback: float) -> GlmFit:
    """Unpenalised fit, or a ridge refit if that fails or does not converge."""
    try:
        fit = fit_glm(y, design, family)
        if fit.converged or ridge_fallback <= 0:
            return fit
    except (RankDeficient, Separation):
        if ridge_fallback <= 0:
            raise
    return fit_glm(y, design, family, ridge_fallback)


def fit_tsc(data: Dataset, spec: ModelSpec | None = None) -> TreeFit:
    """Grow the threshold sequence until the global heterogeneity test stops it.

    Raises
    ------
    FullModelUnfit
        The full fixed-effects model fails even with ``spec.ridge_fallback``.
    """
    spec = spec or ModelSpec()
    family = spec.family
    n = data.n_units
    if n < 2:
        raise ValueError("tree-structured clustering needs at least two units")
    y = data.y

    try:
        full = fit_full(data, family, spec.ridge_fallback)
    except TreeClustError as exc:
        raise FullModelUnfit(f"full fixed-effects model failed: {exc}") from exc
    penalized_test = full.ridge > 0

    if penalized_test and spec.ridge_ordering == spec.ridge_fallback:
        order = order_units(data, family, full_fit=full)
    elif penalized_test:
        order = order_units(
            data, family, full_fit=fit_glm(y, full_design(data, with_intercept=True),
                                           family, spec.ridge_ordering))
    else:
        order = order_units(data, family, full_fit=full)

    max_splits = n - 1 if spec.max_splits is None else min(spec.max_splits, n - 1)
    active: list[int] = []
    current = fit_with_fallback(y, expand_design(data, order), family, spec.ridge_fallback)
    path = [unit_intercepts(current, order)]
    records: list[SplitRecord] = []

    while len(active) < max_splits:
        step = len(active) + 1
        stats = []
        best = None
        best_stat = -1.0
        for c in range(1, n):
            if c in active:
                continue
            cand = fit_with_fallback(y, expand_design(data, order, active, c), family, spec.ridge_fallback)
            exact = cand.ridge == 0 and current.ridge == 0
            stat, p = lr_test(current, cand, 1, check=exact)
            stats.append((c, stat, p))
            if stat > best_stat:
                best_stat, best = stat, (c, cand)

        if penalized_test:
            null = fit_glm(y, expand_design(data, order, active), family, spec.ridge_fallback)
            g_stat, g_p = lr_test(null, full, n - step, check=False)
        else:
            g_stat, g_p = lr_test(current, full, n - step, check=current.ridge == 0)
        accept = g_p < spec.alpha
        records.append(SplitRecord(step, best[0], tuple(stats), g_stat, n - step, g_p, accept))
        if not accept:
            break
        active.append(best[0])
        current = best[1]
        path.append(unit_intercepts(current, order))

    partition, intercepts, shared = finalize(order, active, current)
    return TreeFit(
        spec=spec,
        order=order,
        partition=partition,
        cluster_intercepts=intercepts,
        shared_beta=shared,
        path=tuple(path),
        records=tuple(records),
        final_log_likelihood=current.log_likelihood,
        accepted=tuple(active),
        covariate_names=data.covariate_names,
        unit_labels=data.unit_labels,
        full_model_penalized=penalized_test,
        final_fit=current,
    )


def path_table(fit: TreeFit) -> np.ndarray:
    """Rows: accepted steps 0..m-1; columns: units in code order."""
    return np.vstack(fit.path)
