"""Unit ordering, threshold designs and partition reconstruction.

Units are ordered once by their fixed-effects intercept estimates.  A
threshold ``c`` (1 <= c <= n-1) refers to ordering *positions*: the
indicator ``I(pos > c)`` is 1 for the units ranked after the first ``c``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DuplicateThreshold, RankDeficient, Separation, ThresholdOutOfRange
from .glm import (
    CLUSTER,
    COVARIATE,
    DEFAULT_RIDGE,
    INTERCEPT,
    THRESHOLD,
    UNIT,
    DesignMatrix,
    Family,
    GlmFit,
    fit_glm,
)

# Relative rounding applied to intercept estimates before sorting, so that
# estimates equal up to solver noise count as ties.
_TIE_DIGITS = 9


class OrderBasis(enum.Enum):
    UNPENALIZED_ML = "unpenalized"
    RIDGE_ML = "ridge"


@dataclass(frozen=True)
class UnitOrder:
    """``permutation[k]`` is the unit code at ordering position ``k`` (0-based)."""

    permutation: np.ndarray
    estimates: np.ndarray
    basis: OrderBasis

    @property
    def n(self) -> int:
        return self.permutation.size

    @property
    def position(self) -> np.ndarray:
        pos = np.empty_like(self.permutation)
        pos[self.permutation] = np.arange(self.permutation.size)
        return pos


@dataclass(frozen=True)
class Partition:
    order: UnitOrder
    boundaries: tuple[int, ...]
    cluster_of: np.ndarray

    @property
    def n_clusters(self) -> int:
        return len(self.boundaries) + 1

    def members(self) -> list[np.ndarray]:
        """Unit codes of each cluster, listed in ordering position."""
        edges = [0, *self.boundaries, self.order.n]
        return [self.order.permutation[a:b] for a, b in zip(edges[:-1], edges[1:])]


@dataclass(frozen=True)
class ClusterIntercepts:
    values: np.ndarray

    def per_unit(self, partition: Partition) -> np.ndarray:
        return self.values[partition.cluster_of]


def covariate_block(data: Dataset) -> tuple[np.ndarray, list[str], list[str]]:
    names = list(data.covariate_names)
    return data.X, names, [COVARIATE] * len(names)


def full_design(data: Dataset, with_intercept: bool = False) -> DesignMatrix:
    """Covariates plus one dummy per unit.

    ``with_intercept`` adds an unpenalised global intercept; the design is
    then singular and only usable with a ridge, which shrinks the unit
    dummies toward a common level.
    """
    X, labels, kinds = covariate_block(data)
    cols = [X]
    if with_intercept:
        cols.append(np.ones((data.n_obs, 1)))
        labels = labels + ["(intercept)"]
        kinds = kinds + [INTERCEPT]
    dummies = np.zeros((data.n_obs, data.n_units))
    dummies[np.arange(data.n_obs), data.unit] = 1.0
    cols.append(dummies)
    labels = labels + [f"unit[{u}]" for u in data.unit_labels]
    kinds = kinds + [UNIT] * data.n_units
    return DesignMatrix(np.hstack(cols), tuple(labels), tuple(kinds))


def unit_intercepts_from_full(fit: GlmFit) -> np.ndarray:
    unit_cols = [j for j, k in enumerate(fit.kinds) if k == UNIT]
    est = fit.coefficients[unit_cols].copy()
    if INTERCEPT in fit.kinds:
        est += fit.coefficients[fit.kinds.index(INTERCEPT)]
    return est


def fit_full(data: Dataset, family: Family, ridge: float = DEFAULT_RIDGE) -> GlmFit:
    """Full fixed-effects model; falls back to the ridge on failure or non-convergence.

    The returned fit has ``ridge > 0`` exactly when the fallback was used.
    """
    try:
        fit = fit_glm(data.y, full_design(data), family)
        if fit.converged or ridge <= 0:
            return fit
    except (RankDeficient, Separation):
        if ridge <= 0:
            raise
    return fit_glm(data.y, full_design(data, with_intercept=True), family, ridge)


def order_from_estimates(estimates, basis: OrderBasis = OrderBasis.UNPENALIZED_ML) -> UnitOrder:
    estimates = np.asarray(estimates, dtype=float)
    scale = max(1.0, float(np.max(np.abs(estimates)))) if estimates.size else 1.0
    keys = np.round(estimates / scale, _TIE_DIGITS)
    perm = np.argsort(keys, kind="stable")
    return UnitOrder(perm, estimates, basis)


def order_units(data: Dataset, family: Family | str, ridge: float = DEFAULT_RIDGE,
                full_fit: GlmFit | None = None) -> UnitOrder:
    """Order units by their fixed-effects intercept estimates.

    Ties (to 9 significant digits) keep the original unit code order.
    """
    family = Family.parse(family)
    fit = full_fit if full_fit is not None else fit_full(data, family, ridge)
    basis = OrderBasis.RIDGE_ML if fit.ridge > 0 else OrderBasis.UNPENALIZED_ML
    return order_from_estimates(unit_intercepts_from_full(fit), basis)


def threshold_label(c: int) -> str:
    return f"I(pos>{c})"


def expand_design(data: Dataset, order: UnitOrder, active=(), candidate: int | None = None) -> DesignMatrix:
    """Covariates, global intercept, one indicator per active threshold
    (ascending), then the optional candidate indicator."""
    n = order.n
    active = sorted(int(c) for c in active)
    if len(set(active)) != len(active):
        raise DuplicateThreshold(f"repeated active threshold in {active}")
    thresholds = list(active)
    if candidate is not None:
        candidate = int(candidate)
        if candidate in active:
            raise DuplicateThreshold(f"candidate {candidate} is already active")
        thresholds.append(candidate)
    for c in thresholds:
        if not 1 <= c <= n - 1:
            raise ThresholdOutOfRange(f"threshold {c} outside 1..{n - 1}")
    pos = order.position[data.unit]
    X, labels, kinds = covariate_block(data)
    ind = np.empty((data.n_obs, len(thresholds)))
    for j, c in enumerate(thresholds):
        ind[:, j] = pos >= c
    values = np.hstack([X, np.ones((data.n_obs, 1)), ind])
    labels = labels + ["(intercept)"] + [threshold_label(c) for c in thresholds]
    kinds = kinds + [INTERCEPT] + [THRESHOLD] * len(thresholds)
    return DesignMatrix(values, tuple(labels), tuple(kinds))


def make_partition(order: UnitOrder, boundaries) -> Partition:
    boundaries = tuple(sorted(int(c) for c in boundaries))
    labels_by_pos = np.searchsorted(np.asarray(boundaries, dtype=np.int64),
                                    np.arange(order.n), side="right")
    cluster_of = np.empty(order.n, dtype=np.int64)
    cluster_of[order.permutation] = labels_by_pos
    return Partition(order, boundaries, cluster_of)


def unit_intercepts(fit: GlmFit, order: UnitOrder) -> np.ndarray:
    """Per-unit intercepts implied by a threshold-model fit."""
    b0 = fit.coefficients[fit.kinds.index(INTERCEPT)]
    by_pos = np.full(order.n, b0)
    for j, k in enumerate(fit.kinds):
        if k == THRESHOLD:
            c = int(fit.labels[j][len("I(pos>"):-1])
            by_pos[c:] += fit.coefficients[j]
    out = np.empty(order.n)
    out[order.permutation] = by_pos
    return out


def finalize(order: UnitOrder, accepted, final_fit: GlmFit):
    """Partition, cluster intercepts and shared coefficients from the last refit.

    Cluster ``k`` (0-based, in ordering position) gets the global intercept
    plus the increments of the ``k`` smallest accepted thresholds.
    """
    partition = make_partition(order, accepted)
    b0 = final_fit.coefficients[final_fit.kinds.index(INTERCEPT)]
    increments = [final_fit.coef(threshold_label(c)) for c in partition.boundaries]
    values = b0 + np.concatenate([[0.0], np.cumsum(increments)])
    cov_cols = [j for j, k in enumerate(final_fit.kinds) if k == COVARIATE]
    shared = final_fit.coefficients[cov_cols].copy()
    return partition, ClusterIntercepts(values), shared


def cluster_design(data: Dataset, cluster_of_unit, n_clusters: int | None = None) -> DesignMatrix:
    """Covariates plus one dummy per cluster (no global intercept)."""
    cluster_of_unit = np.asarray(cluster_of_unit, dtype=np.int64)
    if n_clusters is None:
        n_clusters = int(cluster_of_unit.max()) + 1
    X, labels, kinds = covariate_block(data)
    dummies = np.zeros((data.n_obs, n_clusters))
    dummies[np.arange(data.n_obs), cluster_of_unit[data.unit]] = 1.0
    labels = labels + [f"cluster{k + 1}" for k in range(n_clusters)]
    kinds = kinds + [CLUSTER] * n_clusters
    return DesignMatrix(np.hstack([X, dummies]), tuple(labels), tuple(kinds))
