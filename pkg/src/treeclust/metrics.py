"""Evaluation criteria for simulation replications and their aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch


def mse_intercepts(estimated, true) -> float:
    """Mean squared deviation of per-unit intercepts."""
    est = np.asarray(estimated, dtype=float)
    tru = np.asarray(true, dtype=float)
    if est.shape != tru.shape:
        raise LengthMismatch(f"{est.shape} estimates vs {tru.shape} true intercepts")
    return float(np.mean((est - tru) ** 2))


def mse_linear(estimated, true) -> float:
    """Half the squared error summed over the two shared coefficients."""
    est = np.asarray(estimated, dtype=float)
    tru = np.asarray(true, dtype=float)
    if est.shape != tru.shape or est.size != 2:
        raise LengthMismatch(f"expected two coefficients each, got {est.shape} and {tru.shape}")
    return float(np.sum((est - tru) ** 2) / 2.0)


@dataclass(frozen=True)
class ReplicationMetrics:
    method: str
    mse_intercepts: float
    mse_linear: float
    n_clusters: int
    replication: int = 0
    failed: bool = False

    @classmethod
    def failure(cls, method: str, replication: int) -> "ReplicationMetrics":
        return cls(method, math.nan, math.nan, 0, replication, failed=True)


@dataclass(frozen=True)
class MethodSummary:
    method: str
    mse_intercepts: float
    mse_linear: float
    n_clusters: float
    replications: int
    n_failed: int
    p10: dict
    p90: dict


@dataclass(frozen=True)
class CellSummary:
    methods: dict[str, MethodSummary]
    R: int

    def __getitem__(self, method: str) -> MethodSummary:
        return self.methods[method]


_FIELDS = ("mse_intercepts", "mse_linear", "n_clusters")


def summarize_cell(replications) -> CellSummary:
    """Per-method means over successful replications (failures only counted)."""
    replications = list(replications)
    if not replications:
        raise ValueError("no replications to summarise")
    methods: dict[str, list[ReplicationMetrics]] = {}
    for rm in sorted(replications, key=lambda r: r.replication):
        methods.setdefault(rm.method, []).append(rm)
    out = {}
    for method, rows in methods.items():
        ok = [r for r in rows if not r.failed]
        if ok:
            arr = np.array([[getattr(r, f) for f in _FIELDS] for r in ok], dtype=float)
            means = arr.mean(axis=0)
            p10 = dict(zip(_FIELDS, np.percentile(arr, 10, axis=0)))
            p90 = dict(zip(_FIELDS, np.percentile(arr, 90, axis=0)))
        else:
            means = np.full(3, math.nan)
            p10 = p90 = dict.fromkeys(_FIELDS, math.nan)
        out[method] = MethodSummary(method, *map(float, means), replications=len(rows),
                                    n_failed=len(rows) - len(ok), p10=p10, p90=p90)
    R = max(s.replications for s in out.values())
    return CellSummary(out, R)
