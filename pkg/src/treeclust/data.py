"""Long-format clustered data and CSV interchange."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyUnit, InputError
from .glm import Family


@dataclass(frozen=True)
class Dataset:
    """Observations grouped into measurement units.

    ``unit`` holds integer codes ``0..n-1`` indexing ``unit_labels``;
    ``X`` holds the shared covariates (no intercept column).
    """

    unit: np.ndarray
    y: np.ndarray
    X: np.ndarray
    covariate_names: tuple[str, ...]
    unit_labels: tuple[str, ...]

    def __post_init__(self):
        unit = np.asarray(self.unit, dtype=np.int64)
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if X.size == 0:
            X = np.zeros((y.size, 0))
        elif X.ndim == 1:
            X = X[:, None]
        if not (unit.size == y.size == X.shape[0]):
            raise InputError(
                f"unit ({unit.size}), y ({y.size}) and X ({X.shape[0]}) row counts differ"
            )
        if len(self.covariate_names) != X.shape[1]:
            raise InputError("one covariate name per column of X required")
        n = len(self.unit_labels)
        if unit.size and (unit.min() < 0 or unit.max() >= n):
            raise InputError("unit codes must index unit_labels")
        counts = np.bincount(unit, minlength=n)
        if np.any(counts == 0):
            empty = [self.unit_labels[i] for i in np.flatnonzero(counts == 0)]
            raise EmptyUnit(f"units without observations: {empty[:5]}")
        for name, arr in (("unit", unit), ("y", y), ("X", X)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        object.__setattr__(self, "unit_labels", tuple(str(u) for u in self.unit_labels))

    @classmethod
    def from_arrays(cls, unit_ids, y, X=None, covariate_names=None) -> "Dataset":
        """Build from raw unit identifiers; codes follow first appearance."""
        unit_ids = list(unit_ids)
        labels: dict[str, int] = {}
        codes = np.empty(len(unit_ids), dtype=np.int64)
        for k, u in enumerate(unit_ids):
            codes[k] = labels.setdefault(str(u), len(labels))
        y = np.asarray(y, dtype=float)
        if X is None:
            X = np.zeros((y.size, 0))
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if covariate_names is None:
            covariate_names = [f"x{j + 1}" for j in range(X.shape[1])]
        return cls(codes, y, X, tuple(covariate_names), tuple(labels))

    @property
    def n_units(self) -> int:
        return len(self.unit_labels)

    @property
    def n_obs(self) -> int:
        return self.y.size

    @property
    def n_covariates(self) -> int:
        return self.X.shape[1]

    def unit_sizes(self) -> np.ndarray:
        return np.bincount(self.unit, minlength=self.n_units)

    def take_units(self, units) -> "Dataset":
        """Stack the observations of ``units`` (repeats allowed) under fresh ids."""
        units = np.asarray(units, dtype=np.int64)
        order = np.argsort(self.unit, kind="stable")
        starts = np.concatenate([[0], np.cumsum(self.unit_sizes())])
        rows, codes = [], []
        for new_id, u in enumerate(units):
            r = order[starts[u]:starts[u + 1]]
            rows.append(r)
            codes.append(np.full(r.size, new_id, dtype=np.int64))
        rows = np.concatenate(rows)
        labels = tuple(f"{self.unit_labels[u]}#{k}" for k, u in enumerate(units))
        return Dataset(np.concatenate(codes), self.y[rows], self.X[rows],
                       self.covariate_names, labels)


def read_dataset(path: str | Path, family: Family | str = Family.GAUSSIAN) -> Dataset:
    """Read a ``unit,y,<covariates...>`` CSV.

    Raises :class:`InputError` naming the 1-based file line of the first
    offending row.
    """
    family = Family.parse(family)
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0] != "unit" or header[1] != "y":
            raise InputError(f"{path}: header must start with 'unit,y' (got {','.join(header)})")
        ncol = len(header)
        units, ys, xs = [], [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != ncol:
                raise InputError(f"{path}: row {line} has {len(row)} fields, expected {ncol}")
            try:
                vals = [float(c) for c in row[1:]]
            except ValueError:
                raise InputError(f"{path}: row {line} has a non-numeric value") from None
            if not all(math.isfinite(v) for v in vals):
                raise InputError(f"{path}: row {line} has a non-finite value")
            if family is Family.BINOMIAL and vals[0] not in (0.0, 1.0):
                raise InputError(f"{path}: row {line} has y={row[1].strip()}, expected 0 or 1")
            if not row[0].strip():
                raise InputError(f"{path}: row {line} has an empty unit id")
            units.append(row[0].strip())
            ys.append(vals[0])
            xs.append(vals[1:])
    if not units:
        raise InputError(f"{path}: no data rows")
    X = np.array(xs, dtype=float).reshape(len(units), ncol - 2)
    return Dataset.from_arrays(units, ys, X, header[2:])


def write_dataset(data: Dataset, path: str | Path) -> None:
    rows = [
        [data.unit_labels[u], y, *x]
        for u, y, x in zip(data.unit, data.y, data.X)
    ]
    write_table(path, ["unit", "y", *data.covariate_names], rows)


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def write_table(path: str | Path, header, rows) -> None:
    """Comma-delimited UTF-8 with one header row; floats keep full precision."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_table(path: str | Path) -> tuple[list[str], list[list[str]]]:
    """Read a table written by :func:`write_table` as (header, string rows)."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]
