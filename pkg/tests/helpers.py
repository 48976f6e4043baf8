"""Data builders and brute-force oracles shared by the test modules."""

import itertools

import numpy as np

from treeclust.data import Dataset


def gaussian_units(means, n_i, sigma=1.0, seed=0, covariates=0, beta=None):
    rng = np.random.default_rng(seed)
    means = np.asarray(means, float)
    units = np.repeat(np.arange(means.size), n_i)
    X = rng.normal(size=(units.size, covariates))
    beta = np.zeros(covariates) if beta is None else np.asarray(beta, float)
    y = means[units] + X @ beta + sigma * rng.normal(size=units.size)
    return Dataset(units, y, X, tuple(f"x{j + 1}" for j in range(covariates)),
                   tuple(str(i + 1) for i in range(means.size)))


def relabel(data: Dataset, perm) -> Dataset:
    """Same observations with unit ``u`` renamed to ``perm[u]`` and rows reordered."""
    perm = np.asarray(perm)
    new_unit = perm[data.unit]
    rows = np.argsort(new_unit, kind="stable")
    labels = [None] * data.n_units
    for old, new in enumerate(perm):
        labels[new] = f"r{data.unit_labels[old]}"
    return Dataset(new_unit[rows], data.y[rows], data.X[rows], data.covariate_names, tuple(labels))


def best_binary_partition_rss(y, unit, n):
    """Exhaustive search over all 2^(n-1)-1 two-group partitions of units.

    Returns the winning group (as a frozenset of unit codes, the one not
    containing unit 0) for the intercept-only Gaussian model.
    """
    best, best_rss = None, np.inf
    count = 0
    # Each partition is identified by the non-empty group that excludes unit 0.
    for r in range(1, n):
        for group in itertools.combinations(range(1, n), r):
            count += 1
            mask = np.isin(unit, group)
            rss = ((y[mask] - y[mask].mean()) ** 2).sum() + ((y[~mask] - y[~mask].mean()) ** 2).sum()
            if rss < best_rss:
                best, best_rss = frozenset(group), rss
    assert count == 2 ** (n - 1) - 1
    return best, best_rss


def newton_logistic(X, y, ridge=0.0, penalize=None, iters=200):
    """Plain Newton on the (penalised) logistic likelihood."""
    X = np.asarray(X, float)
    penalize = np.ones(X.shape[1]) if penalize is None else np.asarray(penalize, float)
    b = np.zeros(X.shape[1])
    for _ in range(iters):
        p = 1.0 / (1.0 + np.exp(-X @ b))
        g = X.T @ (y - p) - ridge * penalize * b
        H = X.T @ (X * (p * (1 - p))[:, None]) + ridge * np.diag(penalize)
        b = b + np.linalg.solve(H, g)
    return b
