"""Gaussian-identity and binomial-logit GLMs fitted by IRLS.

Every model in the tree search (candidate splits, the clustered model,
the full fixed-effects model) goes through :func:`fit_glm`.  Weighted
least-squares steps are solved with a column-pivoted QR decomposition of
the (optionally ridge-augmented) weighted design, which flags rank
deficiency instead of silently returning a minimum-norm answer.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.special

from .errors import (
    ConvergenceSuspect,
    DimensionMismatch,
    DomainError,
    RankDeficient,
    Separation,
)

IRLS_TOL = 1e-10
IRLS_MAX_ITER = 100
PROB_FLOOR = 1e-10
SEPARATION_CAP = 30.0
DEFAULT_RIDGE = 1e-4
# Pivoted-QR diagonal ratio below which a column counts as dependent.
RANK_RTOL = 1e-10


class Family(enum.Enum):
    GAUSSIAN = "gaussian"
    BINOMIAL = "binomial"

    @classmethod
    def parse(cls, value: "Family | str") -> "Family":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown family {value!r}; expected 'gaussian' or 'binomial'"
            ) from None

    def link(self, mu):
        mu = np.asarray(mu, dtype=float)
        if self is Family.GAUSSIAN:
            return mu
        return np.log(mu) - np.log1p(-mu)

    def inverse_link(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self is Family.GAUSSIAN:
            return eta
        return scipy.special.expit(eta)


INTERCEPT = "intercept"
COVARIATE = "covariate"
THRESHOLD = "threshold"
UNIT = "unit"
CLUSTER = "cluster"


@dataclass(frozen=True)
class DesignMatrix:
    """Dense design with one semantic tag per column.

    ``kinds`` entries are one of ``covariate``, ``intercept``,
    ``threshold``, ``unit`` or ``cluster``.  Only ``intercept`` columns
    escape the ridge penalty.
    """

    values: np.ndarray
    labels: tuple[str, ...]
    kinds: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DimensionMismatch("design values must be two-dimensional")
        if not (len(self.labels) == len(self.kinds) == values.shape[1]):
            raise DimensionMismatch(
                f"{values.shape[1]} columns but {len(self.labels)} labels "
                f"and {len(self.kinds)} kinds"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "kinds", tuple(self.kinds))

    @classmethod
    def from_array(cls, X, intercept_col: int | None = None) -> "DesignMatrix":
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        kinds = [COVARIATE] * X.shape[1]
        if intercept_col is not None:
            kinds[intercept_col] = INTERCEPT
        labels = [f"x{j}" for j in range(X.shape[1])]
        return cls(X, tuple(labels), tuple(kinds))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def penalty_mask(self) -> np.ndarray:
        return np.array([k != INTERCEPT for k in self.kinds], dtype=bool)

    def columns_of(self, kind: str) -> list[int]:
        return [j for j, k in enumerate(self.kinds) if k == kind]


@dataclass(frozen=True)
class GlmFit:
    coefficients: np.ndarray
    log_likelihood: float
    deviance: float
    converged: bool
    iterations: int
    family: Family
    ridge: float = 0.0
    sigma2_hat: float | None = None
    labels: tuple[str, ...] = ()
    kinds: tuple[str, ...] = ()
    fitted: np.ndarray = field(default=None, repr=False)

    @property
    def n_params(self) -> int:
        return len(self.coefficients)

    def coef(self, label: str) -> float:
        return float(self.coefficients[self.labels.index(label)])


def log_likelihood(y, mu, family: Family | str, sigma2: float | None = None) -> float:
    """Log-likelihood of ``y`` at means ``mu``.

    Gaussian requires ``sigma2``; binomial means are clamped into
    ``[PROB_FLOOR, 1 - PROB_FLOOR]`` so saturated fits stay finite.
    """
    family = Family.parse(family)
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if y.shape != mu.shape:
        raise DimensionMismatch(f"y has shape {y.shape}, mu has {mu.shape}")
    if family is Family.GAUSSIAN:
        if sigma2 is None or not sigma2 > 0:
            raise DomainError("Gaussian log-likelihood needs sigma2 > 0")
        if not np.all(np.isfinite(mu)):
            raise DomainError("Gaussian means must be finite")
        rss = float(np.sum((y - mu) ** 2))
        return -0.5 * y.size * math.log(2.0 * math.pi * sigma2) - rss / (2.0 * sigma2)
    if np.any(~np.isfinite(mu)) or np.any(mu < 0.0) or np.any(mu > 1.0):
        raise DomainError("binomial means must lie in [0, 1]")
    p = np.clip(mu, PROB_FLOOR, 1.0 - PROB_FLOOR)
    return float(np.sum(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def _validate_response(y: np.ndarray, family: Family) -> None:
    if not np.all(np.isfinite(y)):
        raise DomainError("response contains non-finite values")
    if family is Family.BINOMIAL and not np.all((y == 0.0) | (y == 1.0)):
        raise DomainError("binomial response must be coded 0/1")


def _solve_wls(X, z, w, ridge, mask):
    """Minimise sum w (z - X b)^2 + ridge * sum_{mask} b^2 via pivoted QR."""
    sw = np.sqrt(w)
    A = X * sw[:, None]
    b = z * sw
    if ridge > 0:
        pen_cols = np.flatnonzero(mask)
        P = np.zeros((pen_cols.size, X.shape[1]))
        P[np.arange(pen_cols.size), pen_cols] = math.sqrt(ridge)
        A = np.vstack([A, P])
        b = np.concatenate([b, np.zeros(pen_cols.size)])
    Q, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True, check_finite=False)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0 or diag[-1] <= RANK_RTOL * diag[0]:
        raise RankDeficient(
            f"design of shape {X.shape} is rank deficient "
            f"(pivoted R diagonal ratio {diag[-1] / diag[0] if diag.size and diag[0] else 0.0:.2e})"
        )
    sol = scipy.linalg.solve_triangular(R, Q.T @ b, check_finite=False)
    beta = np.empty_like(sol)
    beta[piv] = sol
    return beta


def fit_glm(
    y,
    X: DesignMatrix | np.ndarray,
    family: Family | str,
    ridge: float = 0.0,
    *,
    tol: float = IRLS_TOL,
    max_iter: int = IRLS_MAX_ITER,
) -> GlmFit:
    """Fit a GLM by iteratively reweighted least squares.

    Parameters
    ----------
    y : array_like
        Response; 0/1 for the binomial family.
    X : DesignMatrix or ndarray
        Design. Plain arrays get every column penalised when ``ridge > 0``.
    family : Family or str
    ridge : float
        Ridge weight on all non-intercept columns. The reported
        log-likelihood is always the unpenalised one.

    Raises
    ------
    RankDeficient
        ``ridge == 0`` and the weighted design is singular.
    Separation
        Binomial, ``ridge == 0``, and some coefficient exceeds
        ``SEPARATION_CAP`` in magnitude.
    """
    family = Family.parse(family)
    if not isinstance(X, DesignMatrix):
        X = DesignMatrix.from_array(X)
    y = np.asarray(y, dtype=float).ravel()
    Xv = X.values
    if Xv.shape[0] != y.size:
        raise DimensionMismatch(f"design has {Xv.shape[0]} rows, response has {y.size}")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    _validate_response(y, family)
    mask = X.penalty_mask()
    nobs = y.size

    if family is Family.GAUSSIAN:
        # Constant weights: IRLS reaches the fixed point in a single step.
        beta = _solve_wls(Xv, y, np.ones(nobs), ridge, mask)
        mu = Xv @ beta
        rss = float(np.sum((y - mu) ** 2))
        sigma2 = rss / nobs
        if sigma2 > 0:
            ll = log_likelihood(y, mu, family, sigma2)
        else:
            ll = math.inf
        return GlmFit(
            coefficients=beta,
            log_likelihood=ll,
            deviance=rss,
            converged=True,
            iterations=1,
            family=family,
            ridge=ridge,
            sigma2_hat=sigma2,
            labels=X.labels,
            kinds=X.kinds,
            fitted=mu,
        )

    mu = (y + 0.5) / 2.0
    eta = family.link(mu)
    dev_old = -2.0 * log_likelihood(y, mu, family)
    beta = np.zeros(Xv.shape[1])
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        # Floor only guards division; a larger floor would slow separated
        # coefficients down enough to stall below the cap.
        w = np.maximum(mu * (1.0 - mu), 1e-300)
        z = eta + (y - mu) / w
        beta_new = _solve_wls(Xv, z, w, ridge, mask)
        if ridge == 0 and np.max(np.abs(beta_new)) > SEPARATION_CAP:
            raise Separation(
                f"coefficient magnitude {np.max(np.abs(beta_new)):.1f} exceeds "
                f"{SEPARATION_CAP} after {it} IRLS iterations"
            )
        step = np.max(np.abs(beta_new - beta))
        beta = beta_new
        eta = Xv @ beta
        mu = family.inverse_link(eta)
        dev = -2.0 * log_likelihood(y, mu, family)
        if ridge > 0:
            dev_obj = dev + ridge * float(np.sum(beta[mask] ** 2))
        else:
            dev_obj = dev
        rel = abs(dev_obj - dev_old) / (abs(dev_obj) + 0.1)
        dev_old = dev_obj
        # The coefficient-step check keeps diverging (separated) fits iterating
        # until they hit the cap instead of stalling on a flat deviance.
        if rel < tol and step <= 1e-6 * (1.0 + np.max(np.abs(beta))):
            converged = True
            break

    return GlmFit(
        coefficients=beta,
        log_likelihood=log_likelihood(y, mu, family),
        deviance=dev,
        converged=converged,
        iterations=it,
        family=family,
        ridge=ridge,
        sigma2_hat=None,
        labels=X.labels,
        kinds=X.kinds,
        fitted=mu,
    )


def chisq_sf(x: float, df: int) -> float:
    """Upper tail P(chi2_df > x) through the regularized incomplete gamma Q."""
    if df < 1:
        raise ValueError("df must be a positive integer")
    if not x > 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    half = 0.5 * x
    if half == 0.0:
        return 1.0
    return _gammaincc(0.5 * df, half)


def _gammaincc(a: float, x: float, eps: float = 1e-16, max_iter: int = 10_000) -> float:
    log_prefix = -x + a * math.log(x) - math.lgamma(a)
    if x < a + 1.0:
        # Series for the lower function P(a, x).
        ap = a
        term = total = 1.0 / a
        for _ in range(max_iter):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * eps:
                break
        p = total * math.exp(log_prefix)
        return min(1.0, max(0.0, 1.0 - p))
    # Modified Lentz continued fraction for Q(a, x).
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, max_iter + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return min(1.0, max(0.0, math.exp(log_prefix) * h))


def lr_test(fit_null: GlmFit, fit_alt: GlmFit, df: int, *, check: bool = True,
            tol: float = 1e-6) -> tuple[float, float]:
    """Likelihood-ratio statistic and chi-squared p-value.

    Small negative differences (solver noise) are clamped to zero.  With
    ``check`` set, a difference below ``-tol * max(1, |ll_alt|)`` raises
    :class:`ConvergenceSuspect`; penalised fits should pass ``check=False``.
    """
    diff = fit_alt.log_likelihood - fit_null.log_likelihood
    if check and diff < -tol * max(1.0, abs(fit_alt.log_likelihood)):
        raise ConvergenceSuspect(
            f"null log-likelihood exceeds the alternative by {-diff:.3g}"
        )
    stat = max(0.0, 2.0 * diff)
    return stat, chisq_sf(stat, df)
