"""Simulation design: fused intercepts, correlated covariates, responses.

Each replication draws from its own Philox stream keyed by
``(scenario.seed, replication)``, so replications can run in any order
or in parallel and still reproduce bit for bit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .data import Dataset
from .errors import InputError, InvalidM0, ZeroVariance
from .glm import Family


class InterceptDist(enum.Enum):
    NORMAL = "normal"
    CHISQ = "chisq"


# (mu_b, sigma_b2, chi-squared df) per response family.
_FAMILY_DEFAULTS = {
    Family.GAUSSIAN: dict(mu_b=0.0, sigma_b2=1.0, df=0.5, sigma_eps=3.0, beta1=2.0, beta2=2.0),
    Family.BINOMIAL: dict(mu_b=-0.8, sigma_b2=4.0, df=2.0, sigma_eps=0.0, beta1=0.1, beta2=0.1),
}


@dataclass(frozen=True)
class Scenario:
    n: int
    n_i: int
    m0: int
    rho: float = 0.0
    intercept_dist: InterceptDist = InterceptDist.NORMAL
    family: Family = Family.GAUSSIAN
    df: float = 0.5
    mu_b: float = 0.0
    sigma_b2: float = 1.0
    sigma_eps: float = 3.0
    beta1: float = 2.0
    beta2: float = 2.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        object.__setattr__(self, "intercept_dist", InterceptDist(self.intercept_dist))
        if self.n < 1 or self.n_i < 1:
            raise ValueError("n and n_i must be positive")
        if self.m0 < 1 or self.m0 > self.n:
            raise InvalidM0(f"m0={self.m0} must lie in 1..n={self.n}")
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (-1, 1)")

    @classmethod
    def standard(cls, n: int, n_i: int, m0: int, rho: float = 0.0,
              dist: InterceptDist | str = "normal", family: Family | str = "gaussian",
              seed: int = 0) -> "Scenario":
        """A cell with the standard design defaults for the given response family."""
        family = Family.parse(family)
        return cls(n=n, n_i=n_i, m0=m0, rho=rho, intercept_dist=InterceptDist(dist),
                   family=family, seed=seed, **_FAMILY_DEFAULTS[family])

    @property
    def beta(self) -> np.ndarray:
        return np.array([self.beta1, self.beta2])

    def to_config(self) -> dict[str, str]:
        out = {}
        for k, v in asdict(self).items():
            out[k] = v.value if isinstance(v, enum.Enum) else repr(v) if isinstance(v, float) else str(v)
        return out

    def dumps(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.to_config().items())

    @classmethod
    def from_config(cls, cfg: dict[str, str]) -> "Scenario":
        """Parse a flat key/value mapping; keys not given take family defaults."""
        known = {f.name: f for f in fields(cls)}
        unknown = set(cfg) - set(known)
        if unknown:
            raise InputError(f"unknown scenario keys: {sorted(unknown)}")
        try:
            family = Family.parse(cfg.get("family", "gaussian"))
            base = dict(_FAMILY_DEFAULTS[family])
            for key, raw in cfg.items():
                if key in ("family", "intercept_dist"):
                    base[key] = raw
                elif key in ("n", "n_i", "m0", "seed"):
                    base[key] = int(raw)
                else:
                    base[key] = float(raw)
            base["family"] = family
            return cls(**base)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"invalid scenario: {exc}") from exc

    @classmethod
    def loads(cls, text: str) -> "Scenario":
        return cls.from_config(parse_key_values(text))


def parse_key_values(text: str) -> dict[str, str]:
    """``key=value`` lines; blank lines and ``#`` comments are skipped."""
    cfg = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"config line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


@dataclass(frozen=True)
class SimulatedData:
    dataset: Dataset
    true_unit_intercepts: np.ndarray
    true_partition: np.ndarray
    true_beta: np.ndarray
    raw_intercepts: np.ndarray


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replication),))
    return np.random.Generator(np.random.Philox(ss))


def draw_raw_intercepts(n: int, dist: InterceptDist, rng: np.random.Generator, *,
                        mu_b: float, sigma_b2: float, df: float) -> np.ndarray:
    dist = InterceptDist(dist)
    if dist is InterceptDist.NORMAL:
        return rng.normal(mu_b, math.sqrt(sigma_b2), size=n)
    # Centred on the theoretical mean and rescaled to variance sigma_b2
    # (the scale factor is 1 whenever sigma_b2 == 2 * df).
    raw = rng.chisquare(df, size=n)
    return (raw - df) * math.sqrt(sigma_b2 / (2.0 * df)) + mu_b


def fuse_intercepts(raw, m0: int) -> tuple[np.ndarray, np.ndarray]:
    """Sort, cut into ``m0`` balanced contiguous groups, replace by group means.

    Returns the fused values in sorted order and the 0-based group labels.
    """
    raw = np.asarray(raw, dtype=float)
    n = raw.size
    if m0 < 1 or m0 > n:
        raise InvalidM0(f"m0={m0} must lie in 1..{n}")
    sorted_raw = np.sort(raw, kind="stable")
    groups = np.array_split(np.arange(n), m0)
    fused = np.empty(n)
    labels = np.empty(n, dtype=np.int64)
    for k, idx in enumerate(groups):
        fused[idx] = sorted_raw[idx].mean()
        labels[idx] = k
    return fused, labels


def gen_intercepts(n: int, m0: int, dist: InterceptDist | str, rng: np.random.Generator, *,
                   mu_b: float = 0.0, sigma_b2: float = 1.0, df: float = 0.5):
    raw = draw_raw_intercepts(n, InterceptDist(dist), rng, mu_b=mu_b, sigma_b2=sigma_b2, df=df)
    fused, labels = fuse_intercepts(raw, m0)
    return fused, labels, raw


def correlate(x1_raw, intercepts, rho: float) -> np.ndarray:
    """Mix standardised unit intercepts into ``x1`` with weight ``rho``.

    ``x1_raw`` has shape (n, n_i); the result is
    ``rho * z_i + sqrt(1 - rho^2) * x1_raw[i, j]``.
    """
    x1_raw = np.asarray(x1_raw, dtype=float)
    if rho == 0.0:
        return x1_raw
    b = np.asarray(intercepts, dtype=float)
    sd = b.std()
    if not sd > 0:
        raise ZeroVariance("intercepts have zero variance; correlation undefined")
    z = (b - b.mean()) / sd
    return rho * z[:, None] + math.sqrt(1.0 - rho * rho) * x1_raw


def gen_covariates(intercepts, n: int, n_i: int, rho: float, rng: np.random.Generator):
    """x1 (correlated with the intercepts) and x2 ~ Bernoulli(0.5), shape (n, n_i)."""
    if not -1.0 < rho < 1.0:
        raise ValueError("rho must lie in (-1, 1)")
    x1_raw = rng.standard_normal((n, n_i))
    x2 = (rng.random((n, n_i)) < 0.5).astype(float)
    return correlate(x1_raw, intercepts, rho), x2


def gen_response(intercepts, x1, x2, beta, family: Family | str, sigma_eps: float,
                 rng: np.random.Generator) -> np.ndarray:
    family = Family.parse(family)
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (2,):
        raise ValueError("beta must have length 2")
    eta = np.asarray(intercepts, dtype=float)[:, None] + beta[0] * x1 + beta[1] * x2
    if family is Family.GAUSSIAN:
        return eta + sigma_eps * rng.standard_normal(eta.shape)
    return (rng.random(eta.shape) < family.inverse_link(eta)).astype(float)


def simulate(scenario: Scenario, replication: int = 0) -> SimulatedData:
    rng = replication_rng(scenario.seed, replication)
    s = scenario
    b, labels, raw = gen_intercepts(s.n, s.m0, s.intercept_dist, rng,
                                    mu_b=s.mu_b, sigma_b2=s.sigma_b2, df=s.df)
    x1, x2 = gen_covariates(b, s.n, s.n_i, s.rho, rng)
    y = gen_response(b, x1, x2, s.beta, s.family, s.sigma_eps, rng)
    units = np.repeat(np.arange(s.n), s.n_i)
    X = np.column_stack([x1.ravel(), x2.ravel()])
    data = Dataset(units, y.ravel(), X, ("x1", "x2"), tuple(str(i + 1) for i in range(s.n)))
    return SimulatedData(data, b, labels, s.beta, raw)


def effective_df(n: float, n_i: float, sigma_eps2: float, sigma_b2: float) -> float:
    """Effective degrees of freedom of random intercepts in a linear model."""
    if min(n, n_i, sigma_eps2) <= 0 or sigma_b2 < 0:
        raise ValueError("arguments must be positive")
    if sigma_b2 == 0:
        return 0.0
    return (n - 1) * n_i / (n_i + sigma_eps2 / sigma_b2)


def with_seed(scenario: Scenario, seed: int) -> Scenario:
    return replace(scenario, seed=seed)
