"""Hyperbolic times and slow recurrence for the quotient map.

A time n is a (sigma, delta)-hyperbolic time for x when every backward
window of the derivative product contracts at rate sigma,

    prod_{j=n-k..n-1} Df(f^j x)^(-1) <= sigma^k     for 1 <= k <= n,

and the orbit keeps truncated distance |f^(n-k) x|_delta >= sigma^(b*k)
from the singular set, where |z|_delta = |z| if |z| < delta else 1.

Both families of inequalities reduce to running-record scans over prefix
sums, so all hyperbolic times up to a horizon come out of one O(horizon)
pass per orbit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularOrbit
from .maps import SQRT2, BranchMap1D


@dataclass(frozen=True)
class HyperbolicTimeConfig:
    """Contraction factor, recurrence cutoff and recurrence exponent."""

    sigma: float = 1.0 / SQRT2
    delta: float = 1e-7
    b: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.sigma < 1.0:
            raise ValueError(f"sigma={self.sigma} outside (0, 1)")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta={self.delta} outside (0, 1)")
        if not 0.0 < self.b < 0.5:
            raise ValueError(f"recurrence exponent b={self.b} outside (0, 1/2)")

    def validate_for(self, alpha):
        """The exponent must also satisfy b < 1/(4|1-alpha|) for the map at hand."""
        bound = min(0.5, 0.25 / abs(1.0 - alpha)) if alpha != 1.0 else 0.5
        if not self.b < bound:
            raise ValueError(
                f"recurrence exponent b={self.b} must be below {bound:.6g} for alpha={alpha}"
            )


def truncated_distance(m: BranchMap1D, x, delta):
    """|z|_delta: distance to the singular set below the cutoff, else 1."""
    d = m.singular_distance(x)
    return np.where(d < delta, d, 1.0)


def hyperbolic_mask_from_orbit(m: BranchMap1D, cfg: HyperbolicTimeConfig, orbit):
    """Boolean mask over n = 1..H from orbit points of shape (H, ...).

    mask[n-1] is True where n is a (sigma, delta)-hyperbolic time.  Row j of
    ``orbit`` must hold f^j(x); trailing axes are independent samples.
    """
    orbit = np.asarray(orbit, dtype=float)
    if np.any(m.singular_distance(orbit) == 0.0):
        raise SingularOrbit("orbit hit the singular set exactly")
    c = -math.log(cfg.sigma)  # > 0
    logdf = np.log(m.deriv(orbit))
    steps = np.arange(1, orbit.shape[0] + 1).reshape((-1,) + (1,) * (orbit.ndim - 1))

    # contraction records: T_n = sum_{j<n} log Df - n*c must be a running max
    T = np.cumsum(logdf, axis=0) - steps * c
    T_prev_max = np.maximum.accumulate(np.concatenate(
        [np.zeros((1,) + orbit.shape[1:]), T[:-1]], axis=0), axis=0)
    contraction_ok = T >= T_prev_max

    # recurrence records: U_m - b*c*m must stay above -b*c*n for all m < n
    U = np.log(truncated_distance(m, orbit, cfg.delta))
    V = U - cfg.b * c * (steps - 1)
    V_min = np.minimum.accumulate(V, axis=0)
    recurrence_ok = V_min >= -cfg.b * c * steps

    return contraction_ok & recurrence_ok


def is_hyperbolic_time(m: BranchMap1D, cfg: HyperbolicTimeConfig, x, n) -> bool:
    """Whether n is a (sigma, delta)-hyperbolic time for the point x.

    n = 0 is accepted vacuously (both condition families are empty).
    """
    if n == 0:
        return True
    orbit = m.orbit(float(x), n).reshape(n, 1)
    return bool(hyperbolic_mask_from_orbit(m, cfg, orbit)[n - 1, 0])


@dataclass
class FrequencyReport:
    """Monte Carlo estimate of the density of hyperbolic times."""

    theta_hat: float
    stderr: float
    samples: int
    horizon: int


def hyperbolic_time_frequency(m, cfg, samples, horizon, seed=0) -> FrequencyReport:
    """Empirical fraction of times in [1, horizon] that are hyperbolic,
    averaged over Lebesgue-random starting points."""
    rng = np.random.default_rng(seed)
    lo, hi = m.domain
    x = rng.uniform(lo, hi, size=samples)
    orbit = m.orbit(x, horizon)
    mask = hyperbolic_mask_from_orbit(m, cfg, orbit)
    per_point = mask.mean(axis=0)
    return FrequencyReport(
        theta_hat=float(per_point.mean()),
        stderr=float(per_point.std(ddof=1) / math.sqrt(samples)),
        samples=samples,
        horizon=horizon,
    )


@dataclass
class RecurrenceReport:
    """Birkhoff statistics of -log|f^i x|_delta over an orbit ensemble."""

    mean: float
    exceed_frac: float  # fraction of samples with running mean > eps at horizon n
    eps: float
    n: int
    checkpoints: list  # (n_i, mean_i, exceed_frac_i) along the way


def slow_recurrence_stat(m, delta, samples, n, eps=0.1, seed=0) -> RecurrenceReport:
    """Mean of (1/n) sum -log|f^i x|_delta over Lebesgue-random starts.

    Streams the orbit so horizons of 10^4 and beyond stay cheap; checkpoint
    rows at powers of two support trend regressions.
    """
    rng = np.random.default_rng(seed)
    lo, hi = m.domain
    x = rng.uniform(lo, hi, size=samples)
    acc = np.zeros(samples)
    checkpoints = []
    next_cp = 1
    for i in range(n):
        d = m.singular_distance(x)
        if np.any(d == 0.0):
            raise SingularOrbit("orbit hit the singular set exactly")
        acc -= np.log(np.where(d < delta, d, 1.0))
        k = i + 1
        if k == next_cp or k == n:
            stat = acc / k
            checkpoints.append((k, float(stat.mean()), float((stat > eps).mean())))
            next_cp *= 2
        if k < n:
            x = m(x)
    stat = acc / n
    return RecurrenceReport(
        mean=float(stat.mean()),
        exceed_frac=float((stat > eps).mean()),
        eps=eps,
        n=n,
        checkpoints=checkpoints,
    )
