"""Small fitting helpers shared by the tail and correlation reports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r2: float
    npoints: int

    def predict(self, x):
        return self.slope * np.asarray(x) + self.intercept


def linear_fit(x, y) -> LinearFit:
    """Ordinary least squares y = slope*x + intercept with R^2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two points to fit a line")
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_res = float(np.dot(resid, resid))
    ss_tot = float(np.dot(y - y.mean(), y - y.mean()))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return LinearFit(slope=float(slope), intercept=float(intercept),
                     r2=r2, npoints=int(x.size))


def log_tail_fit(levels, masses) -> LinearFit:
    """Fit log(mass) against the level, using only strictly positive masses."""
    levels = np.asarray(levels, dtype=float)
    masses = np.asarray(masses, dtype=float)
    keep = masses > 0.0
    return linear_fit(levels[keep], np.log(masses[keep]))
