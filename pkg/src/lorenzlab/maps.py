"""One-dimensional piecewise expanding maps.

The central object is the quotient Lorenz map

    f(x) = sgn(x) * (a*|x|^alpha - 1/2)        on I = [-1/2, 1/2],

a two-branch increasing map with a discontinuity at 0, infinite one-sided
derivative at 0 and uniform expansion Df = a*alpha*|x|^(alpha-1) > sqrt(2).
The generic :class:`BranchMap1D` base also hosts the hand-built oracle maps
used by the test-suite (doubling-type maps, piecewise-affine Markov maps),
so the inducing and transfer machinery can be exercised against instances
with known closed-form answers.

All branches are assumed increasing; branch formulas must be evaluable on
the closed branch so that lateral limits at the singular set come out of
the same expression (e.g. the left Lorenz branch at 0 evaluates to +1/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IterationBudgetExceeded, SingularPoint

SQRT2 = math.sqrt(2.0)


class BranchMap1D:
    """Piecewise monotone increasing interval map with finitely many branches.

    Subclasses provide ``branch_eval``, ``branch_inverse``, ``deriv`` and
    optionally ``deriv2``.  ``breaks`` is the interior singular/discontinuity
    set; the closed intervals between consecutive breaks are the branches.
    """

    def __init__(self, domain, breaks):
        self.domain = (float(domain[0]), float(domain[1]))
        self.breaks = tuple(float(b) for b in breaks)
        if sorted(self.breaks) != list(self.breaks):
            raise ValueError("breaks must be sorted")
        edges = [self.domain[0], *self.breaks, self.domain[1]]
        self.branch_bounds = [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]

    # -- abstract surface -------------------------------------------------
    def branch_eval(self, k, x):
        raise NotImplementedError

    def branch_inverse(self, k, y):
        raise NotImplementedError

    def deriv(self, x):
        raise NotImplementedError

    def deriv2(self, x):
        raise NotImplementedError

    # -- shared machinery --------------------------------------------------
    @property
    def n_branches(self):
        return len(self.branch_bounds)

    def branch_of(self, x):
        """Branch index of a non-singular point."""
        x_arr = np.asarray(x, dtype=float)
        if np.any(np.isin(x_arr, self.breaks)):
            raise SingularPoint(f"point on singular set: {x!r}")
        idx = np.searchsorted(self.breaks, x_arr)
        return idx if x_arr.ndim else int(idx)

    def __call__(self, x):
        x_arr = np.asarray(x, dtype=float)
        k = self.branch_of(x_arr)
        if x_arr.ndim == 0:
            return self.branch_eval(int(k), float(x_arr))
        out = np.empty_like(x_arr)
        for b in range(self.n_branches):
            mask = k == b
            if np.any(mask):
                out[mask] = self.branch_eval(b, x_arr[mask])
        return out

    def singular_distance(self, x):
        """Distance to the singular set (used by the recurrence condition)."""
        x_arr = np.asarray(x, dtype=float)
        d = np.full(x_arr.shape, np.inf)
        for b in self.breaks:
            d = np.minimum(d, np.abs(x_arr - b))
        return float(d) if x_arr.ndim == 0 else d

    def orbit(self, x, n):
        """First n points of the forward orbit, x inclusive: shape (n, ...)."""
        xs = [np.asarray(x, dtype=float)]
        for _ in range(n - 1):
            xs.append(self(xs[-1]))
        return np.stack(xs)


class LorenzMap1D(BranchMap1D):
    """Quotient Lorenz map with two increasing power-law branches.

    Parameters
    ----------
    alpha : exponent in (1/sqrt(2), 1)
    a : branch slope; must lie in the expansion window
        (2^(alpha-1/2)/alpha, 2^alpha], which forces Df > sqrt(2) on I.
    b_left, b_right : lateral limits at 0 from the left/right
        (defaults +1/2 and -1/2: right branch lands at the bottom,
        left branch at the top).
    """

    def __init__(self, alpha, a, b_left=0.5, b_right=-0.5, domain=(-0.5, 0.5)):
        super().__init__(domain, (0.0,))
        if not (1.0 / SQRT2 < alpha < 1.0):
            raise ValueError(f"alpha={alpha} outside (1/sqrt(2), 1)")
        lo, hi = expansion_window(alpha)
        if not (lo < a <= hi):
            raise ValueError(
                f"slope a={a} outside the expansion window ({lo:.10g}, {hi:.10g}]"
            )
        self.alpha = float(alpha)
        self.a = float(a)
        self.b_left = float(b_left)
        self.b_right = float(b_right)

    def branch_eval(self, k, x):
        x = np.asarray(x, dtype=float)
        if k == 0:  # x <= 0
            val = -self.a * np.power(-x, self.alpha) + self.b_left
        else:  # x >= 0
            val = self.a * np.power(x, self.alpha) + self.b_right
        return float(val) if val.ndim == 0 else val

    def branch_inverse(self, k, y):
        y = np.asarray(y, dtype=float)
        if k == 0:
            val = -np.power((self.b_left - y) / self.a, 1.0 / self.alpha)
        else:
            val = np.power((y - self.b_right) / self.a, 1.0 / self.alpha)
        return float(val) if val.ndim == 0 else val

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x == 0.0):
            raise SingularPoint("derivative at the singular point")
        val = self.a * self.alpha * np.power(np.abs(x), self.alpha - 1.0)
        return float(val) if val.ndim == 0 else val

    def deriv2(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x == 0.0):
            raise SingularPoint("second derivative at the singular point")
        mag = self.a * self.alpha * (self.alpha - 1.0) * np.power(np.abs(x), self.alpha - 2.0)
        val = np.sign(x) * mag
        return float(val) if val.ndim == 0 else val

    @property
    def min_expansion(self):
        """Minimum of Df over I, attained at |x| = 1/2."""
        return self.a * self.alpha * 2.0 ** (1.0 - self.alpha)


def expansion_window(alpha):
    """Admissible slope interval (lo, hi]: lo = 2^(alpha-1/2)/alpha, hi = 2^alpha."""
    return 2.0 ** (alpha - 0.5) / alpha, 2.0 ** alpha


# -- spec-level operations ----------------------------------------------------


def eval_f(m: BranchMap1D, x):
    """Map value at x; raises SingularPoint on the singular set."""
    return m(x)


def deriv_f(m: BranchMap1D, x):
    """Derivative at x; raises SingularPoint on the singular set."""
    return m.deriv(x)


@dataclass
class LeoWitness:
    """Certificate that some iterate of an interval covers a full side."""

    n: int
    side: str  # "left" or "right"
    trace: list = field(default_factory=list)  # (step, lo, hi) of the tracked piece


def leo_witness(m: LorenzMap1D, J, cap=200):
    """Iterate an interval, tracking the larger piece across splits at 0,
    until the image covers (0, 1/2) or (-1/2, 0).

    Expansion > sqrt(2) guarantees termination: the tracked piece at least
    doubles every two steps while it avoids 0.
    """
    lo, hi = float(J[0]), float(J[1])
    if not (lo < hi):
        raise ValueError("J must be a nonempty open interval")
    dom_lo, dom_hi = m.domain
    trace = [(0, lo, hi)]
    for n in range(cap + 1):
        # split at the singular point, keep the larger piece
        if lo < 0.0 < hi:
            if hi - 0.0 >= 0.0 - lo:
                lo = 0.0
            else:
                hi = 0.0
            trace.append((n, lo, hi))
        # covering check against the two sides
        if lo <= dom_lo and hi >= 0.0:
            return LeoWitness(n=n, side="left", trace=trace)
        if lo <= 0.0 and hi >= dom_hi:
            return LeoWitness(n=n, side="right", trace=trace)
        # advance one step; the piece sits in one branch (closure)
        k = 0 if hi <= 0.0 else 1
        lo, hi = m.branch_eval(k, lo), m.branch_eval(k, hi)
        trace.append((n + 1, lo, hi))
    raise IterationBudgetExceeded(f"no side covered within {cap} iterations")


@dataclass
class PreimageSet:
    """Backward orbit of a target point up to a fixed depth."""

    target: float
    depth: int
    points: np.ndarray  # sorted union over depths 1..N
    max_gap: float  # mesh gap over the domain (denseness statistic)
    per_depth: list  # number of points found at each depth


def preimage_set(m: BranchMap1D, target, depth, tol=1e-12):
    """All solutions of f^i(x) = target for 1 <= i <= depth.

    Each depth-1 solve runs monotone bisection on one branch cylinder
    (branches expand, so bisection converges unconditionally), followed by
    two Newton polish steps to push the residual near machine precision.
    """
    lo_d, hi_d = m.domain
    if not (lo_d < target < hi_d):
        raise ValueError("target must be interior to the domain")

    def pullback_one(t):
        out = []
        for k, (blo, bhi) in enumerate(m.branch_bounds):
            flo, fhi = m.branch_eval(k, blo), m.branch_eval(k, bhi)
            if not (flo < t < fhi):
                continue
            a, b = blo, bhi
            while b - a > tol:
                mid = 0.5 * (a + b)
                if m.branch_eval(k, mid) < t:
                    a = mid
                else:
                    b = mid
            x = 0.5 * (a + b)
            for _ in range(2):  # Newton polish inside the bracket
                try:
                    step = (m.branch_eval(k, x) - t) / m.deriv(x)
                except SingularPoint:
                    break
                x_new = x - step
                if a <= x_new <= b:
                    x = x_new
            out.append(x)
        return out

    level = [float(target)]
    all_points = []
    per_depth = []
    for _ in range(depth):
        level = [p for t in level for p in pullback_one(t)]
        per_depth.append(len(level))
        all_points.extend(level)

    pts = np.sort(np.asarray(all_points))
    if pts.size:
        gaps = np.diff(np.concatenate(([lo_d], pts, [hi_d])))
        max_gap = float(gaps.max())
    else:
        max_gap = hi_d - lo_d
    return PreimageSet(target=float(target), depth=depth, points=pts,
                       max_gap=max_gap, per_depth=per_depth)
