"""Geometric Lorenz flow in linearized coordinates.

Near the singularity the flow is the linear system
(x', y', z') = (lambda1*x, lambda2*y, lambda3*z) with
lambda2 < lambda3 < 0 < -lambda3 < lambda1.  Trajectories leave the cube
through |x| = 1 and are brought back to the cross-section
S = {(x, y, 1): |x|,|y| <= 1/2} by the lateral rotation/expansion/translation
return, which this model absorbs into an explicit affine fiber map g and a
constant transit time s0.  The resulting first return map has the skew form
P(x, y) = (f(x), g(x, y)) with f the quotient Lorenz map of
:mod:`lorenzlab.maps`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import DomainEscape, SingularLeaf, ValidationError
from .maps import SQRT2, LorenzMap1D, expansion_window

FIBER_SLOPE = 0.25  # c_g: scale of the affine fiber contraction in g


@dataclass(frozen=True)
class FlowParams:
    """Eigenvalues, branch constants and lateral data of the model flow.

    b0 and b1 are the lateral limits of the quotient map at 0 from the left
    and from the right: the right branch lands at b1 = -1/2 and the left
    branch at b0 = +1/2.
    """

    lambda1: float = 1.0
    lambda2: float = -3.2
    lambda3: float = -0.8
    a: float = 1.64
    b0: float = 0.5
    b1: float = -0.5
    s0: float = 1.0
    rotation_sign: int = 1
    n_res: int = 5

    def __post_init__(self):
        violations = validate_flow_params(self)
        if violations:
            raise ValidationError(violations)
        resonances = nonresonance_violations(
            (self.lambda1, self.lambda2, self.lambda3), self.n_res
        )
        for combo, k in resonances:
            warnings.warn(
                f"resonance at depth {sum(combo)}: "
                f"{combo}.(lambda1,lambda2,lambda3) == lambda_{k + 1}; "
                "linearized coordinates are assumed by construction",
                stacklevel=2,
            )

    @property
    def alpha(self):
        return -self.lambda3 / self.lambda1

    @property
    def beta(self):
        return -self.lambda2 / self.lambda1

    @property
    def tau0(self):
        """Lower bound log(2)/lambda1 for the exit time from the cube."""
        return math.log(2.0) / self.lambda1

    def map_1d(self) -> LorenzMap1D:
        """The quotient map on I induced by these parameters."""
        return LorenzMap1D(self.alpha, self.a, b_left=self.b0, b_right=self.b1)

    def fiber_affine(self, x):
        """Coefficients (A, B) of the fiber map y -> A*y + B at abscissa x.

        A = rot * c_g * |x|^beta and B = sgn(x) * (c_g*|x|^alpha - c_g), so
        g is odd together with f and the image stays strictly inside S.
        """
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        A = self.rotation_sign * FIBER_SLOPE * np.power(ax, self.beta)
        B = np.sign(x) * (FIBER_SLOPE * np.power(ax, self.alpha) - FIBER_SLOPE)
        if x.ndim == 0:
            return float(A), float(B)
        return A, B


def validate_flow_params(p) -> list:
    """All violated invariants of a parameter record, as human-readable strings."""
    v = []
    l1, l2, l3 = p.lambda1, p.lambda2, p.lambda3
    if not (l2 < l3 < 0.0 < -l3 < l1):
        v.append(
            f"eigenvalue ordering lambda2 < lambda3 < 0 < -lambda3 < lambda1 "
            f"fails for ({l1}, {l2}, {l3})"
        )
        return v  # the derived exponents are meaningless past this point
    alpha, beta = -l3 / l1, -l2 / l1
    if not (1.0 / SQRT2 < alpha < 1.0):
        v.append(f"contraction/expansion ratio alpha={alpha:.6g} outside (1/sqrt(2), 1)")
    if not beta > 1.0:
        v.append(f"fiber exponent beta={beta:.6g} must exceed 1")
    if not beta > alpha + 2.0:
        v.append(
            f"strong dissipativity beta > alpha + 2 fails: beta={beta:.6g}, alpha={alpha:.6g}"
        )
    lo, hi = expansion_window(alpha)
    if not (lo < p.a <= hi):
        v.append(f"branch slope a={p.a} outside the expansion window ({lo:.10g}, {hi:.10g}]")
    for name, val in (("b0", p.b0), ("b1", p.b1)):
        if not -0.5 <= val <= 0.5:
            v.append(f"branch offset {name}={val} outside [-1/2, 1/2]")
    if not p.s0 > 0.0:
        v.append(f"lateral transit time s0={p.s0} must be positive")
    if p.rotation_sign not in (-1, 1):
        v.append(f"rotation_sign={p.rotation_sign} must be +1 or -1")
    if p.n_res < 2:
        v.append(f"non-resonance depth n_res={p.n_res} must be at least 2")
    return v


def nonresonance_violations(lams, n_res, tol=1e-9):
    """Integer combinations sum(m_i*lambda_i) == lambda_k with 2 <= sum(m) <= n_res.

    Returns a list of ((m1, m2, m3), k) hits; an empty list certifies the
    finite non-resonance condition up to depth n_res.
    """
    hits = []
    for m in product(range(n_res + 1), repeat=3):
        if not 2 <= sum(m) <= n_res:
            continue
        s = sum(mi * li for mi, li in zip(m, lams))
        for k, lk in enumerate(lams):
            if abs(s - lk) < tol:
                hits.append((m, k))
    return hits


@dataclass(frozen=True)
class SectionPoint:
    """Point (x, y, 1) on the cross-section S."""

    x: float
    y: float

    def __post_init__(self):
        if not (abs(self.x) <= 0.5 and abs(self.y) <= 0.5):
            raise ValueError(f"section point ({self.x}, {self.y}) outside S")


def _require_off_leaf(x):
    if x == 0.0:
        raise SingularLeaf("x = 0 lies on the stable-manifold trace")


def local_flow(p: FlowParams, q, t):
    """Linear flow: (x0, y0, z0) -> (e^(l1 t) x0, e^(l2 t) y0, e^(l3 t) z0)."""
    x0, y0, z0 = q
    return np.array([
        math.exp(p.lambda1 * t) * x0,
        math.exp(p.lambda2 * t) * y0,
        math.exp(p.lambda3 * t) * z0,
    ])


def exit_time(p: FlowParams, x0):
    """Time -log|x0|/lambda1 to reach |x| = 1 from the section; >= log2/lambda1."""
    _require_off_leaf(x0)
    if abs(x0) > 0.5:
        raise ValueError(f"|x0| = {abs(x0)} exceeds 1/2")
    return -math.log(abs(x0)) / p.lambda1


def cross_map_L(p: FlowParams, s: SectionPoint):
    """Exit point on |x| = 1: (sgn(x), y*|x|^beta, |x|^alpha)."""
    _require_off_leaf(s.x)
    ax = abs(s.x)
    return np.array([
        math.copysign(1.0, s.x),
        s.y * ax ** p.beta,
        ax ** p.alpha,
    ])


def poincare_map(p: FlowParams, s: SectionPoint) -> SectionPoint:
    """First return P(x, y) = (f(x), g(x, y)) to the cross-section."""
    _require_off_leaf(s.x)
    fx = p.map_1d()(s.x)
    A, B = p.fiber_affine(s.x)
    gy = A * s.y + B
    if not (abs(fx) <= 0.5 and abs(gy) <= 0.5):
        raise DomainEscape(f"P({s.x}, {s.y}) = ({fx}, {gy}) leaves S")
    return SectionPoint(fx, gy)


def return_time(p: FlowParams, s: SectionPoint):
    """Full return time to S: exit time plus the constant lateral transit.

    Constant along stable leaves: the value depends on x only.
    """
    return exit_time(p, s.x) + p.s0


@dataclass
class Trajectory:
    """Sampled realization of the flow started on the cross-section."""

    samples: np.ndarray  # rows (t, x, y, z)
    hits: list  # (time, SectionPoint) at each return to S


def flow_trajectory(p: FlowParams, s: SectionPoint, T, dt) -> Trajectory:
    """Concatenate linear-flow segments and lateral transits for t in [0, T].

    Inside the cube the sample is the closed-form linear flow; during the
    lateral transit (duration s0) the sample interpolates linearly between
    the exit point on |x| = 1 and the landing point on S, which is all the
    absorbed return model pins down.  Section hits reproduce the Poincare
    map exactly.
    """
    if T < 0.0 or dt <= 0.0:
        raise ValueError("need T >= 0 and dt > 0")
    ts = np.arange(0.0, T + 1e-12 * max(dt, 1.0), dt)
    samples = np.empty((len(ts), 4))
    hits = []

    seg_start = 0.0  # time at which the current section point was hit
    cur = s
    i = 0
    while i < len(ts):
        _require_off_leaf(cur.x)
        tau_lin = exit_time(p, cur.x)
        tau_full = tau_lin + p.s0
        exit_pt = cross_map_L(p, cur)
        nxt = poincare_map(p, cur)
        land_pt = np.array([nxt.x, nxt.y, 1.0])
        while i < len(ts) and ts[i] < seg_start + tau_full:
            u = ts[i] - seg_start
            if u < tau_lin:
                samples[i, 1:] = local_flow(p, (cur.x, cur.y, 1.0), u)
            else:
                w = (u - tau_lin) / p.s0
                samples[i, 1:] = (1.0 - w) * exit_pt + w * land_pt
            samples[i, 0] = ts[i]
            i += 1
        seg_start += tau_full
        cur = nxt
        if seg_start <= T:
            hits.append((seg_start, cur))
    return Trajectory(samples=samples, hits=hits)
