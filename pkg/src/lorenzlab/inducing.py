"""Induced uniformly expanding Markov map on an interval around the singularity.

Cylinder refinement: pieces of the inducing interval are advanced under the
map while their image intervals stay inside one branch; an image straddling
a singular point splits the piece at the exact pullback of that point.  The
moment a piece's image covers the whole inducing interval, the sub-piece
mapping exactly onto it is carved out as a partition cell, provided the cell
admits an inducing-time decomposition R = n + k where n is a hyperbolic time
for the cell, 0 < k <= n_extend, and the intermediate images from step
max(n, 1) on stay outside the inducing interval.  Rejected carvings fall
back to splitting, so deeper (always certifiable) return times are found
eventually.

All endpoint computations run backwards through closed-form inverse
branches, which is a contraction and therefore numerically stable; forward
endpoint residuals are recorded per cell as the honest conditioning
certificate.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageShortfall, FitUnreliable
from .hyperbolic import HyperbolicTimeConfig, hyperbolic_mask_from_orbit
from .maps import SQRT2, BranchMap1D, preimage_set
from .stats import LinearFit, log_tail_fit

_WIDTH_FLOOR = 1e-15  # pieces thinner than this are float dust, not dynamics


@dataclass
class Cell:
    """One partition cell: f^R maps (lo, hi) diffeomorphically onto the
    inducing interval, with the certificates measured at build time."""

    lo: float
    hi: float
    R: int
    itinerary: str  # branch index per step, one character each
    img_lo: np.ndarray  # step images: img_*[i] encloses f^i(cell), i = 0..R
    img_hi: np.ndarray
    res_lo: float  # |f^R(lo) - delta_lo| by forward float iteration
    res_hi: float
    kappa: float  # min sampled |DF| over the cell
    kappa_secant: float
    monotone: bool
    hyp_n: int  # R = hyp_n + hyp_k with hyp_n a hyperbolic time for the cell
    hyp_k: int

    @property
    def width(self):
        return self.hi - self.lo

    def certified(self, residual_tol=1e-8):
        return (
            self.res_lo <= residual_tol
            and self.res_hi <= residual_tol
            and self.kappa > 1.0
            and self.kappa_secant > 1.0
            and self.monotone
            and self.hyp_k >= 1
        )


@dataclass
class Piece:
    """A refinement piece: f^j is monotone on (lo, hi) with image (img_lo, img_hi)."""

    lo: float
    hi: float
    j: int
    img_lo: float
    img_hi: float
    itinerary: list

    @property
    def width(self):
        return self.hi - self.lo


@dataclass
class MarkovPartition:
    """Countable-by-construction partition of the inducing interval."""

    m: BranchMap1D
    delta: tuple
    cells: list
    cfg: HyperbolicTimeConfig
    n_extend: int
    unresolved: list = field(default_factory=list)
    preimage_gap: float = math.nan  # mesh gap of the depth-n_extend backward orbit of 0
    _lows: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.cells.sort(key=lambda c: c.lo)
        self._lows = np.array([c.lo for c in self.cells])

    @property
    def delta_width(self):
        return self.delta[1] - self.delta[0]

    @property
    def covered_mass(self):
        return float(sum(c.width for c in self.cells))

    @property
    def covered_fraction(self):
        return self.covered_mass / self.delta_width

    @property
    def unresolved_mass(self):
        return self.delta_width - self.covered_mass

    @property
    def kappa(self):
        return min(c.kappa for c in self.cells)

    @property
    def max_R(self):
        return max(c.R for c in self.cells)

    def cell_index_of(self, x):
        """Index of the cell containing x, or -1 in unresolved gaps (vectorized)."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self._lows, x, side="right") - 1
        idx = np.clip(idx, 0, len(self.cells) - 1)
        his = np.array([self.cells[i].hi for i in np.atleast_1d(idx)]).reshape(idx.shape)
        los = self._lows[idx]
        ok = (x >= los) & (x <= his)
        out = np.where(ok, idx, -1)
        return int(out) if x.ndim == 0 else out

    def cell_of(self, x):
        i = self.cell_index_of(x)
        return self.cells[i] if i >= 0 else None

    def cells_by_mass(self):
        return sorted(self.cells, key=lambda c: (-c.width, c.lo))

    def masses(self):
        return np.array([c.width for c in self.cells])

    # -- per-cell dynamics -------------------------------------------------
    def cell_forward(self, cell, x, with_deriv=False):
        """f^R on the cell, optionally with DF = prod Df along the orbit."""
        x = np.asarray(x, dtype=float)
        df = np.ones_like(x)
        for ch in cell.itinerary:
            if with_deriv:
                df = df * self.m.deriv(x)
            x = self.m.branch_eval(int(ch), x)
        return (x, df) if with_deriv else x

    def cell_pullback(self, cell, y):
        """Inverse branch of f^R on the cell: pulls y in Delta back into the cell."""
        y = np.asarray(y, dtype=float)
        for ch in reversed(cell.itinerary):
            y = self.m.branch_inverse(int(ch), y)
        return y

    def cell_DF(self, cell, x):
        return self.cell_forward(cell, x, with_deriv=True)[1]

    # -- serialization -------------------------------------------------------
    def save(self, path):
        """One cell per line: left, right, R, itinerary (17 significant digits)."""
        with open(path, "w") as fh:
            fh.write(f"# lorenzlab partition: delta {self.delta[0]:.17g} {self.delta[1]:.17g}\n")
            for c in self.cells:
                fh.write(f"{c.lo:.17g} {c.hi:.17g} {c.R} {c.itinerary}\n")

    @classmethod
    def load(cls, path, m, cfg=None, n_extend=8):
        cfg = cfg or HyperbolicTimeConfig()
        with open(path) as fh:
            header = fh.readline().split()
            delta = (float(header[-2]), float(header[-1]))
            cells = []
            for line in fh:
                lo_s, hi_s, r_s, itin = line.split()
                cell = _make_cell(m, delta, itin, cfg, n_extend)
                if cell is None or not (
                    math.isclose(cell.lo, float(lo_s), rel_tol=0, abs_tol=1e-12)
                    and math.isclose(cell.hi, float(hi_s), rel_tol=0, abs_tol=1e-12)
                ):
                    raise ValueError(f"stored cell {lo_s} {hi_s} does not recertify")
                # keep the stored decimals as ground truth for bit-exact round trips
                cell.lo, cell.hi = float(lo_s), float(hi_s)
                assert cell.R == int(r_s)
                cells.append(cell)
        return cls(m=m, delta=delta, cells=cells, cfg=cfg, n_extend=n_extend)


def _pullback_sequence(m, itinerary, value):
    """Backward orbit of a value through an itinerary; seq[i] is the step-i
    preimage, seq[len] the value itself."""
    seq = [float(value)]
    for k in reversed(itinerary):
        seq.append(m.branch_inverse(int(k), seq[-1]))
    seq.reverse()
    return seq


def _make_cell(m, delta, itinerary, cfg, n_extend, cert_points=9):
    """Build and certify a cell from its branch itinerary.

    Returns None when no decomposition R = n + k with k <= n_extend exists
    such that n is a hyperbolic time for the cell samples and the images at
    steps max(n, 1) .. R-1 avoid the open inducing interval.  n = 0 counts
    vacuously (used by plain first-return cells with small R).
    """
    d_lo, d_hi = delta
    itin = [int(ch) for ch in itinerary]
    R = len(itin)
    seq_lo = _pullback_sequence(m, itin, d_lo)
    seq_hi = _pullback_sequence(m, itin, d_hi)
    img_lo = np.array(seq_lo)
    img_hi = np.array(seq_hi)
    lo, hi = seq_lo[0], seq_hi[0]
    if not lo < hi:
        return None

    # sample orbit across the cell (interior points; endpoints handled apart)
    xs = lo + (hi - lo) * np.linspace(0.0, 1.0, cert_points + 2)[1:-1]
    orbit = np.empty((R, xs.size))
    df = np.ones_like(xs)
    cur = xs.copy()
    for i, k in enumerate(itin):
        orbit[i] = cur
        df *= m.deriv(cur)
        cur = m.branch_eval(k, cur)
    finals = cur
    monotone = bool(np.all(np.diff(finals) > 0.0))
    kappa = float(df.min())
    kappa_secant = float((np.diff(finals) / np.diff(xs)).min())

    hyp_mask = hyperbolic_mask_from_orbit(m, cfg, orbit)
    outside = (img_hi[:R] <= d_lo) | (img_lo[:R] >= d_hi)
    hyp_n = hyp_k = -1
    for k in range(1, min(n_extend, R) + 1):
        n = R - k
        if not np.all(outside[max(n, 1):R]):
            continue
        if n == 0 or bool(np.all(hyp_mask[n - 1])):
            hyp_n, hyp_k = n, k
            break
    if hyp_k < 0:
        return None

    # forward endpoint residuals (float conditioning certificate)
    e_lo, e_hi = lo, hi
    for k in itin:
        e_lo = m.branch_eval(k, e_lo)
        e_hi = m.branch_eval(k, e_hi)
    return Cell(
        lo=lo, hi=hi, R=R, itinerary="".join(str(k) for k in itin),
        img_lo=img_lo, img_hi=img_hi,
        res_lo=abs(e_lo - d_lo), res_hi=abs(e_hi - d_hi),
        kappa=kappa, kappa_secant=kappa_secant, monotone=monotone,
        hyp_n=hyp_n, hyp_k=hyp_k,
    )


def build_partition(
    m: BranchMap1D,
    cfg: HyperbolicTimeConfig,
    a_delta=0.1,
    depth_cap=40,
    mass_target=0.999,
    n_extend=8,
    ensure_points=(),
    on_shortfall="raise",
) -> MarkovPartition:
    """Enumerate certified cells covering at least ``mass_target`` of the
    inducing interval.

    ``a_delta`` is either the half-width of a symmetric interval around 0 or
    an explicit (lo, hi) pair.  ``ensure_points`` are kept under refinement
    past the mass target so probe sequences land inside resolved cells.
    Raises :class:`CoverageShortfall` (carrying the partial partition) when
    the depth cap bites first, unless ``on_shortfall="report"``.
    """
    delta = tuple(a_delta) if np.ndim(a_delta) else (-float(a_delta), float(a_delta))
    d_lo, d_hi = delta
    if not d_lo < d_hi:
        raise ValueError("empty inducing interval")
    if hasattr(m, "alpha"):
        cfg.validate_for(m.alpha)

    # density and non-degeneracy of the depth-n_extend backward orbit of the
    # singular set (the finishing-step budget has to be able to reach it)
    preimage_gap = math.nan
    if m.breaks:
        b = m.breaks[0]
        ps = preimage_set(m, b, n_extend)
        if ps.points.size and np.min(np.abs(ps.points - b)) < 1e-12:
            raise ValueError("singular point lies in its own backward orbit")
        preimage_gap = ps.max_gap

    total = d_hi - d_lo
    target_mass = mass_target * total
    queue = deque()

    def enqueue(piece):
        if piece.width > _WIDTH_FLOOR and piece.img_hi - piece.img_lo > 0.0:
            queue.append(piece)

    # initial pieces: the inducing interval split at interior singular points
    edges = [d_lo] + [b for b in m.breaks if d_lo < b < d_hi] + [d_hi]
    for i in range(len(edges) - 1):
        enqueue(Piece(edges[i], edges[i + 1], 0, edges[i], edges[i + 1], []))

    cells = []
    unresolved = []
    covered = 0.0
    ensure_left = [float(p) for p in ensure_points]

    def protects(piece):
        return any(piece.lo < p < piece.hi for p in ensure_left)

    while queue:
        piece = queue.popleft()
        if covered >= target_mass and not protects(piece):
            unresolved.append(piece)
            continue
        if piece.j >= depth_cap:
            unresolved.append(piece)
            continue

        # advance one step: the image sits inside one branch closure
        k = m.branch_of(0.5 * (piece.img_lo + piece.img_hi))
        piece.img_lo = m.branch_eval(k, piece.img_lo)
        piece.img_hi = m.branch_eval(k, piece.img_hi)
        piece.j += 1
        piece.itinerary.append(k)

        carved = False
        if piece.img_lo <= d_lo and piece.img_hi >= d_hi:
            itin_str = "".join(str(b) for b in piece.itinerary)
            cell = _make_cell(m, delta, itin_str, cfg, n_extend)
            if cell is not None and piece.lo - 1e-12 <= cell.lo < cell.hi <= piece.hi + 1e-12:
                cells.append(cell)
                covered += cell.width
                ensure_left = [p for p in ensure_left if not cell.lo <= p <= cell.hi]
                enqueue(Piece(piece.lo, cell.lo, piece.j, piece.img_lo, d_lo,
                              list(piece.itinerary)))
                enqueue(Piece(cell.hi, piece.hi, piece.j, d_hi, piece.img_hi,
                              list(piece.itinerary)))
                carved = True

        if not carved:
            inner = [b for b in m.breaks if piece.img_lo < b < piece.img_hi]
            if inner:
                cuts = [piece.lo]
                img_cuts = [piece.img_lo]
                for b in inner:
                    q = _pullback_sequence(m, piece.itinerary, b)[0]
                    cuts.append(min(max(q, piece.lo), piece.hi))
                    img_cuts.append(b)
                cuts.append(piece.hi)
                img_cuts.append(piece.img_hi)
                for i in range(len(cuts) - 1):
                    enqueue(Piece(cuts[i], cuts[i + 1], piece.j,
                                  img_cuts[i], img_cuts[i + 1],
                                  list(piece.itinerary)))
            else:
                queue.append(piece)

    part = MarkovPartition(m=m, delta=delta, cells=cells, cfg=cfg,
                           n_extend=n_extend, unresolved=unresolved,
                           preimage_gap=preimage_gap)
    if part.covered_mass < target_mass and on_shortfall == "raise":
        err = CoverageShortfall(part.covered_fraction, mass_target, depth_cap)
        err.partition = part
        raise err
    return part


# -- reports -------------------------------------------------------------------


@dataclass
class RTailReport:
    """Lebesgue mass of {R > n} with its exponential fit."""

    ns: np.ndarray
    tail_mass: np.ndarray
    fit: LinearFit

    @property
    def gamma_hat(self):
        return -self.fit.slope


def tail_histogram_R(part: MarkovPartition) -> RTailReport:
    """Table of mass{R > n} over the resolved cells and a log-linear fit."""
    if not part.cells:
        raise FitUnreliable("empty partition")
    Rs = np.array([c.R for c in part.cells])
    ws = part.masses()
    if len(set(Rs.tolist())) < 5:
        raise FitUnreliable(f"only {len(set(Rs.tolist()))} distinct inducing times")
    ns = np.arange(0, Rs.max())
    tail = np.array([ws[Rs > n].sum() for n in ns])
    fit = log_tail_fit(ns, tail)
    return RTailReport(ns=ns, tail_mass=tail, fit=fit)


@dataclass
class DistortionReport:
    """Empirical Lipschitz constant of log DF^n along inverse branches."""

    b0_hat: dict  # n -> max |log DF^n(h(x)) - log DF^n(h(y))| / |x - y|
    one_step_c: float  # max |DF(x)/DF(y) - 1| / |F(x) - F(y)| within cells

    @property
    def overall(self):
        return max(self.b0_hat.values())


def _sample_paths(part, n, count, rng):
    """Random inverse-branch paths of length n (indices into part.cells),
    half uniform over cells and half mass-weighted."""
    ncells = len(part.cells)
    w = part.masses()
    w = w / w.sum()
    uniform = rng.integers(0, ncells, size=(count // 2, n))
    weighted = rng.choice(ncells, size=(count - count // 2, n), p=w)
    return np.vstack([uniform, weighted])


def _path_log_DF(part, path, x):
    """log DF^n at the backward image of x along a path of cell indices."""
    total = np.zeros_like(np.asarray(x, dtype=float))
    cur = np.asarray(x, dtype=float)
    for ci in reversed(path):
        cell = part.cells[ci]
        cur = part.cell_pullback(cell, cur)
        total += np.log(part.cell_DF(cell, cur))
    return total


def distortion_report(part: MarkovPartition, pair_samples=200,
                      ns=(1, 2, 4, 8), seed=0) -> DistortionReport:
    rng = np.random.default_rng(seed)
    d_lo, d_hi = part.delta
    b0 = {}
    for n in ns:
        paths = _sample_paths(part, n, pair_samples, rng)
        xs = rng.uniform(d_lo, d_hi, size=len(paths))
        ys = rng.uniform(d_lo, d_hi, size=len(paths))
        worst = 0.0
        for path, x, y in zip(paths, xs, ys):
            if abs(x - y) < 1e-9:
                continue
            dlog = abs(_path_log_DF(part, path, x) - _path_log_DF(part, path, y))
            worst = max(worst, float(dlog) / abs(x - y))
        b0[n] = worst

    one_step = 0.0
    for cell in part.cells_by_mass()[: min(len(part.cells), 200)]:
        xs = cell.lo + cell.width * rng.uniform(0.05, 0.95, size=8)
        fx, dfx = part.cell_forward(cell, xs, with_deriv=True)
        for i in range(len(xs) - 1):
            gap = abs(fx[i + 1] - fx[i])
            if gap > 1e-12:
                one_step = max(one_step, abs(dfx[i + 1] / dfx[i] - 1.0) / gap)
    return DistortionReport(b0_hat=b0, one_step_c=one_step)


@dataclass
class RenyiReport:
    """Bounds on |D2F|/(DF)^2 and its decay for powers of the induced map."""

    one_step_max: float
    n_step_max: dict  # n -> max |D2 F^n| / (D F^n)^2 over sampled paths
    envelope_ok: bool  # n-step ratio <= one_step_max * n * kappa^-(n-1)
    fd_rel_err: float  # finite-difference check of D2F on a sample cell


def _cell_D1_D2(part, cell, x):
    """(DF, D2F) of the cell map at x via the chain rule along the itinerary."""
    x = np.asarray(x, dtype=float)
    d1 = np.ones_like(x)
    d2 = np.zeros_like(x)
    for ch in cell.itinerary:
        fp = part.m.deriv(x)
        fpp = part.m.deriv2(x)
        d2 = fpp * d1 * d1 + fp * d2
        d1 = fp * d1
        x = part.m.branch_eval(int(ch), x)
    return d1, d2


def renyi_report(part: MarkovPartition, samples=100, ns=(5, 20), seed=0) -> RenyiReport:
    rng = np.random.default_rng(seed)
    one_step = 0.0
    for cell in part.cells_by_mass()[: min(len(part.cells), 300)]:
        xs = cell.lo + cell.width * rng.uniform(0.02, 0.98, size=5)
        d1, d2 = _cell_D1_D2(part, cell, xs)
        one_step = max(one_step, float((np.abs(d2) / d1**2).max()))

    kappa = part.kappa
    n_step = {}
    envelope_ok = True
    for n in ns:
        paths = _sample_paths(part, n, samples, rng)
        xs = rng.uniform(*part.delta, size=len(paths))
        worst = 0.0
        for path, x in zip(paths, xs):
            cur = np.asarray(x, dtype=float)
            pts = []
            for ci in reversed(path):
                cur = part.cell_pullback(part.cells[ci], cur)
                pts.append((ci, float(cur)))
            d1 = 1.0
            d2 = 0.0
            for ci, z in reversed(pts):
                c1, c2 = _cell_D1_D2(part, part.cells[ci], z)
                d2 = float(c2) * d1 * d1 + float(c1) * d2
                d1 = float(c1) * d1
            worst = max(worst, abs(d2) / d1**2)
        n_step[n] = worst
        if worst > one_step * n * kappa ** (-(n - 1)) + 1e-12:
            envelope_ok = False

    # finite-difference audit of the analytic second derivative
    cell = part.cells_by_mass()[0]
    x0 = cell.lo + 0.41 * cell.width
    h = 1e-6 * cell.width
    d1m = part.cell_DF(cell, x0 - h)
    d1p = part.cell_DF(cell, x0 + h)
    _, d2 = _cell_D1_D2(part, cell, x0)
    fd = (float(d1p) - float(d1m)) / (2.0 * h)
    fd_rel = abs(fd - float(d2)) / max(abs(float(d2)), 1e-300)
    return RenyiReport(one_step_max=one_step, n_step_max=n_step,
                       envelope_ok=envelope_ok, fd_rel_err=fd_rel)
