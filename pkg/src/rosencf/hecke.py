"""Parabolic points of Hecke groups with bounded denominator, and solution counts.

Points are produced by walking the tessellation of the upper half plane by
images of the ideal k-gon P0 with vertices (TS)^i(oo), i = 0..k-1, which are
oo, lambda, ..., 0 in decreasing order.  The polygon g(TS)^j S is the
neighbour of g(P0) across its edge j (between vertices j-1 and j).  Crossing
an edge whose end points are a/c = h(oo) and b/d = h(0), h = g(TS)^j, every
point that appears below it has denominator at least |c| + |d|: the horoballs
of diameter 1/c^2 at all g(oo) are disjoint and the two at the ends of an
edge are tangent.  That bound is the only pruning rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .moebius import MoebiusMatrix, ParabolicPoint, generators, t_power
from .ring import LambdaInt, LambdaRing, PrecisionCapError, as_mpfr, make_ring, sign

# relative slack on float comparisons before an exact decision is forced
FLOAT_SLACK = 1e-9
T0_HECKE = 0.5


class BudgetExceeded(RuntimeError):
    """The enumeration hit its node budget."""


def _float(a: LambdaInt) -> float:
    if a.ring.degree == 1:
        return float(a.coeffs[0])
    return float(a)


def _abs_le(a: LambdaInt, bound) -> bool:
    """|a| <= bound, exactly (bound an int, float or Fraction)."""
    v = abs(_float(a))
    bound_f = float(bound)
    if v < bound_f * (1 - FLOAT_SLACK):
        return True
    if v > bound_f * (1 + FLOAT_SLACK):
        return False
    bound = Fraction(bound)
    a_abs = a if sign(a) >= 0 else -a
    return sign(a.ring.from_int(bound.numerator) - a_abs * bound.denominator) >= 0


def _cmp_point(pt: ParabolicPoint, r: Fraction) -> int:
    """Sign of p/q - r for a finite point (q > 0)."""
    return sign(pt.p * r.denominator - pt.q * r.numerator)


@dataclass(frozen=True)
class EnumConfig:
    k: int
    c_bound: float
    window: tuple
    max_nodes: int = 2_000_000

    def __post_init__(self):
        lo, hi = (float(w) for w in self.window)
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
            raise ValueError("window must be a finite interval with lo < hi")
        if not self.c_bound >= 1:
            raise ValueError("c_bound must be >= 1")


@dataclass(frozen=True)
class EnumeratedPoint:
    point: ParabolicPoint
    c_abs: float
    witness: MoebiusMatrix

    @property
    def value(self) -> float:
        return float(self.point)


@dataclass
class EnumResult:
    points: list[EnumeratedPoint]
    nodes: int
    valid: bool = True

    def keys(self) -> set:
        return {e.point.key() for e in self.points}

    def __len__(self):
        return len(self.points)


class Tessellation:
    """Rotations (TS)^i of P0 and edge geometry for one ring."""

    def __init__(self, ring: LambdaRing):
        self.ring = ring
        self.k = ring.k
        self.S, self.T = generators(ring)
        ts = self.T @ self.S
        self.rot = [MoebiusMatrix.identity(ring)]
        for _ in range(self.k):
            self.rot.append(self.rot[-1] @ ts)
        self.lam = float(ring.lambda_enclosure(64).mid)

    def edge(self, g: MoebiusMatrix, j: int):
        """(h, lo, hi, |c| + |d|) for edge j of g(P0), h = g (TS)^j."""
        h = g @ self.rot[j]
        a, b, c, d = (_float(e) for e in h.entries())
        if c == 0 or d == 0:
            return h, -math.inf, math.inf, abs(c) + abs(d)
        u, v = a / c, b / d
        return h, min(u, v), max(u, v), abs(c) + abs(d)

    def child(self, h: MoebiusMatrix) -> MoebiusMatrix:
        return h @ self.S

    def roots(self, lo: float, hi: float) -> list[MoebiusMatrix]:
        m0 = math.floor(lo / self.lam) - 1
        m1 = math.ceil(hi / self.lam) + 1
        return [t_power(self.ring, m) for m in range(m0, m1 + 1)]


@lru_cache(maxsize=None)
def tessellation(k: int) -> Tessellation:
    return Tessellation(make_ring(k))


def _sort_key(e: EnumeratedPoint):
    return (e.c_abs, e.point.q.coeffs, e.point.p.coeffs)


def enumerate_points(cfg: EnumConfig) -> EnumResult:
    """Every g(oo) with 0 < |c(g)| <= N and value in the half-open window [lo, hi).

    Each point is reported once, with the group element that produced it.
    Ordering is by |c|, then by coefficients.  When the node budget runs out
    the partial result comes back with ``valid = False``.
    """
    tess = tessellation(cfg.k)
    k, N = tess.k, cfg.c_bound
    lo_r, hi_r = Fraction(cfg.window[0]), Fraction(cfg.window[1])
    lo_f, hi_f = float(lo_r), float(hi_r)
    tol = FLOAT_SLACK * max(1.0, abs(lo_f), abs(hi_f))
    found: dict = {}

    def offer(g: MoebiusMatrix, i: int):
        w = g @ tess.rot[i]
        if w.c.is_zero() or not _abs_le(w.c, N):
            return
        pt = ParabolicPoint.from_pair(w.a, w.c)
        key = pt.key()
        if key in found:
            return
        v = float(pt)
        if v < lo_f - tol or v > hi_f + tol:
            return
        if _cmp_point(pt, lo_r) < 0 or _cmp_point(pt, hi_r) >= 0:
            return
        found[key] = EnumeratedPoint(pt, abs(_float(pt.q)), w)

    stack: list[tuple[MoebiusMatrix, int]] = []
    for g in tess.roots(lo_f, hi_f):
        for i in range(1, k):
            offer(g, i)
        stack.extend((g, j) for j in range(2, k))
    nodes = 0
    valid = True
    while stack:
        g, j = stack.pop()
        h, elo, ehi, cd = tess.edge(g, j)
        if cd > N * (1 + FLOAT_SLACK) or ehi < lo_f - tol or elo > hi_f + tol:
            continue
        nodes += 1
        if nodes > cfg.max_nodes:
            valid = False
            break
        child = tess.child(h)
        for i in range(1, k - 1):
            offer(child, i)
        stack.extend((child, jj) for jj in range(1, k))
    pts = sorted(found.values(), key=_sort_key)
    return EnumResult(pts, nodes, valid)


def path_candidates(x, k: int, c_bound: float) -> list[EnumeratedPoint]:
    """Vertices of the polygons met by the vertical geodesic above x, |c| <= c_bound.

    Any point with |x - p/q| < t/q^2 and t < 1/2 is among them, since the
    geodesic then enters the horoball at p/q, which lies inside the polygons
    having p/q as a vertex.  Near-vertex ambiguity is handled by following every
    edge whose interval contains x within a float tolerance.
    """
    tess = tessellation(k)
    xf = float(as_mpfr(x)) if not isinstance(x, (int, Fraction)) else float(x)
    tol = 1e-12 * max(1.0, abs(xf))
    found: dict = {}

    def offer(g: MoebiusMatrix, i: int):
        w = g @ tess.rot[i]
        if w.c.is_zero() or not _abs_le(w.c, c_bound):
            return
        pt = ParabolicPoint.from_pair(w.a, w.c)
        if pt.key() not in found:
            found[pt.key()] = EnumeratedPoint(pt, abs(_float(pt.q)), w)

    stack: list[tuple[MoebiusMatrix, int]] = []
    for g in tess.roots(xf, xf):
        m = _float(g.b) / tess.lam
        if not (m * tess.lam - tol <= xf <= (m + 1) * tess.lam + tol):
            continue
        for i in range(1, tess.k):
            offer(g, i)
        stack.extend((g, j) for j in range(2, tess.k))
    while stack:
        g, j = stack.pop()
        h, elo, ehi, cd = tess.edge(g, j)
        if cd > c_bound * (1 + FLOAT_SLACK) or not (elo - tol <= xf <= ehi + tol):
            continue
        child = tess.child(h)
        for i in range(1, tess.k - 1):
            offer(child, i)
        stack.extend((child, jj) for jj in range(1, tess.k))
    return sorted(found.values(), key=_sort_key)


def compute_t0(k: int, probe_bound: int = 4, depth: int = 4) -> float:
    """Half the least |c(g)| over words S T^m1 S T^m2 ... S, |m_i| <= probe_bound.

    The search is a plain word enumeration, independent of the tessellation
    walk (whose pruning relies on the answer being 1).
    """
    if probe_bound < 1:
        raise ValueError("probe_bound must be >= 1")
    return 0.5 * min_abs_c(k, probe_bound, depth)


def min_abs_c(k: int, probe_bound: int = 4, depth: int = 4) -> float:
    ring = make_ring(k)
    s_gen, _ = generators(ring)
    steps = [t_power(ring, m) @ s_gen for m in range(-probe_bound, probe_bound + 1) if m]
    best = math.inf
    level = [s_gen]
    for _ in range(depth):
        nxt = []
        for g in level:
            if not g.c.is_zero():
                best = min(best, abs(_float(g.c)))
            nxt.extend(g @ st for st in steps)
        level = nxt
    for g in level:
        if not g.c.is_zero():
            best = min(best, abs(_float(g.c)))
    return best


def target_slope(k: int, t: float) -> float:
    """Limit of count / ln N: 4 k lambda t / ((k - 2) pi^2)."""
    lam = 2 * math.cos(math.pi / k)
    return 4 * k * lam * t / ((k - 2) * math.pi ** 2)


def _as_fraction(t) -> Fraction:
    """Floats are read as the decimal they print as (0.1 means 1/10)."""
    return Fraction(repr(t)) if isinstance(t, float) else Fraction(t)


def _exact_pair(x):
    """x = X / D with integers X and D > 0."""
    if isinstance(x, Fraction):
        return x.numerator, x.denominator
    if isinstance(x, int):
        return x, 1
    n, d = as_mpfr(x).as_integer_ratio()
    return int(n), int(d)


def is_solution(x, pt: ParabolicPoint, t) -> bool | None:
    """|x - p/q| < t/q^2 decided exactly; None if the sign cannot be certified."""
    X, D = _exact_pair(x)
    t = _as_fraction(t)
    u = pt.q * X - pt.p * D
    try:
        if sign(u) < 0:
            u = -u
        val = pt.q.ring.from_int(t.numerator * D) - pt.q * u * t.denominator
        return sign(val) > 0
    except PrecisionCapError:
        return None


@dataclass
class CountingReport:
    k: int
    x: float
    t_grid: list
    n_grid: list
    counts: dict = field(default_factory=dict)      # (t, N) -> int
    undecided: dict = field(default_factory=dict)   # (t, N) -> int
    t0: float = T0_HECKE
    flagged: list = field(default_factory=list)     # t values >= t0

    def slope_estimate(self, t, N) -> float:
        return self.counts[(t, N)] / math.log(N)

    def target_slope(self, t) -> float:
        return target_slope(self.k, float(t))

    def count_interval(self, t, N) -> tuple[int, int]:
        c = self.counts[(t, N)]
        return c, c + self.undecided.get((t, N), 0)


def count_solutions(x, t_grid, n_grid, k: int, max_nodes: int = 2_000_000) -> CountingReport:
    """Number of distinct g(oo) with |x - g(oo)| < t/c(g)^2 and 0 < |c(g)| <= N.

    For t < 1/2 the candidates are path vertices; larger t falls back to the
    windowed enumeration over [x - t, x + t) and is flagged.
    """
    t_grid = [_as_fraction(t) for t in t_grid]
    n_grid = sorted(n_grid)
    xf = float(as_mpfr(x)) if not isinstance(x, (int, Fraction)) else float(x)
    report = CountingReport(k, xf, [float(t) for t in t_grid], list(n_grid))
    n_max = n_grid[-1]
    small = [t for t in t_grid if t < Fraction(1, 2)]
    large = [t for t in t_grid if t >= Fraction(1, 2)]
    groups = []
    if small:
        groups.append((small, path_candidates(x, k, n_max)))
    for t in large:
        report.flagged.append(float(t))
        w = Fraction(xf)
        cfg = EnumConfig(k, n_max, (w - t - 1, w + t + 1), max_nodes)
        res = enumerate_points(cfg)
        if not res.valid:
            raise BudgetExceeded("enumeration budget exhausted")
        groups.append(([t], res.points))
    for ts, cands in groups:
        for t in ts:
            hits, unsure = [], []
            for e in cands:
                ok = is_solution(x, e.point, t)
                if ok is None:
                    unsure.append(e)
                elif ok:
                    hits.append(e)
            for N in n_grid:
                key = (float(t), N)
                report.counts[key] = sum(1 for e in hits if _abs_le(e.point.q, N))
                report.undecided[key] = sum(1 for e in unsure if _abs_le(e.point.q, N))
    return report
