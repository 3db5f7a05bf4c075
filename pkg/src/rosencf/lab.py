"""Monte Carlo statistics over seeded expansions.

Every sample draws its seed point from a private stream derived from
(master seed, sample index) by SplitMix64, so results do not depend on how
the samples are spread over worker processes.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from multiprocessing import get_context

import numpy as np
from gmpy2 import mpfr

from .cf import BASE_BITS, BITS_PER_STEP, Family, expand, log_q, regular, rosen, theta_from_orbit
from .hecke import EnumConfig, count_solutions, enumerate_points, is_solution, path_candidates
from .moebius import ParabolicPoint
from .ring import PrecisionCapError, RealEnclosure, enclose, near

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
SEED_MIXER = "splitmix64-finalizer((master + (index + 1) * 0x9E3779B97F4A7C15) mod 2^64)"
FAILURE_FRACTION = 1e-3


def splitmix64(z: int) -> int:
    z = (z + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def sample_seed(master: int, index: int) -> int:
    """Seed of sample ``index``: the index-th output of a SplitMix64 stream started at master."""
    return splitmix64((master + index * GOLDEN_GAMMA) & MASK64)


def sample_point(fam: Family, prec: int, seed: int) -> mpfr:
    """Uniform point of the family's domain at ``prec`` bits (exact dyadic)."""
    rng = random.Random(seed)
    lo, hi = fam.domain(prec + 16)
    ctx = near(prec)
    lo_m = _mid(lo, prec + 16)
    width = _mid(hi, prec + 16) - lo_m
    while True:
        u = ctx.div(rng.getrandbits(prec), 1 << prec)
        x = ctx.add(lo_m, ctx.mul(width, u))
        if lo.upper <= x < hi.lower:
            return x


def large_digit_point(fam: Family, prec: int, seed: int, m_range: tuple[int, int]) -> mpfr:
    """x = 1/(M lambda + y): first digit (+1, M) followed by the digits of a uniform y."""
    rng = random.Random(seed)
    lam_f = 2 * math.cos(math.pi / fam.k)
    m_min = math.ceil(2 / lam_f ** 2 + 0.5 + 1e-12)   # (+1, M) is a digit only if M lambda - lambda/2 >= 2/lambda
    m = rng.randint(max(m_range[0], m_min), max(m_range[1], m_min))
    y = sample_point(fam, prec + 16, rng.getrandbits(64))
    ctx = near(prec)
    lam = fam.ring.lambda_mpfr(prec + 16)
    return ctx.div(1, ctx.add(ctx.mul(lam, m), y))


def _mid(e: RealEnclosure, prec: int) -> mpfr:
    ctx = near(prec)
    return ctx.div_2exp(ctx.add(e.lower, e.upper), 1)


def parallel_map(fn, items, workers: int = 1) -> list:
    """Ordered map; identical output for any worker count."""
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with get_context("spawn").Pool(workers) as pool:
        return pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers)))


def seed_precision(n: int) -> int:
    return BASE_BITS + BITS_PER_STEP * n


# ---------------------------------------------------------------------------
# targets


def rosen_r(lam: float) -> float:
    """Positive root of R^2 + (2 - lambda) R - 1 = 0."""
    b = 2 - lam
    return (-b + math.sqrt(b * b + 4)) / 2


@dataclass(frozen=True)
class ConstantsTarget:
    k: int | None
    lam: float
    R: float | None
    C: float
    lenstra_target: float
    entropy_target: float

    @classmethod
    def for_k(cls, k: int) -> "ConstantsTarget":
        lam = 1.0 if k == 3 else 2 * math.cos(math.pi / k)
        if k % 2 == 0:
            R = None
            lenstra = lam / (lam + 2)
            C = 1 / math.log((1 + math.cos(math.pi / k)) / math.sin(math.pi / k))
        else:
            R = rosen_r(lam)
            lenstra = R / (R + 1)
            C = 1 / math.log(1 + R)
        h = C * (k - 2) * math.pi ** 2 / (2 * k)
        return cls(k, lam, R, C, lenstra, h)

    @classmethod
    def regular(cls) -> "ConstantsTarget":
        return cls(None, 1.0, None, 1 / math.log(2), 0.5, math.pi ** 2 / (6 * math.log(2)))

    @classmethod
    def for_family(cls, fam: Family) -> "ConstantsTarget | None":
        if fam.name == "rosen":
            return cls.for_k(fam.k)
        if fam.name == "regular" or (fam.name == "alpha" and fam.alpha == 1):
            return cls.regular()
        if fam.name == "alpha" and fam.alpha == Fraction(1, 2):
            return cls.for_k(3)
        return None

    @property
    def cdf_slope(self) -> float:
        """Slope of the linear part of the Theta distribution, lambda * C."""
        return self.lam * self.C

    def theorem1_slope(self, t: float) -> float:
        k = self.k
        return 4 * k * self.lam * t / ((k - 2) * math.pi ** 2)

    def as_dict(self) -> dict:
        return {"k": self.k, "lambda": self.lam, "R": self.R, "C": self.C,
                "lenstra_target": self.lenstra_target, "entropy_target": self.entropy_target,
                "cdf_slope": self.cdf_slope}


# ---------------------------------------------------------------------------
# Theta distribution


def _theta_job(args):
    fam, n, seed = args
    x = sample_point(fam, seed_precision(n), seed)
    e = expand(x, fam, n)
    if e.truncated:
        return None
    return np.asarray(theta_from_orbit(fam, e.digits, e.orbit), dtype=np.float64)


def default_t_grid(step: float = 0.005, top: float = 1.0) -> np.ndarray:
    n = int(round(top / step))
    return np.arange(1, n + 1) * step


@dataclass
class EmpiricalCdf:
    t_grid: np.ndarray
    mass: np.ndarray
    sample_count: int
    family: str
    failures: int = 0
    seeds: int = 0
    values: np.ndarray | None = field(default=None, repr=False)

    def mass_at(self, t: float) -> float:
        """Fraction of pooled values strictly below t."""
        if self.values is not None:
            return float(np.searchsorted(self.values, t, side="left")) / self.sample_count
        i = int(np.searchsorted(self.t_grid, t))
        if i >= len(self.t_grid) or not math.isclose(self.t_grid[i], t):
            raise KeyError(f"t = {t} not on the grid")
        return float(self.mass[i])

    @property
    def valid(self) -> bool:
        return self.failures <= FAILURE_FRACTION * max(self.seeds, 1)


def cdf_from_values(values: np.ndarray, t_grid, family: str, failures: int = 0, seeds: int = 0) -> EmpiricalCdf:
    values = np.sort(np.asarray(values, dtype=np.float64))
    t_grid = np.asarray(t_grid, dtype=np.float64)
    mass = np.searchsorted(values, t_grid, side="left") / max(len(values), 1)
    return EmpiricalCdf(t_grid, mass, len(values), family, failures, seeds, values)


def theta_cdf(family, sample_count: int, iters: int, seed: int, t_grid=None, workers: int = 1) -> EmpiricalCdf:
    """Pooled distribution of Theta_1..Theta_iters over uniform seeds."""
    fam = family if isinstance(family, Family) else rosen(family)
    if sample_count < 1 or iters < 1:
        raise ValueError("sample_count and iters must be >= 1")
    jobs = [(fam, iters, sample_seed(seed, i)) for i in range(sample_count)]
    parts = parallel_map(_theta_job, jobs, workers)
    good = [p for p in parts if p is not None]
    failures = len(parts) - len(good)
    values = np.concatenate(good) if good else np.empty(0)
    grid = default_t_grid() if t_grid is None else t_grid
    return cdf_from_values(values, grid, fam.label, failures, sample_count)


@dataclass(frozen=True)
class Breakpoint:
    t_star: float
    slope: float
    residual: float
    method: str


def _fit_origin(t: np.ndarray, m: np.ndarray) -> float:
    return float(np.dot(t, m) / np.dot(t, t))


def lenstra_breakpoint(cdf: EmpiricalCdf, tol: float = 1e-2, window: float = 0.05, t_min: float = 0.05,
                       refine: bool = True, noise_z: float = 4.0) -> Breakpoint:
    """End of the linear regime of the CDF.

    Detection: the fit window [0, t] grows over the grid; at each step a line
    through the origin is refitted on [0, t] and the residual is the relative
    gap between the slope over the newest stretch [t - window, t] and the
    fitted slope.  The last t before that gap exceeds ``tol`` is the detection
    point; the threshold is never below ``noise_z`` standard errors of the
    local slope (1/sqrt of the count in the stretch), so sampling noise alone
    does not end the linear regime.  A kink in the density only shows up in
    that gap some way past the kink, so with ``refine`` the location is then
    re-estimated by least squares on [0, t_detect + window] with the model
    s t - b max(0, t - L)^2 (linear, then a quadratic deficit), L scanned
    over [t_detect - 3 window, t_detect].
    """
    t = np.asarray(cdf.t_grid, dtype=np.float64)
    m = np.asarray(cdf.mass, dtype=np.float64)
    if len(t) < 40:
        raise ValueError("grid too coarse for breakpoint detection")
    step = float(np.median(np.diff(t)))
    w = max(1, int(round(window / step)))
    start = max(int(np.searchsorted(t, t_min)), w)
    accepted = None
    worst = 0.0
    for i in range(start, len(t)):
        s = _fit_origin(t[: i + 1], m[: i + 1])
        local = (m[i] - m[i - w]) / (t[i] - t[i - w])
        gap = abs(local - s) / s
        in_window = (m[i] - m[i - w]) * cdf.sample_count
        if gap > max(tol, noise_z / math.sqrt(max(in_window, 1.0))):
            break
        accepted, worst = i, max(worst, float(gap))
    if accepted is None:
        raise ValueError("no linear regime detected")
    t_detect = float(t[accepted])
    if not refine or accepted == len(t) - 1:
        sel = t <= t_detect + 1e-12
        return Breakpoint(t_detect, _fit_origin(t[sel], m[sel]), worst, "growing-window")
    sel = t <= t_detect + window + 1e-12
    tt, mm = t[sel], m[sel]
    best = None
    lo = max(float(t[start]), t_detect - 3 * window)
    for L in np.arange(lo, t_detect + step / 2, step / 10):
        design = np.stack([tt, -np.maximum(0.0, tt - L) ** 2], axis=1)
        coef = np.linalg.lstsq(design, mm, rcond=None)[0]
        sse = float(np.sum((design @ coef - mm) ** 2))
        if best is None or sse < best[0]:
            best = (sse, float(L), float(coef[0]))
    return Breakpoint(best[1], best[2], worst, "growing-window+hinge")


# ---------------------------------------------------------------------------
# entropy


def _entropy_job(args):
    fam, n, seed = args
    x = sample_point(fam, seed_precision(n), seed)
    e = expand(x, fam, n)
    if e.truncated or e.terminated:
        return None
    return 2.0 * log_q(e) / n


@dataclass
class EntropyEstimate:
    h_hat: float
    stderr: float
    samples: int
    failures: int
    per_sample: list = field(repr=False, default_factory=list)

    @property
    def valid(self) -> bool:
        return self.failures <= FAILURE_FRACTION * max(self.samples + self.failures, 1)


def entropy_estimate(family, sample_count: int, n: int, seed: int, workers: int = 1) -> EntropyEstimate:
    """Mean over samples of (2/n) ln q_n with its standard error."""
    fam = family if isinstance(family, Family) else rosen(family)
    if sample_count < 1 or n < 1:
        raise ValueError("sample_count and n must be >= 1")
    jobs = [(fam, n, sample_seed(seed, i)) for i in range(sample_count)]
    vals = parallel_map(_entropy_job, jobs, workers)
    good = [v for v in vals if v is not None]
    if not good:
        raise PrecisionCapError("no sample produced a full expansion")
    arr = np.asarray(good)
    stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else math.nan
    return EntropyEstimate(float(arr.mean()), stderr, len(good), len(vals) - len(good), good)


# ---------------------------------------------------------------------------
# regular continued fractions


def bjw_F(t: float) -> float:
    """Limit distribution of Theta_n for regular continued fractions."""
    if t <= 0:
        return 0.0
    if t <= 0.5:
        return t / math.log(2)
    if t >= 1:
        return 1.0
    return (1 - t + math.log(2 * t)) / math.log(2)


@dataclass
class BjwTable:
    rows: list          # (t, empirical, F(t))
    cdf: EmpiricalCdf

    @property
    def max_deviation(self) -> float:
        return max(abs(e - f) for _, e, f in self.rows)


def bjw_check(sample_count: int, n: int, seed: int, t_grid=None, workers: int = 1) -> BjwTable:
    cdf = theta_cdf(regular(), sample_count, n, seed, t_grid, workers)
    rows = [(float(t), float(mv), bjw_F(float(t))) for t, mv in zip(cdf.t_grid, cdf.mass)]
    return BjwTable(rows, cdf)


# ---------------------------------------------------------------------------
# Legendre scan


@dataclass(frozen=True)
class Witness:
    x: str              # exact value "X/D"
    p: str
    q: str
    theta: float        # q^2 |x - p/q|
    c: float
    point: ParabolicPoint = field(repr=False, compare=False, default=None)


@dataclass
class LegendreScanReport:
    k: int
    c_grid: list
    q_bound: float
    samples: int
    seed_mode: str
    violations: dict = field(default_factory=dict)   # c -> count of samples with a violation
    witnesses: dict = field(default_factory=dict)    # c -> list[Witness]
    skipped: int = 0
    replayed: bool = False


def _convergent_keys(x: mpfr, fam: Family, q_bound: float) -> set:
    """Normalised (p_n, q_n) keys of x's convergents with q_n up to past q_bound."""
    n = 16
    while True:
        e = expand(x, fam, n, precision_bits=max(BASE_BITS, x.precision))
        keys = set()
        beyond = False
        for p, q in e.convergents:
            keys.add(ParabolicPoint.from_pair(p, q).key())
            if float(q) > q_bound * (1 + 1e-9):
                beyond = True
                break
        if beyond or e.terminated:
            return keys
        if e.truncated:
            raise PrecisionCapError("expansion truncated during Legendre scan")
        n *= 2


def _pair_str(x: mpfr) -> str:
    X, D = x.as_integer_ratio()
    return f"{int(X)}/{int(D)}"


def _theta_float(x: mpfr, pt: ParabolicPoint) -> float:
    X, D = (int(v) for v in x.as_integer_ratio())
    u = pt.q * X - pt.p * D
    val = abs(enclose(pt.q, 96)) * abs(enclose(u, 96)) / RealEnclosure.exact(D, 96)
    return val.mid


def scan_point(x: mpfr, fam: Family, c_grid, q_bound: float, candidates=None):
    """Violations at x: dict c -> list of points p/q with |x - p/q| < c/q^2 that are not convergents."""
    c_top = max(c_grid)
    if candidates is None:
        if c_top < 0.5:
            cands = [e.point for e in path_candidates(x, fam.k, q_bound)]
        else:
            xf = float(x)
            res = enumerate_points(EnumConfig(fam.k, q_bound, (xf - c_top - 1e-9, xf + c_top + 1e-9)))
            cands = [e.point for e in res.points]
    else:
        cands = candidates
    out = {c: [] for c in c_grid}
    skipped = 0
    conv = None
    for pt in cands:
        if not is_solution(x, pt, Fraction(repr(float(c_top)))):
            continue
        if conv is None:
            conv = _convergent_keys(x, fam, q_bound)
        if pt.key() in conv:
            continue
        for c in c_grid:
            ok = is_solution(x, pt, c)
            if ok is None:
                skipped += 1
            elif ok:
                out[c].append(pt)
    return out, skipped


def _scan_job(args):
    fam, c_grid, q_bound, seed, mode, m_range = args
    prec = seed_precision(64)
    x = large_digit_point(fam, prec, seed, m_range) if mode == "large_digit" else sample_point(fam, prec, seed)
    found, skipped = scan_point(x, fam, c_grid, q_bound)
    wits = {c: [Witness(_pair_str(x), str(pt.p), str(pt.q), _theta_float(x, pt), float(c), pt) for pt in pts]
            for c, pts in found.items()}
    return x, wits, skipped


def replay_witness(fam: Family, x_pair: str, pt: ParabolicPoint, c, q_bound: float) -> bool:
    """Re-check a witness from scratch: strict inequality and non-membership among convergents."""
    X, D = (int(v) for v in x_pair.split("/"))
    prec = max(D.bit_length() + 8, 64)
    x = near(prec).div(X, D)
    if x.as_integer_ratio() != (X, D):
        return False
    if not is_solution(x, pt, c):
        return False
    return pt.key() not in _convergent_keys(x, fam, q_bound)


def legendre_scan(k: int, c_grid, q_bound: float, x_samples: int, seed: int, seed_mode: str = "uniform",
                  m_range: tuple[int, int] = (3, 12), workers: int = 1, max_witnesses: int = 20) -> LegendreScanReport:
    """Sampled search for points p/q with |x - p/q| < c/q^2 that are not convergents of x."""
    if seed_mode not in ("uniform", "large_digit"):
        raise ValueError("seed_mode must be 'uniform' or 'large_digit'")
    fam = rosen(k)
    c_grid = [float(c) for c in c_grid]
    report = LegendreScanReport(k, c_grid, q_bound, x_samples, seed_mode)
    report.violations = {c: 0 for c in c_grid}
    report.witnesses = {c: [] for c in c_grid}
    active = [c for c in c_grid if c > 0]
    if not active:
        report.replayed = True
        return report
    jobs = [(fam, active, q_bound, sample_seed(seed, i), seed_mode, m_range) for i in range(x_samples)]
    for _, wits, skipped in parallel_map(_scan_job, jobs, workers):
        report.skipped += skipped
        for c, ws in wits.items():
            if ws:
                report.violations[c] += 1
                if len(report.witnesses[c]) < max_witnesses:
                    report.witnesses[c].append(ws[0])
    for c, ws in report.witnesses.items():
        for w in ws:
            if not replay_witness(fam, w.x, w.point, c, q_bound):
                raise AssertionError(f"witness failed replay: {w}")
    report.replayed = True
    return report


# ---------------------------------------------------------------------------
# solution counting


@dataclass
class CountingSummary:
    k: int
    t_grid: list
    n_grid: list
    reports: list = field(repr=False, default_factory=list)

    def mean_count(self, t, N) -> float:
        return float(np.mean([r.counts[(float(t), N)] for r in self.reports]))

    def mean_slope(self, t, N) -> float:
        return self.mean_count(t, N) / math.log(N)

    def undecided(self) -> int:
        return sum(sum(r.undecided.values()) for r in self.reports)


def _count_job(args):
    fam, t_grid, n_grid, seed = args
    x = sample_point(fam, BASE_BITS, seed)
    return count_solutions(x, t_grid, n_grid, fam.k)


def counting_experiment(k: int, t_grid, n_grid, sample_count: int, seed: int, workers: int = 1) -> CountingSummary:
    """Solution counts at uniform seeds of the Rosen domain."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    fam = rosen(k)
    t_grid = [Fraction(repr(float(t))) if isinstance(t, float) else Fraction(t) for t in t_grid]
    n_grid = sorted(int(n) for n in n_grid)
    jobs = [(fam, t_grid, n_grid, sample_seed(seed, i)) for i in range(sample_count)]
    reports = parallel_map(_count_job, jobs, workers)
    return CountingSummary(k, [float(t) for t in t_grid], n_grid, reports)
