"""Digit maps (Rosen lambda-nearest, Gauss, alpha) and certified orbit expansion.

All three maps share one shape: for x != 0 in the domain, w = |1/x|,
b = floor(w / lambda + s) and the next point is w - b*lambda, so the domain is
[-s*lambda, (1-s)*lambda).  Rosen uses s = 1/2, the alpha map s = 1 - alpha
(with lambda = 1) and the Gauss map s = 0.

Seeds given as MPFR values are dyadic rationals and are treated as exact.
Expansion runs a floating orbit in blocks and then certifies the digit string:
the tail T^n x0 is enclosed rigorously through the exact convergent matrix and
pulled back through the contracting inverse branches, every intermediate point
being checked against the half-open domain.  Exact seeds (ints, Fractions,
elements of Q(lambda)) are expanded with exact pair arithmetic instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import gmpy2
from gmpy2 import mpfr

from .moebius import (
    MoebiusMatrix,
    convergent_chain,
    convergent_matrix,
    times_convergent,
)
from .ring import (
    as_mpfr,
    PRECISION_CAP,
    LambdaInt,
    LambdaRing,
    PrecisionCapError,
    RealEnclosure,
    down,
    enclose,
    make_ring,
    near,
    sign,
    up,
)

BITS_PER_STEP = 6
BASE_BITS = 128
BLOCK_BITS = 1024
MAX_RETRIES = 4


class Terminated(Exception):
    """The orbit reached 0 exactly; there is no further digit."""


@dataclass(frozen=True)
class Family:
    """A continued-fraction digit map; ``shift`` is s in b = floor(|1/x|/lambda + s)."""

    name: str
    ring: LambdaRing
    shift: Fraction
    alpha: Fraction | None = None

    @property
    def k(self) -> int:
        return self.ring.k

    @property
    def label(self) -> str:
        if self.name == "rosen":
            return f"rosen(k={self.k})"
        if self.name == "alpha":
            return f"alpha({self.alpha})"
        return "regular"

    def lam(self, prec: int = 128) -> RealEnclosure:
        return self.ring.lambda_enclosure(prec)

    def domain(self, prec: int = 128) -> tuple[RealEnclosure, RealEnclosure]:
        """Enclosures of the endpoints of [-s*lambda, (1-s)*lambda)."""
        lam = self.ring.lambda_enclosure(prec)
        s = self.shift
        return (lam * RealEnclosure.exact(-s, prec), lam * RealEnclosure.exact(1 - s, prec))

    def domain_float(self) -> tuple[float, float]:
        lo, hi = self.domain(64)
        return lo.mid, hi.mid


def rosen(k: int) -> Family:
    return Family("rosen", make_ring(k), Fraction(1, 2))


def regular() -> Family:
    return Family("regular", make_ring(3), Fraction(0))


def alpha_family(alpha) -> Family:
    alpha = Fraction(alpha)
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if alpha == 1:
        return Family("alpha", make_ring(3), Fraction(0), alpha)
    return Family("alpha", make_ring(3), 1 - alpha, alpha)


def parse_family(spec: str, k: int | None = None) -> Family:
    """'rosen' (needs k), 'regular', or 'alpha:<value>'."""
    if spec == "rosen":
        if k is None:
            raise ValueError("rosen family needs k")
        return rosen(k)
    if spec == "regular":
        return regular()
    if spec.startswith("alpha"):
        _, _, val = spec.partition(":")
        return alpha_family(Fraction(val or "1/2"))
    raise ValueError(f"unknown family {spec!r}")


# ----------------------------------------------------------------------------
# exact pairs in Q(lambda)


def to_pair(x, ring: LambdaRing) -> tuple[LambdaInt, LambdaInt]:
    """Exact (numerator, denominator > 0) for an int, Fraction, MPFR or pair."""
    if isinstance(x, tuple):
        num, den = x
        return (num, den) if sign(den) > 0 else (-num, -den)
    if isinstance(x, int):
        return ring.from_int(x), ring.one
    if isinstance(x, Fraction):
        return ring.from_int(x.numerator), ring.from_int(x.denominator)
    if isinstance(x, str):
        return to_pair(Fraction(x), ring)
    n, d = as_mpfr(x).as_integer_ratio()
    return ring.from_int(int(n)), ring.from_int(int(d))


def _pair_sign(num: LambdaInt, den: LambdaInt) -> int:
    return sign(num) * sign(den)


def _digit_bounds_ok(fam: Family, a_abs: LambdaInt, b_abs: LambdaInt, b: int) -> int:
    """0 if b = floor(w/lambda + s) for w = b_abs/a_abs, -1 if b too large, +1 if too small."""
    s = fam.shift
    num, den = s.numerator, s.denominator
    lam_a = a_abs.times_lambda()
    # w >= (b - s) lambda  <=>  den*|B| - (b*den - num) lambda |A| >= 0
    if sign(b_abs * den - lam_a * (b * den - num)) < 0:
        return -1
    if sign(b_abs * den - lam_a * ((b + 1) * den - num)) >= 0:
        return 1
    return 0


def exact_digit(fam: Family, num: LambdaInt, den: LambdaInt):
    """One exact step on x = num/den: ((eps, b), (num', den'))."""
    s_num = sign(num)
    if s_num == 0:
        raise Terminated
    s_den = sign(den)
    eps = s_num * s_den
    a_abs = num if s_num > 0 else -num
    b_abs = den if s_den > 0 else -den
    prec = 64
    while True:
        try:
            w = enclose(b_abs, prec) / enclose(a_abs, prec)
            u = w / fam.lam(prec) + RealEnclosure.exact(fam.shift, prec)
            b = int(gmpy2.floor(u.lower))
            break
        except ZeroDivisionError:
            prec *= 2
            if prec > PRECISION_CAP:
                raise PrecisionCapError("cannot separate orbit point from zero")
    b = max(b, 1)
    while True:
        adj = _digit_bounds_ok(fam, a_abs, b_abs, b)
        if adj == 0:
            break
        b += adj
    nxt_num = b_abs - a_abs.times_lambda() * b
    return (eps, b), (nxt_num, a_abs)


def pair_to_float(num: LambdaInt, den: LambdaInt) -> float:
    if num.is_zero():
        return 0.0
    prec = 64
    while True:
        d = enclose(den, prec)
        if not d.contains_zero():
            return (enclose(num, prec) / d).mid
        prec *= 2


# ----------------------------------------------------------------------------
# single-step digit functions on MPFR values


def _step_mpfr(fam: Family, x: mpfr, prec: int, lam_p: mpfr, slack_bits: float):
    """Digit of x at working precision ``prec``.

    Returns None when x is within the rounding slack of a digit boundary or of 0.
    """
    if x == 0:
        raise Terminated
    ctx = near(prec)
    eps = 1 if x > 0 else -1
    ax = ctx.abs(x)
    inv = ctx.div(1, ax)
    u = ctx.add(ctx.div(inv, lam_p), _shift_mpq(fam.shift))
    b = int(gmpy2.floor(u))
    frac = ctx.sub(u, b)
    tol = gmpy2.mul_2exp(u, int(slack_bits) + 32 - prec)
    if frac <= tol or ctx.sub(1, frac) <= tol or b < 1:
        return None
    nxt = ctx.sub(inv, ctx.mul(lam_p, b))
    return (eps, b), nxt


def _shift_mpq(s: Fraction):
    return gmpy2.mpq(s.numerator, s.denominator)


def _lam_mpfr(ring: LambdaRing, prec: int) -> mpfr:
    if ring.degree == 1:
        return mpfr(1)
    return near(prec).plus(ring.lambda_mpfr(prec))


def _check_domain(fam: Family, x, prec: int = 64):
    lo, hi = fam.domain(prec)
    xe = x if isinstance(x, RealEnclosure) else RealEnclosure.exact(x, max(prec, as_mpfr(x).precision))
    if not (xe.lower >= lo.upper and xe.upper < hi.lower):
        if xe.upper < lo.lower or xe.lower >= hi.upper:
            raise ValueError("seed outside the digit map's domain")


def rosen_digit(x, ring: LambdaRing, precision_bits: int = 128):
    """(RosenDigit (eps, b), next_x) for x in [-lambda/2, lambda/2), x != 0."""
    return _family_digit(rosen(ring.k), x, precision_bits)


def gauss_digit(x, precision_bits: int = 128):
    (eps, a), nxt = _family_digit(regular(), x, precision_bits)
    return a, nxt


def alpha_digit(x, alpha, precision_bits: int = 128):
    return _family_digit(alpha_family(alpha), x, precision_bits)


def _family_digit(fam: Family, x, precision_bits: int):
    """Exact inputs (int, Fraction, str) give an exact next point (a pair if irrational)."""
    if isinstance(x, (int, Fraction, str, tuple)):
        num, den = to_pair(x, fam.ring)
        digit, (n2, d2) = exact_digit(fam, num, den)
        if fam.ring.degree == 1:
            return digit, Fraction(n2.coeffs[0], d2.coeffs[0])
        return digit, (n2, d2)
    x = as_mpfr(x)
    prec = max(precision_bits, x.precision)
    while prec <= PRECISION_CAP + x.precision:
        res = _step_mpfr(fam, x, prec, _lam_mpfr(fam.ring, prec), 0)
        if res is not None:
            return res
        prec *= 2
    # boundary tie: decide exactly on the dyadic value
    num, den = to_pair(x, fam.ring)
    digit, (n2, d2) = exact_digit(fam, num, den)
    return digit, mpfr(pair_to_float(n2, d2))


# ----------------------------------------------------------------------------
# expansions


@dataclass
class Expansion:
    family: Family
    x0: object
    digits: list[tuple[int, int]]
    orbit: list[float]
    terminated: bool
    precision_bits: int
    certified: bool = True
    n_max: int = 0

    @property
    def k(self) -> int:
        return self.family.k

    @property
    def ring(self) -> LambdaRing:
        return self.family.ring

    @property
    def truncated(self) -> bool:
        return not self.terminated and len(self.digits) < self.n_max

    @cached_property
    def convergents(self) -> list[tuple[LambdaInt, LambdaInt]]:
        return convergent_chain(self.digits, self.ring)

    @cached_property
    def matrix(self) -> MoebiusMatrix:
        if "convergents" in self.__dict__ and len(self.digits) > 0:
            (p1, q1), (p, q) = self.convergents[-2], self.convergents[-1]
            return MoebiusMatrix(p1, p, q1, q)
        return convergent_matrix(self.digits, self.ring)

    def digit_string(self) -> str:
        return ",".join(f"{'+' if e > 0 else '-'}{b}" for e, b in self.digits)


def _exact_expand(fam: Family, num: LambdaInt, den: LambdaInt, n_max: int):
    digits, orbit = [], [pair_to_float(num, den)]
    terminated = False
    for _ in range(n_max):
        try:
            digit, (num, den) = exact_digit(fam, num, den)
        except Terminated:
            terminated = True
            break
        digits.append(digit)
        orbit.append(pair_to_float(num, den))
    if not terminated and len(digits) == n_max and num.is_zero():
        terminated = True
    return digits, orbit, terminated


def _tail_enclosure(m: MoebiusMatrix, x0: mpfr) -> RealEnclosure:
    """Rigorous enclosure of M^{-1}(x0) = (p_n - q_n x0) / (q_{n-1} x0 - p_{n-1})."""
    extra = max(e.max_bits() for e in m.entries())
    prec = 2 * extra + 128
    p0 = x0.precision
    while True:
        xe = RealEnclosure.exact(x0, max(p0, prec + extra))
        p1, p, q1, q = (enclose(e, prec) for e in (m.a, m.b, m.c, m.d))
        num = p - q * xe
        den = q1 * xe - p1
        if not den.contains_zero():
            y = num / den
            if y.width < gmpy2.mul_2exp(mpfr(1), -64):
                return y
        if prec > 4 * extra + 4 * PRECISION_CAP:
            raise PrecisionCapError("tail enclosure did not converge")
        prec *= 2


def _down(v: float) -> float:
    return math.nextafter(v, -math.inf)


def _up(v: float) -> float:
    return math.nextafter(v, math.inf)


def _pullback_float(fam: Family, digits, lo: float, hi: float) -> bool | None:
    """Backward pass with outward-rounded doubles.

    True: every intermediate point certified inside the domain.  None: some
    check was too close to call in double precision.
    """
    lam_e = fam.lam(64)
    lam_lo, lam_hi = _down(float(lam_e.lower)), _up(float(lam_e.upper))
    dlo, dhi = fam.domain(64)
    left = _up(float(dlo.upper))
    right = _down(float(dhi.lower))
    for j in range(len(digits) - 1, -1, -1):
        if not (lo >= left and hi < right):
            return None
        eps, b = digits[j]
        den_lo = _down(_down(b * lam_lo) + lo)
        den_hi = _up(_up(b * lam_hi) + hi)
        if den_lo <= 0:
            return None
        if eps > 0:
            lo, hi = _down(1.0 / den_hi), _up(1.0 / den_lo)
        else:
            lo, hi = _down(-1.0 / den_lo), _up(-1.0 / den_hi)
    return True


def _pullback_mpfr(fam: Family, digits, y: RealEnclosure, prec: int) -> bool | None:
    lam = fam.lam(prec)
    dlo, dhi = fam.domain(prec)
    one = RealEnclosure.exact(1, prec)
    x = y
    for j in range(len(digits) - 1, -1, -1):
        if x.lower >= dlo.upper and x.upper < dhi.lower:
            pass
        elif x.upper < dlo.lower or x.lower >= dhi.upper:
            return False
        else:
            return None
        eps, b = digits[j]
        den = lam.scale(b) + x
        x = one / den if eps > 0 else -(one / den)
    return True


def certify(fam: Family, x0: mpfr, digits, m: MoebiusMatrix | None = None) -> bool:
    """True iff the digit string provably is the expansion prefix of x0."""
    if not digits:
        return True
    if m is None:
        m = convergent_matrix(digits, fam.ring)
    y = _tail_enclosure(m, x0)
    res = _pullback_float(fam, digits, _down(float(y.lower)), _up(float(y.upper)))
    if res:
        return True
    prec = 128
    while prec <= PRECISION_CAP:
        res = _pullback_mpfr(fam, digits, y, prec)
        if res is not None:
            return res
        if y.width > gmpy2.mul_2exp(mpfr(1), -prec // 2):
            break
        prec *= 2
    return False


def _float_orbit(fam: Family, x0: mpfr, n_max: int, base_bits: int, bps: int):
    """Blocked floating orbit; returns (digits, orbit floats, matrix, terminated)."""
    ring = fam.ring
    digits: list[tuple[int, int]] = []
    orbit = [float(x0)]
    mat = MoebiusMatrix.identity(ring)
    x = x0
    exact_pair = None
    while len(digits) < n_max:
        rem = n_max - len(digits)
        if exact_pair is not None:
            try:
                digit, exact_pair = exact_digit(fam, *exact_pair)
            except Terminated:
                return digits, orbit, mat, True
            digits.append(digit)
            mat = times_convergent(mat, convergent_matrix([digit], ring))
            orbit.append(pair_to_float(*exact_pair))
            p_next = max(base_bits + bps * (rem - 1), 64)
            x = _pair_to_mpfr(*exact_pair, p_next)
            if x is None:
                continue
            exact_pair = None
            continue
        p_cur = x.precision
        w = min(p_cur, BLOCK_BITS)
        lam_w = _lam_mpfr(ring, w)
        xs = near(w).plus(x)
        lost = 0.0
        block, vals = [], []
        while len(block) < rem:
            if xs == 0:
                break
            e_, m_ = gmpy2.frexp(xs)
            step_loss = -2.0 * (e_ + math.log2(abs(float(m_))))
            if lost + max(step_loss, 0.0) + 96 > w:
                break
            res = _step_mpfr(fam, xs, w, lam_w, lost + max(step_loss, 0.0))
            if res is None:
                break
            digit, xs = res
            lost += max(step_loss, 0.0)
            block.append(digit)
            vals.append(xs)
        if not block:
            # stuck at a near-boundary or near-zero point: resolve exactly from x0
            inv = mat.inverse()
            n0, d0 = to_pair(x0, ring)
            exact_pair = (inv.a * n0 + inv.b * d0, inv.c * n0 + inv.d * d0)
            continue
        bm = convergent_matrix(block, ring)
        if w < p_cur:
            p1, p, q1, q = (_eval_mpfr(e, p_cur) for e in bm.entries())
            ctx = near(p_cur)
            y = ctx.div(ctx.sub(p, ctx.mul(q, x)), ctx.sub(ctx.mul(q1, x), p1))
            if abs(float(y) - float(xs)) > 1e-20 + 1e-12 * abs(float(xs)):
                raise ArithmeticError("block recomputation disagrees with inner orbit")
        else:
            y = xs
        digits.extend(block)
        orbit.extend(float(v) for v in vals)
        mat = times_convergent(mat, bm)
        p_next = max(base_bits + bps * (n_max - len(digits)), 64)
        x = near(min(p_next, p_cur)).plus(y)
    return digits, orbit, mat, False


def _pair_to_mpfr(num: LambdaInt, den: LambdaInt, prec: int):
    if num.is_zero():
        return None
    e = enclose(num, prec + 16) / enclose(den, prec + 16)
    return _midpoint(e, prec)


def _eval_mpfr(a: LambdaInt, prec: int) -> mpfr:
    return _midpoint(enclose(a, prec), prec)


def _midpoint(e: RealEnclosure, prec: int) -> mpfr:
    ctx = near(prec)
    return ctx.div_2exp(ctx.add(e.lower, e.upper), 1)


def expand(x, k_or_family, n_max: int, precision_bits: int | None = None,
           bits_per_step: int = BITS_PER_STEP) -> Expansion:
    """Rosen (or other family) expansion of x up to n_max digits.

    ``x`` may be an int, Fraction, decimal string or (num, den) pair in
    Z[lambda] for exact expansion, or an MPFR/float seed.
    """
    fam = k_or_family if isinstance(k_or_family, Family) else rosen(k_or_family)
    ring = fam.ring
    if isinstance(x, (int, Fraction, str, tuple)):
        if isinstance(x, str):
            x = Fraction(x)
        num, den = to_pair(x, ring)
        _check_domain(fam, RealEnclosure.exact(0, 64) if num.is_zero() else
                      enclose(num, 128) / enclose(den, 128))
        digits, orbit, terminated = _exact_expand(fam, num, den, n_max)
        return Expansion(fam, x, digits, orbit, terminated, 0, True, n_max)
    x0 = as_mpfr(x)
    _check_domain(fam, x0)
    base = precision_bits if precision_bits is not None else BASE_BITS
    for _ in range(MAX_RETRIES):
        digits, orbit, mat, terminated = _float_orbit(fam, x0, n_max, base, bits_per_step)
        if terminated or certify(fam, x0, digits, mat):
            e = Expansion(fam, x0, digits, orbit, terminated, base + bits_per_step * n_max, True, n_max)
            e.__dict__["matrix"] = mat
            return e
        base *= 2
        bits_per_step += 2
    # keep the longest prefix that still certifies and flag the result as truncated
    lo_n, hi_n = 0, len(digits)
    while lo_n < hi_n:
        mid = (lo_n + hi_n + 1) // 2
        if certify(fam, x0, digits[:mid]):
            lo_n = mid
        else:
            hi_n = mid - 1
    return Expansion(fam, x0, digits[:lo_n], orbit[:lo_n + 1], False, base, True, n_max)


# ----------------------------------------------------------------------------
# approximation coefficients


@dataclass
class ThetaSeries:
    thetas: list[float]
    x0: object
    family: str
    extra: dict = field(default_factory=dict)


def theta_series(e: Expansion, rel_bits: int = 40) -> ThetaSeries:
    """Theta_n = q_n^2 |x - p_n/q_n|, n >= 1, from exact convergents.

    With x0 = X/D exactly, Theta_n = |q_n| |q_n X - p_n D| / D; the difference
    is formed exactly in Z[lambda] and only then enclosed, with precision raised
    until the relative width is below 2^-rel_bits.
    """
    ring = e.ring
    num, den = to_pair(e.x0, ring)
    thetas = []
    for p, q in e.convergents[1:]:
        u = q * num - p * den
        if u.is_zero():
            thetas.append(0.0)
            continue
        prec = 64
        while True:
            val = abs(enclose(q, prec)) * abs(enclose(u, prec)) / abs(enclose(den, prec))
            if val.lower > 0 and val.width <= gmpy2.mul_2exp(val.lower, -rel_bits):
                break
            prec *= 2
            if prec > PRECISION_CAP * 4:
                raise PrecisionCapError("theta enclosure did not converge")
        thetas.append(val.mid)
    return ThetaSeries(thetas, e.x0, e.family.label)


def theta_from_orbit(fam: Family, digits, orbit) -> list[float]:
    """Theta_n = |t_n| / |1 + r_n t_n| with t_n = T^n x and r_n = q_{n-1}/q_n.

    Uses r_n = 1 / (a_n + eps_n r_{n-1}); double precision suffices because the
    denominator stays bounded away from 0 (cross-checked against theta_series).
    """
    lam = fam.lam(64).mid
    r = 0.0
    out = []
    for (eps, b), t in zip(digits, orbit[1:]):
        r = 1.0 / (b * lam + eps * r)
        out.append(abs(t) / abs(1.0 + r * t))
    return out


def log_q_from_orbit(fam: Family, digits) -> float:
    """ln q_n as - sum ln r_j (double-precision cross-check of the exact value)."""
    lam = fam.lam(64).mid
    r = 0.0
    acc = 0.0
    for eps, b in digits:
        r = 1.0 / (b * lam + eps * r)
        acc -= math.log(r)
    return acc


def log_q(e: Expansion) -> float:
    """ln q_n from the exact convergent denominator."""
    q = e.matrix.d
    prec = 64
    while True:
        enc = enclose(q, prec)
        if enc.lower > 0:
            return float(gmpy2.log(enc.lower) + gmpy2.log(enc.upper)) / 2
        prec *= 2


# ----------------------------------------------------------------------------
# two-sided error bounds for Rosen convergents


def rosen_r_enclosure(ring: LambdaRing, prec: int = 256) -> RealEnclosure:
    """Positive root R of R^2 + (2 - lambda) R - 1 = 0, widened well past rounding error."""
    ctx = near(prec + 32)
    b = ctx.sub(2, ring.lambda_mpfr(prec + 32))
    r = ctx.div_2exp(ctx.sub(ctx.sqrt(ctx.add(ctx.mul(b, b), 4)), b), 1)
    pad = gmpy2.mul_2exp(mpfr(1), -prec)
    return RealEnclosure(down(prec).sub(r, pad), up(prec).add(r, pad), prec)


@dataclass
class BoundsReport:
    checked: int = 0
    violations: list = field(default_factory=list)   # (n, which)
    undecided: list = field(default_factory=list)
    min_ratio: float = math.inf

    @property
    def ok(self) -> bool:
        return not self.violations and not self.undecided


def _le_enclosed(a: RealEnclosure, b: RealEnclosure) -> bool | None:
    if a.upper <= b.lower:
        return True
    if a.lower > b.upper:
        return False
    return None


def convergent_error_bounds(e: Expansion, report: BoundsReport | None = None) -> BoundsReport:
    """Check 1/(q_n(q_{n+1}+q_n)) <= |x - p_n/q_n| <= 1/(q_n^2 K) for every n with a successor.

    K = 1 - lambda/2 for even k and 1/R - lambda/2 for odd k.  Also records
    q_{n+1}/q_n, which must exceed 1 for even k and R for odd k.  With
    x0 = X/D the two sides are compared exactly in Z[lambda] where possible
    (lower bound, even upper bound, even ratio) and by enclosures otherwise.
    """
    rep = report if report is not None else BoundsReport()
    if e.family.name != "rosen":
        raise ValueError("error bounds are stated for Rosen expansions")
    ring = e.ring
    num, den = to_pair(e.x0, ring)
    conv = e.convergents
    odd = ring.k % 2 == 1
    prec = 256
    R = rosen_r_enclosure(ring, prec) if odd else None
    if odd:
        half_lam = ring.lambda_enclosure(prec) * RealEnclosure.exact(Fraction(1, 2), prec)
        K = RealEnclosure.exact(1, prec) / R - half_lam
    two = ring.from_int(2)
    lam = ring.lam
    for n in range(len(conv) - 1):
        (p, q), (_, q1) = conv[n], conv[n + 1]
        u = q * num - p * den
        if sign(u) < 0:
            u = -u
        rep.checked += 1
        if sign((q1 + q) * u - den) < 0:
            rep.violations.append((n, "lower"))
        if odd:
            lhs = enclose(q, prec) * enclose(u, prec) * K
            ok = _le_enclosed(lhs, enclose(den, prec))
            ratio_ok = _le_enclosed(R * enclose(q, prec), enclose(q1, prec))
        else:
            ok = sign(two * den - q * (two - lam) * u) >= 0
            ratio_ok = sign(q1 - q) > 0
        if ok is None:
            rep.undecided.append((n, "upper"))
        elif not ok:
            rep.violations.append((n, "upper"))
        if ratio_ok is None:
            rep.undecided.append((n, "ratio"))
        elif not ratio_ok:
            rep.violations.append((n, "ratio"))
        if n > 0:
            rep.min_ratio = min(rep.min_ratio, float(q1) / float(q))
    return rep
