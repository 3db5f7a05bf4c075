"""Exact arithmetic in Z[lambda_k], lambda_k = 2 cos(pi/k), with certified signs.

Elements are integer coefficient vectors in the power basis 1, lambda, ...,
lambda^(d-1), always reduced modulo the minimal polynomial.  Real values are
obtained through outward-rounded MPFR intervals; the zero test is symbolic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import gmpy2
from gmpy2 import mpfr

K_MAX = 20
PRECISION_LADDER_START = 64
PRECISION_CAP = 8192


class RingMismatchError(ValueError):
    pass


class PrecisionCapError(ArithmeticError):
    """Raised when a sign or comparison cannot be certified below the precision cap."""


@lru_cache(maxsize=None)
def _ctx(prec: int, rounding) -> gmpy2.context:
    return gmpy2.context(precision=prec, round=rounding)


def down(prec: int) -> gmpy2.context:
    return _ctx(prec, gmpy2.RoundDown)


def up(prec: int) -> gmpy2.context:
    return _ctx(prec, gmpy2.RoundUp)


def near(prec: int) -> gmpy2.context:
    return _ctx(prec, gmpy2.RoundToNearest)


def as_mpfr(x) -> mpfr:
    """MPFR value of x without rounding an existing MPFR to the global precision."""
    if isinstance(x, type(mpfr(0))):
        return x
    if isinstance(x, float):
        return near(53).plus(x)
    return mpfr(x)


@dataclass(frozen=True)
class RealEnclosure:
    """Closed interval [lower, upper] of MPFR values at a working precision."""

    lower: mpfr
    upper: mpfr
    precision_bits: int

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("empty enclosure")

    @classmethod
    def exact(cls, value, prec: int) -> "RealEnclosure":
        """Enclose an int, Fraction or mpfr exactly representable or rounded outward."""
        if isinstance(value, Fraction):
            lo = down(prec).div(gmpy2.mpz(value.numerator), gmpy2.mpz(value.denominator))
            hi = up(prec).div(gmpy2.mpz(value.numerator), gmpy2.mpz(value.denominator))
            return cls(lo, hi, prec)
        lo = down(prec).plus(value) if not isinstance(value, int) else down(prec).plus(gmpy2.mpz(value))
        hi = up(prec).plus(value) if not isinstance(value, int) else up(prec).plus(gmpy2.mpz(value))
        return cls(lo, hi, prec)

    @property
    def width(self) -> mpfr:
        return up(self.precision_bits).sub(self.upper, self.lower)

    @property
    def mid(self) -> float:
        return float((self.lower + self.upper) / 2)

    def contains(self, value) -> bool:
        return self.lower <= value <= self.upper

    def contains_zero(self) -> bool:
        return self.lower <= 0 <= self.upper

    def sign(self) -> int | None:
        """Certified sign, or None when the enclosure straddles zero."""
        if self.lower > 0:
            return 1
        if self.upper < 0:
            return -1
        if self.lower == 0 == self.upper:
            return 0
        return None

    def __add__(self, other: "RealEnclosure") -> "RealEnclosure":
        p = max(self.precision_bits, other.precision_bits)
        return RealEnclosure(down(p).add(self.lower, other.lower), up(p).add(self.upper, other.upper), p)

    def __neg__(self) -> "RealEnclosure":
        p = self.precision_bits
        return RealEnclosure(down(p).minus(self.upper), up(p).minus(self.lower), p)

    def __sub__(self, other: "RealEnclosure") -> "RealEnclosure":
        return self + (-other)

    def __mul__(self, other: "RealEnclosure") -> "RealEnclosure":
        p = max(self.precision_bits, other.precision_bits)
        dn, uu = down(p), up(p)
        a, b, c, d = self.lower, self.upper, other.lower, other.upper
        lo = min(dn.mul(a, c), dn.mul(a, d), dn.mul(b, c), dn.mul(b, d))
        hi = max(uu.mul(a, c), uu.mul(a, d), uu.mul(b, c), uu.mul(b, d))
        return RealEnclosure(lo, hi, p)

    def __truediv__(self, other: "RealEnclosure") -> "RealEnclosure":
        if other.contains_zero():
            raise ZeroDivisionError("divisor enclosure contains zero")
        p = max(self.precision_bits, other.precision_bits)
        dn, uu = down(p), up(p)
        a, b, c, d = self.lower, self.upper, other.lower, other.upper
        lo = min(dn.div(a, c), dn.div(a, d), dn.div(b, c), dn.div(b, d))
        hi = max(uu.div(a, c), uu.div(a, d), uu.div(b, c), uu.div(b, d))
        return RealEnclosure(lo, hi, p)

    def __abs__(self) -> "RealEnclosure":
        if self.lower >= 0:
            return self
        if self.upper <= 0:
            return -self
        p = self.precision_bits
        return RealEnclosure(mpfr(0), max(up(p).minus(self.lower), self.upper), p)

    def scale(self, n: int) -> "RealEnclosure":
        """Multiply by an exact integer."""
        p = self.precision_bits
        z = gmpy2.mpz(n)
        lo, hi = down(p).mul(self.lower, z), up(p).mul(self.upper, z)
        return RealEnclosure(lo, hi, p) if n >= 0 else RealEnclosure(down(p).mul(self.upper, z), up(p).mul(self.lower, z), p)


def _int_poly_mul(a: list[int], b: list[int]) -> list[int]:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _int_poly_divmod(num: list[int], den: list[int]) -> tuple[list[int], list[int]]:
    """Division by a monic polynomial; coefficient lists are lowest degree first."""
    num = list(num)
    dq = len(den) - 1
    if len(num) - 1 < dq:
        return [0], num
    quot = [0] * (len(num) - dq)
    for i in range(len(num) - 1, dq - 1, -1):
        c = num[i]
        if c:
            quot[i - dq] = c
            for j in range(dq + 1):
                num[i - dq + j] -= c * den[j]
    rem = num[:dq] or [0]
    return quot, rem


def _dickson(n: int) -> list[int]:
    """D_n with D_n(z + 1/z) = z^n + z^-n (Chebyshev relation in the 2cos normalisation)."""
    d0, d1 = [2], [0, 1]
    if n == 0:
        return d0
    for _ in range(n - 1):
        nxt = [0] + d1
        for i, c in enumerate(d0):
            nxt[i] -= c
        d0, d1 = d1, nxt
    return d1


@lru_cache(maxsize=None)
def minimal_polynomial(k: int) -> tuple[int, ...]:
    """Minimal polynomial of 2cos(pi/k), lowest degree first, monic.

    2cos(pi/k) is a root of D_k(x) + 2.  The irreducible factor is the product of
    (x - 2cos(j pi/k)) over odd j < k coprime to k; it is formed numerically,
    rounded, and then checked to divide D_k + 2 exactly over Z.
    """
    check_index(k)
    roots = [j for j in range(1, k, 2) if math.gcd(j, 2 * k) == 1]
    prec = 64 + 8 * k
    with gmpy2.context(gmpy2.get_context(), precision=prec):
        pi = gmpy2.const_pi()
        poly = [mpfr(1)]
        for j in roots:
            r = 2 * gmpy2.cos(pi * j / k)
            nxt = [mpfr(0)] * (len(poly) + 1)
            for i, c in enumerate(poly):
                nxt[i + 1] += c
                nxt[i] -= r * c
            poly = nxt
        coeffs = [int(gmpy2.rint(c)) for c in poly]
    target = _dickson(k)
    target[0] += 2
    _, rem = _int_poly_divmod(target, coeffs)
    if any(rem):
        raise ArithmeticError(f"minimal polynomial construction failed for k={k}")
    return tuple(coeffs)


def check_index(k: int, k_max: int = K_MAX) -> int:
    if not isinstance(k, int) or isinstance(k, bool):
        raise TypeError("Hecke index must be an integer")
    if k < 3 or k > k_max:
        raise ValueError(f"Hecke index k={k} outside supported range 3..{k_max}")
    return k


class LambdaRing:
    """The ring Z[lambda_k]; one shared instance per k (see make_ring)."""

    def __init__(self, k: int):
        self.k = check_index(k)
        self.min_poly = minimal_polynomial(k)
        self.degree = len(self.min_poly) - 1
        d = self.degree
        # lambda^j for j = d .. 2d-2 reduced into the power basis
        self._reduction = []
        for j in range(d, 2 * d - 1):
            mono = [0] * j + [1]
            _, rem = _int_poly_divmod(mono, list(self.min_poly))
            self._reduction.append(tuple(rem + [0] * (d - len(rem))))
        self._powers_cache: dict[int, list[RealEnclosure]] = {}
        self.zero = LambdaInt(self, (0,) * d)
        self.one = self.from_int(1)
        self.lam = self.from_int(1) if d == 1 else LambdaInt(self, (0, 1) + (0,) * (d - 2))
        self.lambda_value = self.lambda_enclosure(128)

    @property
    def even(self) -> bool:
        return self.k % 2 == 0

    def __repr__(self):
        return f"LambdaRing(k={self.k})"

    def __reduce__(self):
        return (make_ring, (self.k,))

    def from_int(self, n: int) -> "LambdaInt":
        return LambdaInt(self, (int(n),) + (0,) * (self.degree - 1))

    def element(self, coeffs) -> "LambdaInt":
        coeffs = [int(c) for c in coeffs]
        if len(coeffs) > self.degree:
            coeffs = self._reduce(coeffs)
        return LambdaInt(self, tuple(coeffs) + (0,) * (self.degree - len(coeffs)))

    def _reduce(self, coeffs: list[int]) -> tuple[int, ...]:
        d = self.degree
        out = list(coeffs[:d]) + [0] * max(0, d - len(coeffs))
        for j in range(d, len(coeffs)):
            c = coeffs[j]
            if c:
                for i, r in enumerate(self._reduction[j - d]):
                    if r:
                        out[i] += c * r
        return tuple(out)

    def lambda_enclosure(self, prec: int) -> RealEnclosure:
        """Enclosure of lambda_k: one cached high-precision cos, widened by a safe margin."""
        if self.k == 3:
            return RealEnclosure(mpfr(1), mpfr(1), prec)
        val = self.lambda_mpfr(prec)
        eps = gmpy2.mul_2exp(mpfr(1), -(prec + 4))
        return RealEnclosure(down(prec).sub(val, eps), up(prec).add(val, eps), prec)

    def lambda_mpfr(self, prec: int) -> mpfr:
        """2cos(pi/k) with absolute error below 2^-(prec+24)."""
        cached = getattr(self, "_lam_cache", None)
        if cached is None or cached.precision < prec + 32:
            work = max(prec + 32, 2 * cached.precision if cached is not None else 0)
            with gmpy2.context(gmpy2.get_context(), precision=work + 8):
                val = 2 * gmpy2.cos(gmpy2.const_pi() / self.k)
            cached = self._lam_cache = near(work).plus(val)
        return cached

    def powers(self, prec: int) -> list[RealEnclosure]:
        """Enclosures of lambda^0 .. lambda^(d-1) at the given precision."""
        cached = self._powers_cache.get(prec)
        if cached is None:
            lam = self.lambda_enclosure(prec + 8)
            cached = [RealEnclosure(mpfr(1), mpfr(1), prec + 8)]
            for _ in range(1, self.degree):
                cached.append(cached[-1] * lam)
            if len(self._powers_cache) > 64:
                self._powers_cache.clear()
            self._powers_cache[prec] = cached
        return cached


@lru_cache(maxsize=None)
def make_ring(k: int) -> LambdaRing:
    return LambdaRing(k)


class LambdaInt:
    """Immutable element of Z[lambda_k] in canonical (reduced) form."""

    __slots__ = ("ring", "coeffs")

    def __init__(self, ring: LambdaRing, coeffs: tuple[int, ...]):
        self.ring = ring
        self.coeffs = coeffs

    def _check(self, other) -> "LambdaInt":
        if isinstance(other, int):
            return self.ring.from_int(other)
        if not isinstance(other, LambdaInt):
            return NotImplemented
        if other.ring is not self.ring:
            raise RingMismatchError(f"{self.ring} vs {other.ring}")
        return other

    def __add__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return LambdaInt(self.ring, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    __radd__ = __add__

    def __sub__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return LambdaInt(self.ring, tuple(a - b for a, b in zip(self.coeffs, other.coeffs)))

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return LambdaInt(self.ring, tuple(-a for a in self.coeffs))

    def __mul__(self, other):
        if isinstance(other, int):
            return LambdaInt(self.ring, tuple(a * other for a in self.coeffs))
        other = self._check(other)
        if other is NotImplemented:
            return other
        if self.ring.degree == 1:
            return LambdaInt(self.ring, (self.coeffs[0] * other.coeffs[0],))
        return LambdaInt(self.ring, self.ring._reduce(_int_poly_mul(list(self.coeffs), list(other.coeffs))))

    __rmul__ = __mul__

    def times_lambda(self) -> "LambdaInt":
        """Multiply by lambda (a shift plus one reduction)."""
        if self.ring.degree == 1:
            return self
        c = self.coeffs
        top = c[-1]
        shifted = [0] + list(c[:-1])
        if top:
            for i, r in enumerate(self.ring._reduction[0]):
                shifted[i] += top * r
        return LambdaInt(self.ring, tuple(shifted))

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def __bool__(self):
        return not self.is_zero()

    def __eq__(self, other):
        if isinstance(other, int):
            other = self.ring.from_int(other)
        if not isinstance(other, LambdaInt):
            return NotImplemented
        return self.ring is other.ring and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.ring.k, self.coeffs))

    def __repr__(self):
        return f"LambdaInt(k={self.ring.k}, {list(self.coeffs)})"

    def __str__(self):
        terms = []
        for i, c in enumerate(self.coeffs):
            if c == 0:
                continue
            mono = "" if i == 0 else ("L" if i == 1 else f"L^{i}")
            if not mono:
                terms.append(str(c))
            elif c == 1:
                terms.append(mono)
            elif c == -1:
                terms.append("-" + mono)
            else:
                terms.append(f"{c}*{mono}")
        return "+".join(terms).replace("+-", "-") if terms else "0"

    def max_bits(self) -> int:
        return max(abs(c).bit_length() for c in self.coeffs)

    def enclose(self, precision_bits: int) -> RealEnclosure:
        return enclose(self, precision_bits)

    def sign(self, cap: int = PRECISION_CAP) -> int:
        return sign(self, cap)

    def __float__(self):
        return enclose(self, 64).mid


def ring_arith(a: LambdaInt, b: LambdaInt | None, op: str) -> LambdaInt:
    if op == "neg":
        return -a
    if b is None:
        raise ValueError(f"operation {op!r} needs two operands")
    if a.ring is not b.ring:
        raise RingMismatchError(f"{a.ring} vs {b.ring}")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown operation {op!r}")


def enclose(a: LambdaInt, precision_bits: int) -> RealEnclosure:
    """Interval containing the real value of ``a``.

    The working precision is raised by the coefficient size, so the absolute
    width is about 2^-precision_bits times sum |c_i| lambda^i.
    """
    if precision_bits < 16:
        raise ValueError("precision_bits must be >= 16")
    coeffs = a.coeffs
    if not any(coeffs):
        return RealEnclosure(mpfr(0), mpfr(0), precision_bits)
    if a.ring.degree == 1:
        c = gmpy2.mpz(coeffs[0])
        p = max(precision_bits, c.bit_length())
        return RealEnclosure(down(p).plus(c), up(p).plus(c), p)
    wp = precision_bits + a.max_bits() + 8
    pows = a.ring.powers(wp)
    dn, uu = down(wp), up(wp)
    lo = mpfr(0)
    hi = mpfr(0)
    for c, pw in zip(coeffs, pows):
        if c == 0:
            continue
        z = gmpy2.mpz(c)
        if c > 0:
            lo = dn.add(lo, dn.mul(pw.lower, z))
            hi = uu.add(hi, uu.mul(pw.upper, z))
        else:
            lo = dn.add(lo, dn.mul(pw.upper, z))
            hi = uu.add(hi, uu.mul(pw.lower, z))
    return RealEnclosure(lo, hi, wp)


def sign(a: LambdaInt, cap: int = PRECISION_CAP) -> int:
    """Exact sign: zero symbolically, otherwise by precision doubling up to ``cap``."""
    coeffs = a.coeffs
    if not any(coeffs):
        return 0
    if a.ring.degree == 1:
        return 1 if coeffs[0] > 0 else -1
    prec = PRECISION_LADDER_START
    while prec <= cap:
        s = enclose(a, prec).sign()
        if s:
            return s
        prec *= 2
    raise PrecisionCapError(f"sign of {a!r} undecided at {cap} bits")


def approx_log2(a: LambdaInt) -> float:
    """log2 |a| to a few digits (a must be nonzero)."""
    s = sign(a)
    e = enclose(a, 64)
    v = e.upper if s > 0 else up(64).minus(e.lower)
    return float(gmpy2.log2(v))
