"""2x2 matrices over Z[lambda_k], parabolic points and convergent recurrences."""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction

from .ring import (
    as_mpfr,
    PRECISION_CAP,
    LambdaInt,
    LambdaRing,
    PrecisionCapError,
    RealEnclosure,
    RingMismatchError,
    enclose,
    sign,
)

# determinant assertion on every compose; disable with ROSENCF_CHECK_DET=0
CHECK_DET = os.environ.get("ROSENCF_CHECK_DET", "1") != "0"


@dataclass(frozen=True)
class MoebiusMatrix:
    a: LambdaInt
    b: LambdaInt
    c: LambdaInt
    d: LambdaInt

    @property
    def ring(self) -> LambdaRing:
        return self.a.ring

    @classmethod
    def identity(cls, ring: LambdaRing) -> "MoebiusMatrix":
        return cls(ring.one, ring.zero, ring.zero, ring.one)

    def det(self) -> LambdaInt:
        return self.a * self.d - self.b * self.c

    def __matmul__(self, other: "MoebiusMatrix") -> "MoebiusMatrix":
        return compose(self, other)

    def __neg__(self) -> "MoebiusMatrix":
        return MoebiusMatrix(-self.a, -self.b, -self.c, -self.d)

    def inverse(self) -> "MoebiusMatrix":
        """Adjugate divided by the determinant (which is +1 or -1)."""
        det = self.det()
        if det == 1:
            return MoebiusMatrix(self.d, -self.b, -self.c, self.a)
        if det == -1:
            return MoebiusMatrix(-self.d, self.b, self.c, -self.a)
        raise ArithmeticError("matrix is not invertible over Z[lambda]")

    def entries(self) -> tuple[LambdaInt, LambdaInt, LambdaInt, LambdaInt]:
        return self.a, self.b, self.c, self.d


def compose(g: MoebiusMatrix, h: MoebiusMatrix) -> MoebiusMatrix:
    if g.ring is not h.ring:
        raise RingMismatchError(f"{g.ring} vs {h.ring}")
    out = MoebiusMatrix(
        g.a * h.a + g.b * h.c,
        g.a * h.b + g.b * h.d,
        g.c * h.a + g.d * h.c,
        g.c * h.b + g.d * h.d,
    )
    if CHECK_DET:
        det = out.det()
        if det != 1 and det != -1:
            raise ArithmeticError(f"determinant drifted to {det}")
    return out


def generators(ring: LambdaRing) -> tuple[MoebiusMatrix, MoebiusMatrix]:
    """S_gen = [[0,1],[-1,0]] and T_gen = [[1,lambda],[0,1]]."""
    z, o = ring.zero, ring.one
    s_gen = MoebiusMatrix(z, o, -o, z)
    t_gen = MoebiusMatrix(o, ring.lam, z, o)
    return s_gen, t_gen


def t_power(ring: LambdaRing, m: int) -> MoebiusMatrix:
    return MoebiusMatrix(ring.one, ring.lam * m, ring.zero, ring.one)


def digit_matrix(ring: LambdaRing, eps: int, b: int) -> MoebiusMatrix:
    """[[0, eps], [1, b*lambda]]; determinant -eps."""
    return MoebiusMatrix(ring.zero, ring.from_int(eps), ring.one, ring.lam * b)


@dataclass(frozen=True)
class ParabolicPoint:
    """g(infinity) = p/q normalised to q > 0; ``p is None`` encodes infinity."""

    p: LambdaInt | None
    q: LambdaInt | None

    @classmethod
    def infinity(cls) -> "ParabolicPoint":
        return cls(None, None)

    @classmethod
    def from_pair(cls, p: LambdaInt, q: LambdaInt) -> "ParabolicPoint":
        s = sign(q)
        if s == 0:
            return cls.infinity()
        return cls(p, q) if s > 0 else cls(-p, -q)

    @property
    def is_infinity(self) -> bool:
        return self.p is None

    def key(self) -> tuple:
        if self.p is None:
            return ("inf",)
        return (self.p.coeffs, self.q.coeffs)

    def __eq__(self, other):
        if not isinstance(other, ParabolicPoint):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def value(self, prec: int = 64) -> RealEnclosure:
        if self.p is None:
            raise ValueError("infinity has no real value")
        return enclose(self.p, prec) / enclose(self.q, prec)

    def __float__(self):
        return self.value(64).mid

    def __str__(self):
        if self.p is None:
            return "inf"
        return f"{_wrap(str(self.p))}/{_wrap(str(self.q), den=True)}"


def _wrap(s: str, den: bool = False) -> str:
    compound = "+" in s or "-" in s[1:] or (den and "*" in s)
    return f"({s})" if compound else s


def act_on_infinity(g: MoebiusMatrix) -> ParabolicPoint:
    return ParabolicPoint.from_pair(g.a, g.c)


def _as_enclosure(x, prec: int) -> RealEnclosure:
    if isinstance(x, RealEnclosure):
        return x
    if isinstance(x, (int, Fraction)):
        return RealEnclosure.exact(x, prec)
    return RealEnclosure.exact(as_mpfr(x), prec)


def moebius_apply(g: MoebiusMatrix, x, precision_bits: int = 128, cap: int = PRECISION_CAP) -> RealEnclosure:
    """(a x + b) / (c x + d) as a rigorous enclosure.

    ``x`` is an enclosure, an exact scalar (int, Fraction, mpfr) or a float.
    Precision is doubled while the denominator enclosure straddles zero.
    """
    extra = max(e.max_bits() for e in g.entries())
    prec = precision_bits
    while True:
        xe = _as_enclosure(x, prec + extra)
        a, b, c, d = (enclose(e, prec) for e in g.entries())
        den = c * xe + d
        if not den.contains_zero():
            return (a * xe + b) / den
        if isinstance(x, RealEnclosure) or prec > cap:
            raise PrecisionCapError("denominator indistinguishable from zero")
        prec *= 2


def convergent_chain(digits, ring: LambdaRing) -> list[tuple[LambdaInt, LambdaInt]]:
    """Exact (p_n, q_n), n = 0..len(digits), from the product of [[0, eps],[1, b lambda]].

    Digits are (eps, b) pairs with the digit value b * lambda.
    """
    p_prev, p = ring.one, ring.zero
    q_prev, q = ring.zero, ring.one
    out = [(p, q)]
    for eps, b in digits:
        a = ring.lam * b
        p_prev, p = p, (a * p + p_prev if eps > 0 else a * p - p_prev)
        q_prev, q = q, (a * q + q_prev if eps > 0 else a * q - q_prev)
        out.append((p, q))
    return out


def convergent_matrix(digits, ring: LambdaRing) -> MoebiusMatrix:
    """[[p_{n-1}, p_n], [q_{n-1}, q_n]] without materialising intermediate convergents."""
    p_prev, p = ring.one, ring.zero
    q_prev, q = ring.zero, ring.one
    for eps, b in digits:
        a = ring.lam * b
        p_prev, p = p, (a * p + p_prev if eps > 0 else a * p - p_prev)
        q_prev, q = q, (a * q + q_prev if eps > 0 else a * q - q_prev)
    return MoebiusMatrix(p_prev, p, q_prev, q)


def times_convergent(m: MoebiusMatrix, block: MoebiusMatrix) -> MoebiusMatrix:
    """Right multiplication used to chain digit blocks (no determinant check)."""
    return MoebiusMatrix(
        m.a * block.a + m.b * block.c,
        m.a * block.b + m.b * block.d,
        m.c * block.a + m.d * block.c,
        m.c * block.b + m.d * block.d,
    )
