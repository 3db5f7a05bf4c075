from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rosencf.moebius import (
    MoebiusMatrix,
    ParabolicPoint,
    act_on_infinity,
    compose,
    convergent_chain,
    convergent_matrix,
    digit_matrix,
    generators,
    moebius_apply,
)
from rosencf.ring import RingMismatchError, make_ring, sign


@pytest.fixture(autouse=True, scope="module")
def _mp_precision():
    with mpmath.workdps(60):
        yield


def as_mp(a):
    lam = 2 * mpmath.cos(mpmath.pi / a.ring.k)
    return sum(c * lam ** i for i, c in enumerate(a.coeffs))


def mp_matrix(g):
    return mpmath.matrix([[as_mp(g.a), as_mp(g.b)], [as_mp(g.c), as_mp(g.d)]])


@st.composite
def words_with_oracle(draw, k_values=(3, 4, 5, 7, 10)):
    """A random word in S, T and T^-1, exact and as a 60-digit float product."""
    k = draw(st.sampled_from(k_values))
    ring = make_ring(k)
    lam = 2 * mpmath.cos(mpmath.pi / k)
    s_gen, t_gen = generators(ring)
    exact = {"S": s_gen, "T": t_gen, "U": t_gen.inverse()}
    approx = {"S": mpmath.matrix([[0, 1], [-1, 0]]), "T": mpmath.matrix([[1, lam], [0, 1]]),
              "U": mpmath.matrix([[1, -lam], [0, 1]])}
    g, m = MoebiusMatrix.identity(ring), mpmath.eye(2)
    for letter in draw(st.lists(st.sampled_from("STU"), max_size=25)):
        g, m = g @ exact[letter], m * approx[letter]
    return g, m


def words():
    return words_with_oracle().map(lambda gm: gm[0])


def test_identity_and_s_squared():
    ring = make_ring(3)
    s_gen, t_gen = generators(ring)
    ident = MoebiusMatrix.identity(ring)
    assert t_gen @ ident == t_gen
    assert s_gen @ s_gen == -ident


def test_generators_have_unit_determinant():
    for k in (3, 4, 5, 12):
        for g in generators(make_ring(k)):
            assert g.det() == 1


def test_compose_ring_mismatch():
    with pytest.raises(RingMismatchError):
        compose(generators(make_ring(4))[0], generators(make_ring(5))[0])


@settings(max_examples=100)
@given(words(), words())
def test_determinant_multiplicative(g, h):
    if g.ring is not h.ring:
        return
    assert (g @ h).det() == g.det() * h.det()
    assert g.det() == 1


@settings(max_examples=100)
@given(words_with_oracle())
def test_product_matches_float_oracle(gm):
    g, m = gm
    assert mpmath.mnorm(mp_matrix(g) - m, 1) < mpmath.mpf(10) ** -30 * (1 + mpmath.mnorm(m, 1))
    assert g @ g.inverse() == MoebiusMatrix.identity(g.ring)


def test_act_on_infinity_examples():
    ring4 = make_ring(4)
    s_gen, t_gen = generators(ring4)
    assert act_on_infinity(t_gen).is_infinity
    pt = act_on_infinity(s_gen)
    assert pt.p.is_zero() and pt.q == 1
    pt = act_on_infinity(t_gen @ s_gen)
    assert pt.p == ring4.lam and pt.q == 1


@settings(max_examples=100)
@given(words())
def test_normalisation_is_sign_invariant(g):
    a, b = act_on_infinity(g), act_on_infinity(-g)
    assert a == b and hash(a) == hash(b)
    if not a.is_infinity:
        assert sign(a.q) == 1


def test_moebius_apply_examples():
    ring = make_ring(3)
    s_gen, t_gen = generators(ring)
    ident = MoebiusMatrix.identity(ring)
    assert moebius_apply(ident, Fraction(37, 100)).contains(Fraction(37, 100))
    out = moebius_apply(s_gen, 2)
    assert out.lower == out.upper == -0.5
    out = moebius_apply(t_gen, 0.25)
    assert out.lower == out.upper == 1.25


@settings(max_examples=100)
@given(words(), words(), st.fractions(min_value=-3, max_value=3, max_denominator=10 ** 6))
def test_apply_respects_composition(g, h, x):
    if g.ring is not h.ring:
        return
    try:
        inner = moebius_apply(h, x, 256)
        lhs = moebius_apply(g, inner, 256)
    except ArithmeticError:
        return      # x sits at a pole of h, or g(h(x)) is near a pole
    rhs = moebius_apply(g @ h, x, 256)
    assert lhs.lower <= rhs.upper and rhs.lower <= lhs.upper


def test_convergent_chain_examples():
    ring = make_ring(3)
    assert convergent_chain([], ring) == [(ring.zero, ring.one)]
    chain = convergent_chain([(1, 3), (-1, 2)], ring)
    assert [(int(p.coeffs[0]), int(q.coeffs[0])) for p, q in chain] == [(0, 1), (1, 3), (2, 5)]
    for eps, b in [(1, 3), (-1, 4)]:
        (p1, q1) = convergent_chain([(eps, b)], ring)[1]
        assert p1 == eps and q1 == b


@st.composite
def digit_lists(draw):
    k = draw(st.sampled_from((3, 4, 5, 6, 9)))
    ring = make_ring(k)
    b_min = 2 if k == 3 else 1
    digits = draw(st.lists(st.tuples(st.sampled_from((-1, 1)), st.integers(b_min, 40)), max_size=30))
    return ring, digits


@settings(max_examples=100)
@given(digit_lists())
def test_convergent_matrix_is_digit_product(rd):
    ring, digits = rd
    m = MoebiusMatrix.identity(ring)
    for eps, b in digits:
        m = m @ digit_matrix(ring, eps, b)
    assert convergent_matrix(digits, ring) == m
    chain = convergent_chain(digits, ring)
    assert (m.b, m.d) == chain[-1]
    assert m.det() in (ring.one, -ring.one)


def test_parabolic_point_str():
    ring = make_ring(4)
    assert str(ParabolicPoint.from_pair(ring.from_int(-1), ring.lam * 3)) == "-1/(3*L)"
    assert str(ParabolicPoint.from_pair(ring.lam + 1, -ring.from_int(5))) == "(-1-L)/5"
    assert str(ParabolicPoint.infinity()) == "inf"
