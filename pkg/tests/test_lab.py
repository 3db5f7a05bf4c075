import math
from fractions import Fraction

import numpy as np
import pytest

from rosencf.cf import expand, rosen
from rosencf.lab import (
    ConstantsTarget,
    EmpiricalCdf,
    bjw_F,
    bjw_check,
    counting_experiment,
    default_t_grid,
    entropy_estimate,
    legendre_scan,
    lenstra_breakpoint,
    parallel_map,
    large_digit_point,
    replay_witness,
    rosen_r,
    sample_point,
    sample_seed,
    splitmix64,
    theta_cdf,
)

PHI = (1 + math.sqrt(5)) / 2


# --- targets -------------------------------------------------------------------------


def test_targets_odd_and_even():
    t3 = ConstantsTarget.for_k(3)
    assert t3.lam == 1.0
    assert t3.R == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-15)
    assert t3.lenstra_target == pytest.approx((3 - math.sqrt(5)) / 2, abs=1e-15)
    assert t3.entropy_target == pytest.approx(math.pi ** 2 / (6 * math.log(PHI)), rel=1e-14)
    assert t3.entropy_target == pytest.approx(3.4181, abs=5e-4)
    assert t3.cdf_slope == pytest.approx(1 / math.log(PHI), rel=1e-14)
    assert t3.cdf_slope == pytest.approx(2.0781, abs=1e-4)
    t4 = ConstantsTarget.for_k(4)
    assert t4.lenstra_target == pytest.approx(math.sqrt(2) - 1, abs=1e-15)
    assert t4.entropy_target == pytest.approx(math.pi ** 2 / (4 * math.log(1 + math.sqrt(2))), rel=1e-14)
    assert t4.entropy_target == pytest.approx(2.7995, abs=5e-4)
    assert t3.theorem1_slope(0.25) == pytest.approx(12 * 0.25 / math.pi ** 2)


@pytest.mark.parametrize("k", range(3, 21))
def test_targets_positive_and_r_is_root(k):
    t = ConstantsTarget.for_k(k)
    for v in (t.C, t.lenstra_target, t.entropy_target):
        assert 0 < v < math.inf
    R = rosen_r(t.lam)
    assert R > 0 and abs(R * R + (2 - t.lam) * R - 1) < 1e-14


def test_regular_targets():
    reg = ConstantsTarget.regular()
    assert reg.lenstra_target == 0.5
    assert reg.entropy_target == pytest.approx(math.pi ** 2 / (6 * math.log(2)))


def test_bjw_closed_form():
    assert bjw_F(0.25) == pytest.approx(0.25 / math.log(2))
    assert bjw_F(0.25) == pytest.approx(0.36067, abs=1e-5)
    assert bjw_F(0.75) == pytest.approx((0.25 + math.log(1.5)) / math.log(2), rel=1e-15)
    assert bjw_F(0.75) == pytest.approx(0.945636, abs=1e-6)
    assert bjw_F(1.0) == pytest.approx(1.0)
    assert bjw_F(0.5) == pytest.approx(0.5 / math.log(2))
    assert bjw_F(0.0) == 0.0 and bjw_F(1.5) == 1.0


# --- seeds -------------------------------------------------------------------------------


def test_splitmix64_reference_values():
    # first outputs of the reference SplitMix64 generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


def test_sample_seeds_distinct_and_stable():
    seeds = [sample_seed(7, i) for i in range(10000)]
    assert len(set(seeds)) == len(seeds)
    assert sample_seed(7, 3) == seeds[3]


@pytest.mark.parametrize("k", [3, 4, 9])
def test_sample_points_lie_in_domain(k):
    fam = rosen(k)
    lam = 2 * math.cos(math.pi / k)
    xs = [sample_point(fam, 200, sample_seed(1, i)) for i in range(200)]
    assert all(-lam / 2 <= float(x) < lam / 2 for x in xs)
    assert all(x.precision >= 200 for x in xs)
    assert np.mean([float(x) for x in xs]) == pytest.approx(0, abs=0.15 * lam)


@pytest.mark.parametrize("k", [3, 4])
def test_large_digit_points_start_with_a_large_digit(k):
    fam = rosen(k)
    for i in range(30):
        x = large_digit_point(fam, 300, sample_seed(2, i), (3, 12))
        e = expand(x, fam, 3)
        eps, b = e.digits[0]
        assert eps == 1 and 3 <= b <= 12


def _square(v):
    return v * v


def test_parallel_map_is_order_preserving():
    assert parallel_map(_square, range(9), workers=2) == [v * v for v in range(9)]


def test_theta_cdf_worker_independent():
    a = theta_cdf(4, 6, 50, 3, workers=1)
    b = theta_cdf(4, 6, 50, 3, workers=2)
    assert np.array_equal(a.mass, b.mass)
    assert np.array_equal(a.values, b.values)


# --- Theta distribution --------------------------------------------------------------------


def test_theta_cdf_shape():
    cdf = theta_cdf(5, 40, 200, 1)
    assert cdf.sample_count == 40 * 200
    assert np.all(np.diff(cdf.mass) >= 0)
    assert 0 <= cdf.mass[0] and cdf.mass[-1] <= 1
    assert cdf.mass_at(float(cdf.values.max()) + 1e-12) == 1.0
    assert cdf.valid
    with pytest.raises(ValueError):
        theta_cdf(5, 0, 10, 1)


def test_breakpoint_on_synthetic_cdf():
    t = default_t_grid()
    m = np.where(t <= 0.4, 2 * t, 0.8 + 2 * (t - 0.4) - 1.5 * (t - 0.4) ** 2)
    bp = lenstra_breakpoint(EmpiricalCdf(t, m, 10 ** 9, "synthetic"))
    assert bp.t_star == pytest.approx(0.4, abs=0.005)
    assert bp.slope == pytest.approx(2.0, rel=1e-6)


def test_breakpoint_without_linear_regime():
    t = default_t_grid()
    with pytest.raises(ValueError):
        lenstra_breakpoint(EmpiricalCdf(t, t ** 2, 10 ** 9, "synthetic"))


def test_slope_and_entropy_are_consistent_with_counting_law():
    # (1/n) #{Theta_j < t} ~ slope t and ln q_n ~ n h / 2, so count / ln N ~ slope t / (h / 2)
    tg = ConstantsTarget.for_k(3)
    cdf = theta_cdf(3, 200, 500, 5)
    t = np.asarray(cdf.t_grid)
    sel = t <= 0.9 * tg.lenstra_target
    slope = float(np.dot(t[sel], cdf.mass[sel]) / np.dot(t[sel], t[sel]))
    assert slope == pytest.approx(tg.cdf_slope, rel=0.03)
    h = entropy_estimate(3, 50, 1000, 5).h_hat
    assert slope / (h / 2) == pytest.approx(tg.theorem1_slope(1.0), rel=0.10)


# --- entropy ---------------------------------------------------------------------------------


def test_entropy_consistency_in_n_and_samples():
    a = entropy_estimate(4, 40, 500, 9)
    b = entropy_estimate(4, 40, 1000, 9)
    assert abs(a.h_hat - b.h_hat) < 3 * math.hypot(a.stderr, b.stderr)
    c = entropy_estimate(4, 160, 500, 9)
    assert 1.4 < a.stderr / c.stderr < 2.8     # four times the samples, about half the error
    assert a.valid and a.failures == 0
    with pytest.raises(ValueError):
        entropy_estimate(4, 10, 0, 9)


def test_bjw_small_run_within_dkw_band():
    table = bjw_check(100, 200, 4)
    assert table.max_deviation < 3 / math.sqrt(table.cdf.sample_count)


# --- Legendre scan -----------------------------------------------------------------------------


def test_legendre_zero_c_is_vacuous():
    rep = legendre_scan(3, [0.0], 200, 5, 1)
    assert rep.violations == {0.0: 0}


def test_legendre_below_and_above_the_constant():
    rep = legendre_scan(3, [0.30, 0.45], 200, 200, 5, "large_digit")
    assert rep.violations[0.30] == 0
    assert rep.violations[0.45] >= 1
    assert rep.replayed
    w = rep.witnesses[0.45][0]
    assert 0.30 <= w.theta < 0.45
    assert replay_witness(rosen(3), w.x, w.point, 0.45, 200)
    assert not replay_witness(rosen(3), w.x, w.point, w.theta * 0.999, 200)


def test_legendre_violations_monotone_in_c():
    cs = [0.3, 0.4, 0.45, 0.5]
    rep = legendre_scan(4, cs[:3], 100, 60, 2, "large_digit")
    vals = [rep.violations[c] for c in cs[:3]]
    assert vals == sorted(vals)
    with pytest.raises(ValueError):
        legendre_scan(4, cs, 100, 1, 2, "bogus")


def test_uniform_seeds_below_constant_have_only_convergents():
    # every solution with c below the constant is a convergent
    tg = ConstantsTarget.for_k(5)
    rep = legendre_scan(5, [0.9 * tg.lenstra_target], 150, 60, 8)
    assert rep.violations[0.9 * tg.lenstra_target] == 0


# --- counting ---------------------------------------------------------------------------------


def test_counting_experiment_smoke():
    summ = counting_experiment(3, [Fraction(1, 4)], [100, 1000], 5, 1)
    assert len(summ.reports) == 5
    assert summ.mean_count(0.25, 100) <= summ.mean_count(0.25, 1000)
    assert summ.mean_slope(0.25, 1000) > 0
    assert summ.undecided() == 0
