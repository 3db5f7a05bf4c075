"""Acceptance criteria at their stated sizes and tolerances, with fixed seeds.

Each test records one PASS/FAIL line (shown in the terminal summary).
The full module takes several minutes on one core.
"""

import json
import math
import random
from fractions import Fraction

import pytest

from rosencf import cli
from rosencf.cf import alpha_family, convergent_error_bounds, BoundsReport, expand, rosen
from rosencf.hecke import EnumConfig, count_solutions, enumerate_points
from rosencf.lab import (
    BASE_BITS,
    ConstantsTarget,
    bjw_F,
    bjw_check,
    counting_experiment,
    legendre_scan,
    lenstra_breakpoint,
    sample_point,
    sample_seed,
    seed_precision,
    theta_cdf,
)
from rosencf.moebius import MoebiusMatrix
from rosencf.ring import K_MAX, make_ring, sign

pytestmark = pytest.mark.slow


def run_cli(tmp_path, argv):
    out = tmp_path / "run.csv"
    code = cli.run(argv + ["--output", str(out)])
    manifest = json.loads((tmp_path / "run.manifest.json").read_text())
    return code, manifest


# --- 1, 2: entropy ------------------------------------------------------------------------


@pytest.mark.parametrize("k, number", [(3, 1), (4, 2)])
def test_entropy(k, number, tmp_path, verdict, capsys):
    code, man = run_cli(tmp_path, ["entropy", "--k", str(k), "--samples", "200", "--iters", "20000", "--seed", "7"])
    capsys.readouterr()
    s = man["summary"]
    target = ConstantsTarget.for_k(k).entropy_target
    rel = abs(s["h_hat"] - target) / target
    verdict(f"criterion {number} (entropy k={k})", code == 0 and rel < 0.01,
            f"h_hat={s['h_hat']:.5f} +- {s['stderr']:.5f}, target {target:.5f}, rel err {rel:.2%} (tol 1%)")


# --- 3: Lenstra breakpoint --------------------------------------------------------------------


def test_lenstra_breakpoint(verdict):
    parts, ok = [], True
    for k in (4, 3):
        cdf = theta_cdf(k, 1000, 1000, 1)
        bp = lenstra_breakpoint(cdf)
        target = ConstantsTarget.for_k(k).lenstra_target
        err = abs(bp.t_star - target)
        ok &= cdf.sample_count == 10 ** 6 and cdf.valid and err < 0.02
        parts.append(f"k={k} t*={bp.t_star:.4f} target {target:.5f} |err|={err:.4f}")
    verdict("criterion 3 (Lenstra breakpoint)", ok, "; ".join(parts) + " (tol 0.02)")


# --- 4: regular CF distribution ---------------------------------------------------------------


def test_bjw_distribution(verdict):
    table = bjw_check(1000, 1000, 1)
    dev = table.max_deviation
    # spot values of the closed form; 0.75 uses 1 - t + ln(2t) over ln 2 (= 0.945636)
    f25, f75 = bjw_F(0.25), bjw_F(0.75)
    spots = abs(f25 - 0.36067) < 5e-6 and abs(f75 - 0.945636) < 5e-7
    emp75 = table.cdf.mass_at(0.75)
    ok = table.cdf.sample_count == 10 ** 6 and dev < 0.005 and spots and abs(emp75 - f75) < 0.005
    verdict("criterion 4 (regular CF distribution)", ok,
            f"max dev {dev:.5f} (tol 0.005); F(0.25)={f25:.6f}, F(0.75)={f75:.6f}, empirical at 0.75 {emp75:.5f}")


# --- 5: counting law ---------------------------------------------------------------------------


def brute_count(x: Fraction, t: Fraction, N: int) -> int:
    c = 0
    for q in range(1, N + 1):
        base = math.floor(x * q)
        for p in range(base - 2, base + 3):
            if math.gcd(p, q) == 1 and abs(x - Fraction(p, q)) < t / q ** 2:
                c += 1
    return c


def test_counting_law(verdict):
    ts = [Fraction(1, 10), Fraction(1, 4), Fraction(2, 5)]
    # exact agreement with the brute-force count for small N
    fam = rosen(3)
    mismatches = 0
    for i in range(50):
        x = sample_point(fam, BASE_BITS, sample_seed(1, i))
        X, D = (int(v) for v in x.as_integer_ratio())
        rep = count_solutions(x, ts, [10, 23, 50], 3)
        xf = Fraction(X, D)
        mismatches += sum(rep.counts[(float(t), N)] != brute_count(xf, t, N) for t in ts for N in (10, 23, 50))
    summ = counting_experiment(3, ts, [10 ** 4], 50, 1)
    parts, ok = [], mismatches == 0 and summ.undecided() == 0
    for t in ts:
        slope = summ.mean_slope(t, 10 ** 4)
        target = 12 * float(t) / math.pi ** 2
        rel = abs(slope - target) / target
        ok &= rel < 0.15
        parts.append(f"t={float(t)} count/lnN={slope:.4f} target {target:.4f} rel err {rel:.1%}")
    verdict("criterion 5 (counting law)", ok,
            "; ".join(parts) + f" (tol 15%); brute-force mismatches at N<=50: {mismatches}")


# --- 6: Legendre constant equals Lenstra constant ------------------------------------------------


def test_legendre_equals_lenstra(verdict):
    parts, ok = [], True
    for k in (3, 4):
        target = ConstantsTarget.for_k(k).lenstra_target
        below = legendre_scan(k, [0.9 * target], 200, 1000, 1)
        above = legendre_scan(k, [1.15 * target], 200, 1000, 1, "large_digit")
        n_below = below.violations[0.9 * target]
        n_above = above.violations[1.15 * target]
        ok &= n_below == 0 and n_above >= 1 and above.replayed and below.skipped == 0
        parts.append(f"k={k}: {n_below} at 0.9*target, {n_above} replayed at 1.15*target")
    verdict("criterion 6 (Legendre = Lenstra)", ok, "; ".join(parts))


# --- 7: two-sided convergent bounds ------------------------------------------------------------------


def test_convergent_bounds(verdict):
    report = BoundsReport()
    n = 40
    for i in range(10 ** 4):
        k = 3 + i % 10
        fam = rosen(k)
        e = expand(sample_point(fam, seed_precision(n), sample_seed(4, i)), fam, n)
        convergent_error_bounds(e, report)
    ok = report.ok and report.checked >= 10 ** 4 * (n - 1)
    verdict("criterion 7 (two-sided convergent bounds)", ok,
            f"{report.checked} inequalities checked, {len(report.violations)} violations, "
            f"{len(report.undecided)} undecided")


# --- 8: exactness ---------------------------------------------------------------------------------


def _random_element(ring, rng):
    return ring.element([rng.randint(-50, 50) for _ in range(ring.degree)])


def test_exactness(verdict):
    rng = random.Random(8)
    failures = {}

    def fail(name):
        failures[name] = failures.get(name, 0) + 1

    # ring axioms
    for k in range(3, K_MAX + 1):
        ring = make_ring(k)
        for _ in range(50):
            a, b, c = (_random_element(ring, rng) for _ in range(3))
            if (a + b) + c != a + (b + c) or (a * b) * c != a * (b * c) or a * b != b * a:
                fail("axioms")
            if a * (b + c) != a * b + a * c or a + ring.zero != a or a * ring.one != a or a - a != ring.zero:
                fail("axioms")

    # |det| = 1 on every convergent matrix and q_n > 0
    for i in range(500):
        k = 3 + i % 10
        fam = rosen(k)
        e = expand(sample_point(fam, seed_precision(40), sample_seed(8, i)), fam, 40)
        conv = e.convergents
        for (p1, q1), (p, q) in zip(conv, conv[1:]):
            det = MoebiusMatrix(p1, p, q1, q).det()
            if det != 1 and det != -1:
                fail("det")
        if any(sign(q) != 1 for _, q in conv[1:]):
            fail("q_n > 0")

    # round trip: finite expansions of exact points end on the point itself
    for _ in range(1000):
        q = rng.randint(1, 10 ** 6)
        x = Fraction(rng.randint(-q // 2, (q - 1) // 2), q)
        e = expand(x, 3, 200)
        p_n, q_n = e.convergents[-1]
        if not e.terminated or Fraction(p_n.coeffs[0], q_n.coeffs[0]) != x:
            fail("round trip")
    for k in (4, 5, 7, 10):
        ring = make_ring(k)
        lam = 2 * math.cos(math.pi / k)
        for pt in enumerate_points(EnumConfig(k, 25, (Fraction(-1), Fraction(1)))).points:
            p, q = pt.point.p, pt.point.q
            m = math.floor(float(pt.point) / lam + 0.5)
            num = p - ring.lam * m * q
            try:
                e = expand((num, q), k, 500)
            except ValueError:
                continue        # shifted point is the excluded right end of the domain
            p_n, q_n = e.convergents[-1]
            if not e.terminated or p_n != num or q_n != q:
                fail("round trip")

    # alpha = 1/2 against Rosen k = 3 on 10^3 seeds x 30 steps
    half = alpha_family(Fraction(1, 2))
    for i in range(1000):
        x = sample_point(rosen(3), seed_precision(30), sample_seed(88, i))
        if expand(x, half, 30).digits != expand(x, 3, 30).digits:
            fail("alpha=1/2")
    verdict("criterion 8 (exactness)", not failures, f"failures {failures or 'none'}")
