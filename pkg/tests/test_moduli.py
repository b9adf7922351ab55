import csv
import math

import numpy as np
import pytest
from scipy.integrate import quad

from ssqg.errors import CertificationError, DomainError
from ssqg.moduli import (ClampedLinearModulus, LinearModulus, ModulusFamily,
                         check_modulus_axioms, default_constants, export_csv,
                         find_B_for_data, fit_criterion, tail_integral)
from ssqg.symbols import Symbol, eval_m, find_r0, g_of_delta

from oracles import FamilyOracle

ONE = Symbol()
HALF = Symbol("loglog-power", 0.5)
A_ONE = 64.0 / math.pi  # the kernel estimate for m = 1


@pytest.fixture(scope="module")
def small():
    return ModulusFamily(ONE, 1.0, 1e-3, 1e-4)


@pytest.fixture(scope="module")
def half():
    return ModulusFamily.auto(HALF, 20.0)


def test_slopes_at_origin_and_branch_point(small, half):
    for fam in (small, half):
        for B in (1.0, 37.0, 1e6):
            inst = fam.instance(B)
            assert inst.omega_prime(inst.delta * 1e-200) == pytest.approx(B, rel=1e-12)
            assert inst.left_slope_at_delta() == pytest.approx(B / 2, rel=1e-12)
            assert inst.right_slope_at_delta() == pytest.approx(fam.gamma * B / (4 * fam.kappa),
                                                                rel=1e-12)


def test_omega_prime_left_continuous(small):
    inst = small.instance(10.0)
    assert inst.omega_prime(inst.delta) == inst.left_slope_at_delta()
    assert inst.omega_prime_right(inst.delta * (1 + 1e-14)) == pytest.approx(
        inst.right_slope_at_delta(), rel=1e-12)


def test_delta_relation(half):
    for B in (1.0, 10.0, 1e3, 1e6):
        inst = half.instance(B)
        assert abs(B * g_of_delta(HALF, inst.delta) - half.kappa) / half.kappa <= 1e-10
        assert inst.delta <= half.instance(1.0).delta


@pytest.mark.parametrize("beta", [0.0, 0.5])
def test_omega_against_mpmath(beta):
    sym = Symbol("loglog-power", beta) if beta else ONE
    fam = ModulusFamily.auto(sym, 20.0)
    inst = fam.instance(10.0)
    o = FamilyOracle(beta, 10.0, fam.kappa, fam.gamma, inst.delta)
    for r in (1e-9, 1e-4, 0.1, 0.5, 1.0, 1.5, 10.0, 1e4, 1e9):
        x = r * inst.delta
        assert inst.omega(x) == pytest.approx(float(o.omega(x)), rel=1e-13)


def test_omega_constant_one_closed_form(small):
    # omega(x) = B x - c x^2 (9/4 + ln(delta/x)/2), c = B^2/(8 kappa)
    inst = small.instance(3.0)
    c = 9.0 / (8 * 1e-3)
    for r in (1e-6, 0.01, 0.3, 1.0):
        x = r * inst.delta
        want = 3.0 * x - c * x * x * (2.25 + 0.5 * math.log(inst.delta / x))
        assert inst.omega(x) == pytest.approx(want, rel=1e-14)


def test_omega_at_delta_range(small, half):
    for fam in (small, half):
        for B in (1.0, 1e3):
            inst = fam.instance(B)
            assert B * inst.delta / 2 <= inst.omega_at_delta <= B * inst.delta


def test_right_branch_closed_form(half):
    inst = half.instance(100.0)
    d = inst.delta
    want = (half.gamma / eval_m(HALF, 1 / d)) * math.log((4 + math.log(4)) / 4)
    assert inst.omega(4 * d) - inst.omega(d) == pytest.approx(want, rel=1e-12)
    q, _ = quad(inst.omega_prime, d, 4 * d, epsabs=1e-16, epsrel=1e-13)
    assert abs(q - want) <= 1e-10


def test_right_branch_matches_quadrature_at_random_points(half):
    inst = half.instance(10.0)
    d = inst.delta
    rng = np.random.default_rng(5)
    for lr in rng.uniform(0, 8, 50):
        x = d * 10 ** lr
        q, _ = quad(lambda u: inst.omega_prime(d * math.exp(u)) * d * math.exp(u),
                    0.0, math.log(x / d), epsabs=1e-15, epsrel=1e-13)
        assert abs(inst.omega(x) - inst.omega_at_delta - q) <= 1e-10


def test_unbounded_growth(small):
    inst = small.instance(2.0)
    vals = [inst.omega(10.0 ** k * inst.delta) for k in range(1, 13)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    # increments follow (gamma/m) ln((4 + ln(x/delta))/4)
    want = small.gamma * math.log((4 + 12 * math.log(10)) / (4 + math.log(10)))
    assert vals[-1] - vals[0] == pytest.approx(want, rel=1e-12)


def test_omega_second_constant_one(small):
    inst = small.instance(5.0)
    for r in (1e-8, 1e-3, 0.5, 0.99):
        x = r * inst.delta
        want = -(25.0 / (8e-3)) * (3 + math.log(inst.delta / x))
        assert inst.omega_second(x) == pytest.approx(want, rel=1e-13)


def test_omega_second_bound_and_blowup(half):
    inst = half.instance(10.0)
    r0 = find_r0(HALF)
    xs = inst.delta * np.logspace(-10, -1e-3, 100)
    for x in xs:
        assert 1 / x >= r0
        assert inst.omega_second(x) <= inst.omega_second_bound(x)
    assert inst.omega_second(inst.delta * 1e-12) < -1e6


def test_omega_second_outside_branch(small):
    inst = small.instance(2.0)
    with pytest.raises(DomainError):
        inst.omega_second(inst.delta)
    with pytest.raises(DomainError):
        inst.omega_second(2 * inst.delta)


def test_domain_errors(small):
    with pytest.raises(DomainError):
        small.instance(0.5)
    inst = small.instance(2.0)
    for bad in (0.0, -1.0, math.nan):
        with pytest.raises(DomainError):
            inst.omega(bad)
        with pytest.raises(DomainError):
            inst.omega_prime(bad)
    with pytest.raises(DomainError):
        ModulusFamily(ONE, 1.0, -1e-3, 1e-4)


def test_axioms_pass_example(small):
    rep = check_modulus_axioms(small.instance(1.0))
    assert rep.passed, rep.failures()


def test_axioms_fail_when_gamma_is_2kappa():
    fam = ModulusFamily(ONE, 1.0, 1e-3, 2e-3)
    assert "gamma < kappa" in fam.violations()
    rep = check_modulus_axioms(fam.instance(1.0))
    assert not rep["concave-derivative"].passed
    assert rep["concave-derivative"].failing_xi


def test_doubling_at_delta(half):
    inst = half.instance(1e3)
    d = inst.delta
    step = half.gamma / (4 * inst.m_delta)
    assert inst.omega(2 * d) <= inst.omega(d) + step
    assert inst.omega(d) + step <= 1.5 * inst.omega(d)


def test_below_linear_on_near_branch(half):
    inst = half.instance(10.0)
    for x in inst.delta * np.logspace(-8, 0, 200):
        assert inst.omega(x) <= 10.0 * x


def test_tail_integral_bound(small, half):
    for fam in (small, half):
        for B in (1.0, 10.0, 1e3, 1e6):
            inst = fam.instance(B)
            lo, hi = tail_integral(inst)
            assert lo <= hi <= 2 * B
            assert hi - lo < 1e-4 * hi


def test_default_constants():
    k, g = default_constants(1.0, ONE)
    assert k == pytest.approx(1 / (64 * math.pi))
    assert g == pytest.approx(k / 2)
    fam = ModulusFamily.auto(HALF, 20.0)
    assert fam.violations() == []
    assert fam.kappa <= 0.5 * g_of_delta(HALF, 1 / find_r0(HALF))


def test_violations_listed():
    fam = ModulusFamily(ONE, 1.0, 10 / math.pi, 1.0)
    v = fam.violations()
    assert "32*pi*kappa*A < 1" in v and "4*pi*A*gamma < 1" in v


def test_find_B_unit_amplitude_is_out_of_reach():
    fam = ModulusFamily.auto(ONE, A_ONE)
    with pytest.raises(CertificationError, match="grows too slowly"):
        find_B_for_data(fam, 1.0, 1.0)
    # the largest representable members are still far below 2 sup = 2
    assert fam.instance(1e280).omega(2.0) < 1e-3


def test_find_B_small_amplitude():
    fam = ModulusFamily.auto(ONE, A_ONE)
    B = find_B_for_data(fam, 2e-4, 2e-4)
    assert 1.0 < B < 1e7
    assert fit_criterion(fam.instance(B), 2e-4, 2e-4) >= 0
    assert fit_criterion(fam.instance(B / 2), 2e-4, 2e-4) < 0


def test_find_B_returns_at_least_grad():
    fam = ModulusFamily.auto(ONE, A_ONE)
    assert find_B_for_data(fam, 1e-4, 50.0) >= 50.0


def test_find_B_monotone_in_grad():
    fam = ModulusFamily.auto(ONE, A_ONE)
    Bs = [find_B_for_data(fam, 2e-4, g) for g in (1e-4, 2e-4, 4e-4, 8e-4)]
    assert all(b >= a for a, b in zip(Bs, Bs[1:]))


def test_find_B_domain():
    fam = ModulusFamily.auto(ONE, A_ONE)
    with pytest.raises(DomainError):
        find_B_for_data(fam, 0.0, 1.0)
    with pytest.raises(DomainError):
        find_B_for_data(fam, 1.0, math.inf)


def test_linear_and_clamped():
    lin = LinearModulus(3.0)
    assert lin.omega(2.5) == pytest.approx(7.5)
    cl = ClampedLinearModulus(1.0, 1.0)
    assert cl.omega(0.5) == pytest.approx(0.5)
    assert cl.omega(4.0) == pytest.approx(1.0)
    assert cl.omega_prime(1.0) == 1.0 and cl.omega_prime_right(1.0) == 0.0


def test_export_csv(tmp_path, half):
    inst = half.instance(10.0)
    p = tmp_path / "omega.csv"
    export_csv(inst, p)
    lines = p.read_text().splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    assert any("kappa" in h for h in header) and any("delta" in h for h in header)
    rows = list(csv.reader(ln for ln in lines if not ln.startswith("#")))
    assert rows[0] == ["xi", "omega", "omega_prime"]
    x, w, wp = (float(v) for v in rows[5])
    assert w == inst.omega(x) and wp == inst.omega_prime(x)
