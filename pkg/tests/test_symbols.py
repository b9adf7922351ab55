import csv
import math

import mpmath as mp
import numpy as np
import pytest

from ssqg.errors import CertificationError, DomainError, PreconditionError
from ssqg.symbols import (R0_GRID, Symbol, check_conditions, conditions_pass, eval_m,
                          eval_m_deriv, eval_m_log, find_r0, g_of_delta, integral_lhs,
                          scaled_derivatives, scaled_derivatives_array, solve_delta,
                          write_condition_csv)

from oracles import m_deriv_sympy, m_mp

ONE = Symbol()
HALF = Symbol("loglog-power", 0.5)


def test_constant_one_is_one():
    assert eval_m(ONE, 17.3) == 1.0
    assert eval_m(ONE, 0.0) == 1.0


def test_loglog_at_zero_matches_oracle():
    v = eval_m(HALF, 0.0)
    assert v == pytest.approx(math.sqrt(math.log(math.e + 1.0)), rel=1e-15)
    assert v == pytest.approx(float(m_mp(0.5, 0)), rel=1e-15)


@pytest.mark.parametrize("r", [0.0, 1e-3, 1.0, 7.5, 1e3, 1e8, 1e15, 1e100, 1e300])
def test_loglog_against_mpmath(r):
    for beta in (0.25, 0.5, 0.9):
        s = Symbol("loglog-power", beta)
        assert eval_m(s, r) == pytest.approx(float(m_mp(beta, r)), rel=4e-16)


def test_log_evaluation_beyond_double_range():
    for L in (10.0, 700.0, 1e4, 1e10):
        with mp.workdps(30):
            want = mp.log(mp.e + mp.log(mp.e + mp.exp(L))) ** 0.5
        assert eval_m_log(HALF, L) == pytest.approx(float(want), rel=1e-14)


def test_asymptotic_ratio_approaches_one_monotonically():
    q = [eval_m(HALF, 10.0 ** k) / math.log(math.log(10.0 ** k)) ** 0.5 for k in range(6, 15)]
    assert all(b < a for a, b in zip(q, q[1:]))
    assert all(x > 1.0 for x in q)


def test_array_and_scalar_agree():
    r = np.logspace(-3, 12, 50)
    assert np.allclose(eval_m(HALF, r), [eval_m(HALF, x) for x in r], rtol=1e-15, atol=0)


@pytest.mark.parametrize("bad", [-1.0, math.nan, math.inf])
def test_eval_m_domain(bad):
    with pytest.raises(DomainError):
        eval_m(HALF, bad)
    with pytest.raises(DomainError):
        eval_m(HALF, np.array([1.0, bad]))


def test_symbol_validation():
    with pytest.raises(DomainError):
        Symbol("cubic")
    with pytest.raises(DomainError):
        Symbol("loglog-power", -0.1)
    with pytest.raises(DomainError):
        Symbol("loglog-power", 0.5, d=0)
    assert Symbol("constant-one", 0.7).beta == 0.0
    assert Symbol.from_config({"kind": "loglog-power", "beta": 0.5}) == HALF
    assert Symbol.from_config("constant-one") == ONE
    with pytest.raises(DomainError):
        Symbol.from_config({"kind": "loglog-power", "alpha": 1})


def test_admissibility():
    assert ONE.is_admissible() and HALF.is_admissible()
    assert not Symbol("loglog-power", 1.0).is_admissible()


def test_deriv_constant_one():
    assert eval_m_deriv(ONE, 1.0, 1) == 0.0


def test_deriv_beta_one_at_zero():
    # d/dr ln(e + ln(e + r)) at r = 0 is 1/((e + 1) e) = 0.098938...
    v = eval_m_deriv(Symbol("loglog-power", 1.0), 0.0, 1)
    assert v == pytest.approx(1.0 / ((math.e + 1.0) * math.e), rel=1e-15)
    assert v == pytest.approx(0.09894, abs=1e-5)


@pytest.mark.parametrize("beta", [0.25, 0.5, 0.9, 1.0])
@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_deriv_against_sympy(beta, k):
    f = m_deriv_sympy(beta, k)
    s = Symbol("loglog-power", beta)
    for r in (0.0, 0.3, 2.0, 40.0, 1e4, 1e9):
        assert eval_m_deriv(s, r, k) == pytest.approx(float(f(r)), rel=1e-11, abs=1e-300)


@pytest.mark.parametrize("r", [0.5, 3.0, 100.0, 1e5])
def test_deriv_central_difference(r):
    h = r * 1e-5
    for k in (1, 2):
        lo = eval_m(HALF, r - h) if k == 1 else eval_m_deriv(HALF, r - h, k - 1)
        hi = eval_m(HALF, r + h) if k == 1 else eval_m_deriv(HALF, r + h, k - 1)
        assert eval_m_deriv(HALF, r, k) == pytest.approx((hi - lo) / (2 * h), rel=1e-6)


def test_deriv_order_range():
    with pytest.raises(DomainError):
        eval_m_deriv(HALF, 1.0, 0)
    with pytest.raises(DomainError):
        eval_m_deriv(HALF, 1.0, 5)
    assert math.isfinite(eval_m_deriv(Symbol("loglog-power", 0.5, d=3), 1.0, 5))


def test_derivative_ratio_small_at_1e6():
    r = 1e6
    assert r * eval_m_deriv(HALF, r, 1) / eval_m(HALF, r) < 0.05


def test_scaled_derivatives_huge_radius():
    row = scaled_derivatives(HALF, 1e300, 4)
    assert all(math.isfinite(v) for v in row)
    # r m'(r) -> beta m / ((e + ln r) ln r) as r -> inf
    L = 300 * math.log(10.0)
    assert row[1] == pytest.approx(0.5 * row[0] / ((math.e + L) * math.log(math.e + L)), rel=1e-3)
    mid = scaled_derivatives(HALF, 1e8, 4)
    for k in range(1, 5):
        assert mid[k] == pytest.approx(1e8 ** k * float(m_deriv_sympy(0.5, k)(1e8)), rel=1e-10)


def test_scaled_derivatives_array_matches_scalar():
    r = np.logspace(-4, 200, 31)
    arr = scaled_derivatives_array(HALF, r, 4)
    for i, x in enumerate(r):
        assert np.allclose(arr[:, i], scaled_derivatives(HALF, x, 4), rtol=1e-13, atol=1e-300)


def test_conditions_constant_one():
    reps = {r.condition_id: r for r in check_conditions(ONE)}
    assert all(r.passed for r in reps.values())
    assert reps["derivative-ratio"].worst_ratio == 0.0
    assert reps["hormander-mikhlin-0"].worst_ratio == 1.0


@pytest.mark.parametrize("beta", [0.25, 0.5])
def test_conditions_admissible(beta):
    assert conditions_pass(Symbol("loglog-power", beta))


def test_growth_decay_too_slow_to_finish_for_beta_09():
    # m / ln ln r = (ln ln r)^-0.1 roughly; at r = 10**(10**60) that is still about 0.61
    reps = {r.condition_id: r for r in check_conditions(Symbol("loglog-power", 0.9))}
    growth = reps.pop("growth-loglog")
    assert np.all(np.diff(growth.values[-24:]) < 0)
    assert growth.values[-1] == pytest.approx(138.98 ** -0.1, rel=0.02)
    assert all(r.passed for r in reps.values())


def test_conditions_beta_one_fails_growth():
    reps = {r.condition_id: r for r in check_conditions(Symbol("loglog-power", 1.0))}
    assert not reps["growth-loglog"].passed
    assert reps["growth-loglog"].values[-1] > 0.9


def test_report_grids_span_twelve_decades():
    for rep in check_conditions(HALF):
        assert np.all(np.diff(rep.log10_r) > 0)
        if rep.condition_id != "integral-bound":
            assert rep.log10_r[-1] - rep.log10_r[0] >= 12


def test_hm_bounded_by_ten():
    for beta in (0.25, 0.5, 0.9):
        for rep in check_conditions(Symbol("loglog-power", beta)):
            if rep.condition_id.startswith("hormander"):
                assert rep.worst_ratio <= 10.0


def test_integral_bound_against_mpmath():
    z = 1e-6
    with mp.workdps(30):
        want = mp.quad(lambda r: m_mp(0.5, 1 / r), [0, z * 1e-30, z * 1e-10, z])
    assert integral_lhs(HALF, z) == pytest.approx(float(want), rel=1e-10)


def test_condition_csv(tmp_path):
    p = tmp_path / "cond.csv"
    write_condition_csv(check_conditions(HALF), p)
    with open(p) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["condition_id", "r", "value", "envelope", "passed"]
    ids = {r[0] for r in rows[1:]}
    assert {"growth-loglog", "derivative-ratio", "supercritical-decay", "integral-bound"} <= ids
    assert any(r[1].startswith("1e+") for r in rows[1:])


def test_r0():
    assert find_r0(ONE) == R0_GRID[0]
    r0 = find_r0(HALF)
    m0, m1 = scaled_derivatives(HALF, r0, 1)
    assert 2 * m1 <= m0
    assert find_r0(HALF) == r0
    assert find_r0(Symbol("loglog-power", 0.9)) >= r0


def test_r0_fails_for_fast_growth():
    # beta large enough that 2 r m'/m > 1 persists past the search limit
    with pytest.raises(CertificationError):
        find_r0(Symbol("loglog-power", 100.0))


def test_g_of_delta():
    assert g_of_delta(ONE, 0.25) == 0.25
    assert g_of_delta(HALF, 1e-6) == pytest.approx(1e-6 * eval_m(HALF, 1e6), rel=1e-15)
    top = 1.0 / find_r0(HALF)
    d = np.geomspace(top * 1e-12, top, 100)
    g = [g_of_delta(HALF, x) for x in d]
    assert all(b > a for a, b in zip(g, g[1:]))


def test_solve_delta_examples():
    assert solve_delta(ONE, 1.0, 0.01) == pytest.approx(0.01, rel=1e-15)
    assert solve_delta(ONE, 100.0, 0.01) == pytest.approx(1e-4, rel=1e-15)
    d = solve_delta(HALF, 10.0, 1e-3)
    assert abs(10 * g_of_delta(HALF, d) - 1e-3) / 1e-3 <= 1e-12
    assert d < 1e-4


def test_solve_delta_monotone_in_B():
    ds = [solve_delta(HALF, 2.0 ** k, 1e-3) for k in range(31)]
    assert all(b < a for a, b in zip(ds, ds[1:]))


def test_solve_delta_errors():
    with pytest.raises(DomainError):
        solve_delta(HALF, 0.5, 1e-3)
    with pytest.raises(DomainError):
        solve_delta(HALF, 10.0, -1.0)
    top = g_of_delta(HALF, 1.0 / find_r0(HALF))
    with pytest.raises(PreconditionError):
        solve_delta(HALF, 1.0, 2 * top)
