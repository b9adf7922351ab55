import csv
import math

import numpy as np
import pytest
import sympy as sp

from ssqg.errors import DomainError
from ssqg.kernel import (C_GEO, IBP_TERMS, KernelProbe, compute_kernel, estimate_A,
                         kernel_gradient, radial_profile, verify_kernel_bounds,
                         write_kernel_csv)
from ssqg.symbols import Symbol

from oracles import riesz

ONE = Symbol()
HALF = Symbol("loglog-power", 0.5)
NINE = Symbol("loglog-power", 0.9)


def test_ibp_terms_against_sympy():
    t = sp.symbols("t", positive=True)
    G = sp.Function("G")(t)
    g = G
    for _ in range(4):
        g = sp.expand(-sp.diff(g / t, t))
    want = sum(sp.Integer(c) * t ** -p * sp.diff(G, t, j) for (p, j), c in IBP_TERMS.items())
    assert sp.simplify(g - want) == 0
    assert IBP_TERMS == {(8, 0): 105, (7, 1): -105, (6, 2): 45, (5, 3): -10, (4, 4): 1}


@pytest.mark.parametrize("r", [1e-4, 1e-3, 0.01, 0.1, 1.0, 3.0, 10.0])
def test_riesz_kernel_for_constant_symbol(r):
    probe = KernelProbe(ONE)
    for phi in (0.0, 0.4, 1.0, 2.5):
        x = (r * math.cos(phi), r * math.sin(phi))
        want = riesz(x, 1)
        got = compute_kernel(probe, x).value
        assert got == pytest.approx(want, rel=1e-2, abs=1e-2 * abs(riesz((r, 0), 1)))


def test_constant_symbol_profile_is_one():
    v = radial_profile(ONE, 0.01)
    assert abs(v.total - 1.0) < 1e-8
    assert v.error < 1e-6


def test_oddness_and_rotation():
    p1 = KernelProbe(HALF, j=1)
    p2 = KernelProbe(HALF, j=2)
    for x in ((0.3, 0.1), (1e-3, -2e-3), (-4.0, 1.5)):
        a = compute_kernel(p1, x)
        b = compute_kernel(p1, (-x[0], -x[1]))
        assert abs(a.value + b.value) <= a.error
        c = compute_kernel(p2, (x[1], x[0]))
        assert abs(a.value - c.value) <= a.error


def test_split_independent_of_R():
    for sym in (ONE, HALF):
        for r in (1e-5, 1e-2, 1.0, 50.0):
            x = (r * 0.6, r * 0.8)
            a = compute_kernel(KernelProbe(sym), x)
            b = compute_kernel(KernelProbe(sym, R_factor=2.0), x)
            assert abs(a.value - b.value) <= a.error + b.error
            assert abs(a.K1 - b.K1) > 10 * (a.error + b.error)  # the pieces themselves move


def test_truncation_independent():
    for r in (1e-6, 1e-3, 1.0):
        a = compute_kernel(KernelProbe(HALF, truncation=1000.0), (r, 0.0))
        b = compute_kernel(KernelProbe(HALF, truncation=4000.0), (r, 0.0))
        assert abs(a.value - b.value) <= a.error + b.error


def test_gradient_of_riesz_kernel():
    probe = KernelProbe(ONE)
    x = (0.3, 0.2)
    g, err = kernel_gradient(probe, x)
    r2 = x[0] ** 2 + x[1] ** 2
    want = np.array([(r2 - 3 * x[0] ** 2), -3 * x[0] * x[1]]) / (2 * math.pi * r2 ** 2.5)
    assert np.allclose(g, want, rtol=1e-4)


@pytest.fixture(scope="module")
def report_one():
    probe = KernelProbe(ONE, radii=tuple(np.logspace(-6, 2, 9)), angles=8)
    return verify_kernel_bounds(probe)


def test_constants_for_constant_symbol(report_one):
    assert report_one.passed
    assert report_one.C_K == pytest.approx(1 / (2 * math.pi), rel=1e-3)
    assert report_one.C_gradK == pytest.approx(1 / math.pi, rel=1e-3)


def test_plateau_for_loglog():
    probe = KernelProbe(HALF, radii=tuple(np.logspace(-6, 2, 17)), angles=8)
    rep = verify_kernel_bounds(probe)
    assert rep.stable and rep.passed
    assert max(rep.plateau_variation) < 0.1
    assert rep.flagged_radii and all(1.0 <= r <= 10.0 for r in rep.flagged_radii)
    ratios = [v[0] for v in rep.radius_maxima().values()]
    assert max(ratios) < 1.0


@pytest.mark.parametrize("beta", [0.25, 0.9])
def test_bound_ratio_bounded_over_eight_decades(beta):
    probe = KernelProbe(Symbol("loglog-power", beta), radii=tuple(np.logspace(-6, 2, 9)),
                        angles=4)
    rep = verify_kernel_bounds(probe)
    assert math.isfinite(rep.C_K) and rep.C_K < 1.0
    assert math.isfinite(rep.C_gradK) and rep.C_gradK < 2.0


def test_estimate_A():
    A1 = estimate_A(ONE)
    assert A1 == pytest.approx(C_GEO / math.pi, rel=1e-3)
    assert estimate_A(ONE) == A1
    probe = KernelProbe(ONE, radii=tuple(np.logspace(-6, 2, 17)), angles=8)
    assert estimate_A(ONE, probe) == A1
    a5, a9 = estimate_A(HALF), estimate_A(NINE)
    assert 1.0 <= A1 <= a5 <= a9


def test_domain_errors():
    probe = KernelProbe(ONE)
    with pytest.raises(DomainError):
        compute_kernel(probe, (0.0, 0.0))
    with pytest.raises(DomainError):
        compute_kernel(probe, (1e-9, 0.0))
    with pytest.raises(DomainError):
        compute_kernel(probe, (1e4, 0.0))
    with pytest.raises(DomainError):
        KernelProbe(ONE, j=3)
    with pytest.raises(DomainError):
        KernelProbe(ONE, radii=(1.0, 0.5))
    with pytest.raises(DomainError):
        KernelProbe(ONE, truncation=500.0)
    with pytest.raises(DomainError):
        KernelProbe(ONE, angles=0)


def test_kernel_csv(tmp_path, report_one):
    p = tmp_path / "k.csv"
    write_kernel_csv(report_one, p)
    with open(p) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["r", "angle", "K", "K_bound_ratio", "gradK_bound_ratio", "error_estimate"]
    assert len(rows) == 1 + 9 * 8
    assert float(rows[1][3]) == pytest.approx(1 / (2 * math.pi), rel=1e-3)
