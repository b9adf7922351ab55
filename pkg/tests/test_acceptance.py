"""Acceptance criteria, one test per criterion, at the stated tolerances.

The terminal summary prints one PASS/FAIL line per criterion.
"""

import json
import math

import numpy as np
import pytest

from ssqg.certificate import CertificateConfig, D_B, Omega_B, verify_negativity
from ssqg.cli import main
from ssqg.kernel import KernelProbe, compute_kernel, estimate_A, verify_kernel_bounds
from ssqg.moduli import (ClampedLinearModulus, LinearModulus, ModulusFamily,
                         check_modulus_axioms, tail_integral)
from ssqg.solver import MonitorConfig, SolverConfig, run
from ssqg.symbols import Symbol, eval_m, find_r0, g_of_delta, solve_delta

from oracles import riesz

ONE = Symbol()
HALF = Symbol("loglog-power", 0.5)
BUILT_IN = [ONE, Symbol("loglog-power", 0.25), HALF, Symbol("loglog-power", 0.9)]


def random_family(rng):
    sym = BUILT_IN[rng.integers(len(BUILT_IN))]
    A = 10 ** rng.uniform(0, 2)
    kmax = min(1 / (32 * math.pi * A), 0.5 * g_of_delta(sym, 1 / find_r0(sym)))
    kappa = kmax * rng.uniform(0.05, 0.99)
    gamma = min(kappa, 1 / (4 * math.pi * A)) * rng.uniform(0.05, 0.99)
    fam = ModulusFamily(sym, A, kappa, gamma)
    assert fam.violations() == []
    return fam, 10 ** rng.uniform(0, 8)


def test_criterion_1_modulus_closed_forms():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        fam, B = random_family(rng)
        inst = fam.instance(B)
        assert abs(inst.omega_prime(inst.delta * 1e-250) - B) <= 1e-12 * B
        assert abs(inst.left_slope_at_delta() - B / 2) <= 1e-12 * B / 2
        want = fam.gamma * B / (4 * fam.kappa)
        assert abs(inst.right_slope_at_delta() - want) <= 1e-12 * want


def test_criterion_2_delta_root_solve():
    for sym in BUILT_IN:
        kappa = ModulusFamily.auto(sym, estimate_A(sym)).kappa
        deltas = []
        for p in range(31):
            B = 2.0 ** p
            d = solve_delta(sym, B, kappa)
            assert abs(B * d * eval_m(sym, 1 / d) - kappa) / kappa <= 1e-12
            deltas.append(d)
        assert all(b < a for a, b in zip(deltas, deltas[1:]))


def test_criterion_3_modulus_axioms():
    for sym in BUILT_IN:
        fam = ModulusFamily.auto(sym, estimate_A(sym))
        for B in (1.0, 1e3, 1e6):
            inst = fam.instance(B)
            rep = check_modulus_axioms(inst, per_decade=400, decades=(-8.0, 8.0))
            for name in ("monotone", "concave-chords", "concave-derivative", "doubling"):
                assert rep[name].passed, (sym.label(), B, name, rep[name])
            lo, hi = tail_integral(inst)
            assert hi <= 2 * B


@pytest.mark.parametrize("sym", BUILT_IN, ids=lambda s: s.label())
def test_criterion_4_negativity_certificate(sym):
    fam = ModulusFamily.auto(sym, estimate_A(sym))
    cfg = CertificateConfig(B_list=(1.0, 10.0, 1e3, 1e6), xi_decades=(-6.0, 6.0),
                            points_per_decade=50, margin=1e-3, stability_check=True)
    rep = verify_negativity(fam, cfg)
    sm = rep.summary
    assert sm["failing_points"] == 0
    assert all(r["combined"] < 0 and r["margin"] >= 1e-3 for r in rep.rows)
    assert sm["stable"] and sm["max_stability_ratio"] <= 10
    assert rep.passed


def test_criterion_5_failure_detection(tmp_path):
    A = estimate_A(ONE)
    kappa = 10 / (math.pi * A)
    out = tmp_path / "out"
    assert main(["certify", "--kappa", repr(kappa), "--out", str(out)]) == 2
    (d,) = list(out.iterdir())
    assert json.loads((d / "summary.json").read_text())["failing_near_points"] >= 1
    rows = (d / "report.csv").read_text().splitlines()
    head = rows[0].split(",")
    ix, ic = head.index("xi_over_delta"), head.index("combined")
    near_bad = [r for r in rows[1:]
                if float(r.split(",")[ix]) <= 1 and float(r.split(",")[ic]) >= 0]
    assert near_bad


def test_criterion_6_dissipation_oracle():
    assert abs(D_B(ClampedLinearModulus(1.0, 1.0), 2.0) + 2 * math.log(3) / math.pi) <= 1e-6
    lin = LinearModulus(1.0)
    for xi in (1e-3, 0.1, 1.0, 2.0, 10.0, 1e3):
        assert abs(D_B(lin, xi)) <= 1e-10


def test_criterion_7_velocity_modulus_oracle():
    w = ClampedLinearModulus(1.0, 1.0, A=1.0)
    for xi in (0.01, 0.1, 0.5):
        want = 2 * xi + xi * math.log(1 / xi)
        assert abs(Omega_B(w, xi) - want) <= 1e-8 * want


def test_criterion_8_kernel():
    probe = KernelProbe(ONE)
    for r in np.logspace(-4, 1, 11):
        for phi in (0.0, 0.7, 1.9, 3.5, 5.0):
            x = (r * math.cos(phi), r * math.sin(phi))
            want = riesz(x, 1)
            got = compute_kernel(probe, x).value
            assert abs(got - want) <= 0.01 * (1 / (2 * math.pi * r * r))
    rep = verify_kernel_bounds(KernelProbe(HALF, radii=tuple(np.logspace(-6, 2, 17)), angles=8))
    assert max(rep.plateau_variation) < 0.1


@pytest.fixture(scope="module")
def preset_runs():
    return {s.label(): run(SolverConfig(N=256, T=5.0, symbol=s)) for s in (ONE, HALF)}


def test_criterion_9_solver_correctness(preset_runs):
    # exact modal decay with advection off
    modes = [((3, 4), 0.7 - 0.2j), ((1, 1), 0.5), ((0, 5), 0.25j)]
    st = run(SolverConfig(N=32, T=2.0, initial=modes, advection=False)).state
    for k, a in modes:
        want = a * math.exp(-math.hypot(*k) * 2.0)
        assert abs(st.theta[k] - want) <= 1e-10 * abs(want)

    # third-order self-convergence against a dt/16 reference
    base = dict(N=64, T=0.5)
    ref = run(SolverConfig(dt=0.05 / 16, **base)).state.values()
    errs = [np.max(np.abs(run(SolverConfig(dt=dt, **base)).state.values() - ref))
            for dt in (0.05, 0.025, 0.0125)]
    for a, b in zip(errs, errs[1:]):
        assert abs(math.log2(a / b) - 3.0) <= 0.3

    # maximum principle and mean on the preset runs
    for label, res in preset_runs.items():
        sups = [d.sup_theta for d in res.diagnostics]
        assert all(b <= a + 1e-8 for a, b in zip(sups, sups[1:])), label
        assert abs(res.state.theta.coeffs[0, 0]) <= 1e-14

    # bit-identical re-run
    again = run(SolverConfig(N=256, T=5.0, symbol=ONE))
    first = preset_runs[ONE.label()]
    assert np.array_equal(again.state.theta.coeffs, first.state.theta.coeffs)
    assert [d.as_csv() for d in again.diagnostics] == [d.as_csv() for d in first.diagnostics]


def test_criterion_10_end_to_end_rehearsal():
    # B is fitted to the unit-amplitude preset data
    ok = run(SolverConfig(N=256, T=5.0, monitor=MonitorConfig()))
    assert ok.event is None
    assert max(d.moc_ratio for d in ok.diagnostics) < 1
    bad = run(SolverConfig(N=256, T=5.0,
                           monitor=MonitorConfig(B_scale=0.01, require_initial_obeyed=False)))
    assert bad.event is not None and bad.event.ratio >= 1


def test_rehearsal_at_small_amplitude():
    """The same pipeline on the preset scaled to an amplitude the fit can reach."""
    ok = run(SolverConfig(N=256, T=5.0, amplitude=1.3e-4, monitor=MonitorConfig()))
    assert ok.event is None
    assert max(d.moc_ratio for d in ok.diagnostics) < 1
    bad = run(SolverConfig(N=256, T=5.0, amplitude=1.3e-4,
                           monitor=MonitorConfig(B_scale=0.01, require_initial_obeyed=False)))
    assert bad.event is not None and bad.event.ratio >= 1
