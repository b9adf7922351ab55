"""Velocity modulus, dissipation functional and the negativity certificate.

For a modulus ``omega`` and symbol ``m``::

    Omega(xi) = A ( int_0^xi omega(eta) m(1/eta)/eta + xi int_xi^inf omega(eta) m(1/eta)/eta**2 )

    D(xi) = (1/pi) ( int_0^{xi/2} [omega(xi+2e) + omega(xi-2e) - 2 omega(xi)] / e**2
                   + int_{xi/2}^inf [omega(2e+xi) - omega(2e-xi) - 2 omega(xi)] / e**2 )

A breakthrough is impossible when ``Omega(xi) omega'(xi) + D(xi) < 0`` for all
``xi > 0``.  Both quantities are returned as brackets ``[lo, hi]``: the
analytic tail bounds and the quadrature error estimate are folded in, and
the certificate always uses the upper ends.
"""

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels_py as _k
from ._backend import BACKEND
from .errors import DomainError, PreconditionError, QuadratureError
from .moduli import ModulusFamily, default_constants, tail_integral
from .symbols import Symbol, check_conditions, integral_lhs

DEFAULT_B_LIST = (1.0, 10.0, 1e3, 1e6)


@dataclass
class CertificateConfig:
    B_list: tuple = DEFAULT_B_LIST
    xi_decades: tuple = (-6.0, 6.0)
    points_per_decade: int = 50
    tol: float = 1e-10
    M: float = 1e6
    margin: float = 1e-3
    limit: int = 2000
    stability_check: bool = True
    intermediate_stride: int = 25
    workers: int = 1

    def __post_init__(self):
        problems = []
        self.B_list = tuple(float(b) for b in self.B_list)
        if not self.B_list or any(not (math.isfinite(b) and b >= 1.0) for b in self.B_list):
            problems.append("B_list: every B must be finite and >= 1")
        lo, hi = (float(v) for v in self.xi_decades)
        self.xi_decades = (lo, hi)
        if not lo < 0.0 < hi:
            problems.append("xi_decades: need low < 1 < high (as powers of ten of xi/delta)")
        if int(self.points_per_decade) < 50:
            problems.append("points_per_decade: must be >= 50")
        if not self.tol > 0.0:
            problems.append("tol: must be positive")
        if not self.M > 1.0:
            problems.append("M: must exceed 1")
        if not self.margin >= 0.0:
            problems.append("margin: must be non-negative")
        if int(self.workers) < 1:
            problems.append("workers: must be >= 1")
        if problems:
            raise DomainError("; ".join(problems))
        self.points_per_decade = int(self.points_per_decade)
        self.workers = int(self.workers)

    def xi_over_delta(self):
        """Log-spaced grid; the branch point itself is replaced by xi = 1 -+ 1e-6."""
        lo, hi = self.xi_decades
        n = int(round((hi - lo) * self.points_per_decade)) + 1
        s = np.linspace(lo, hi, n)
        pts = []
        for v in s:
            if abs(v) < 1e-12:
                pts.extend([1.0 - 1e-6, 1.0 + 1e-6])
            else:
                pts.append(10.0 ** v)
        return np.array(pts)


@dataclass
class Bracket:
    lo: float
    hi: float
    abserr: float
    tail_width: float


def _fail(what, inst, xi, err, tol):
    raise QuadratureError(
        f"{what} quadrature did not reach rel. tolerance {tol:g} at xi = {xi:g}",
        {"B": getattr(inst, "B", None), "xi": xi, "abserr": err, "tol": tol})


def omega_bracket(inst, xi, tol=1e-10, M=1e6, limit=2000):
    xi = float(xi)
    if not xi > 0.0:
        raise DomainError("xi must be positive")
    try:
        I1, I2, tlo, thi, err, ok = inst.core.velocity(xi, M, tol, 0.0, limit)
    except ValueError as exc:
        raise DomainError(str(exc)) from None
    if not ok:
        _fail("velocity", inst, xi, err, tol)
    A = inst.A
    base = I1 + I2
    return Bracket(A * (base + tlo - err), A * (base + thi + err), A * err, A * (thi - tlo))


def dissipation_bracket(inst, xi, tol=1e-10, M=1e6, limit=2000):
    xi = float(xi)
    if not xi > 0.0:
        raise DomainError("xi must be positive")
    try:
        near, far, tlo, thi, err, ok = inst.core.dissipation(xi, M, tol, 0.0, limit)
    except ValueError as exc:
        raise DomainError(str(exc)) from None
    if not ok:
        _fail("dissipation", inst, xi, err, tol)
    base = near + far
    return Bracket((base + tlo - err) / math.pi, (base + thi + err) / math.pi,
                   err / math.pi, (thi - tlo) / math.pi)


def Omega_B(inst, xi, tol=1e-10, M=1e6, limit=2000):
    """Upper end of the velocity-modulus bracket."""
    return omega_bracket(inst, xi, tol, M, limit).hi


def D_B(inst, xi, tol=1e-10, M=1e6, limit=2000):
    """Upper end of the dissipation bracket."""
    return dissipation_bracket(inst, xi, tol, M, limit).hi


def omega_log_slope(inst, xi, tol=1e-10, M=1e6, limit=2000):
    """Upper bound for ``d Omega / d ln xi = A xi int_xi^inf omega m / eta^2``."""
    I1, I2, tlo, thi, err, ok = inst.core.velocity(float(xi), M, tol, 0.0, limit)
    return inst.A * (I2 + thi + err)


def choose_constants(A, symbol):
    """Default ``(kappa, gamma)`` with a factor-2 margin in each smallness condition."""
    A = float(A)
    if not A >= 1.0:
        raise PreconditionError(f"A must be >= 1, got {A!r}")
    return default_constants(A, symbol)


# -- intermediate bounds ------------------------------------------------------

@dataclass
class BoundCheck:
    name: str
    lhs: float
    rhs: float
    holds: bool


def _weighted_far(inst, a, tol, M, limit):
    """Upper bound of ``int_a^inf omega(eta) m(1/eta)/eta**2``."""
    core = inst.core
    sym = inst.symbol

    def f(u):
        return core.omega(a * math.exp(u)) * sym(math.exp(-u) / a) * math.exp(-u)

    pts = [0.0, math.log(M)]
    if a < inst.delta < M * a:
        pts.insert(1, math.log(inst.delta / a))
    val, err, ok = _k.gk_quad(f, pts, 0.0, tol, limit)
    Y = M * a
    tail = sym(1.0 / Y) * (core.omega(Y) / Y + core.omega_prime_right(Y))
    return (val + err) / a + tail


def _log_weight(inst, a, b, tol, limit):
    """``int_a^b m(1/eta)/eta``."""
    sym = inst.symbol
    val, err, ok = _k.gk_quad(lambda u: sym(math.exp(-u)), [math.log(a), math.log(b)],
                              0.0, tol, limit)
    return val


def check_intermediate_bounds(inst, xi, tol=1e-10, M=1e6, limit=2000):
    """Evaluate both sides of each chained estimate that applies at xi."""
    xi = float(xi)
    B, A, kappa, gamma, d = inst.B, inst.A, inst.kappa, inst.gamma, inst.delta
    sym = inst.symbol
    Om = omega_bracket(inst, xi, tol, M, limit)
    Dm = dissipation_bracket(inst, xi, tol, M, limit)
    wp = inst.omega_prime(xi)
    w = inst.omega(xi)
    drift = Om.hi * wp
    out = []

    def add(name, lhs, rhs):
        out.append(BoundCheck(name, float(lhs), float(rhs), bool(lhs <= rhs)))

    if xi <= d:
        L = 4.0 + math.log(d / xi)
        mx = sym(1.0 / xi)
        tail_lo, tail_hi = tail_integral(inst, M)
        add("dissipation <= xi omega''/pi", Dm.hi, xi * inst.omega_second(xi) / math.pi)
        add("dissipation <= -B^2 xi m L/(32 pi kappa)", Dm.hi,
            -B * B * xi * mx * L / (32.0 * math.pi * kappa))
        t1 = B * integral_lhs(sym, xi)
        t2 = B * xi * _log_weight(inst, xi, d, tol, limit)
        t3 = xi * _weighted_far(inst, d, tol, M, limit)
        add("drift <= A B (near + middle + far)", drift, A * B * (t1 + t2 + t3))
        add("drift <= A B xi m (2B + B ln(d/xi) + tail)", A * B * (t1 + t2 + t3),
            A * B * xi * mx * (2.0 * B + B * math.log(d / xi) + tail_hi))
        add("tail integral <= omega(d)/d + gamma B/(4 kappa)", tail_hi,
            inst.omega_at_delta / d + gamma * B / (4.0 * kappa))
        add("omega(d)/d + gamma B/(4 kappa) <= 2B",
            inst.omega_at_delta / d + gamma * B / (4.0 * kappa), 2.0 * B)
        add("combined <= (A - 1/(32 pi kappa)) B^2 xi m L", drift + Dm.hi,
            (A - 1.0 / (32.0 * math.pi * kappa)) * B * B * xi * mx * L)
        add("(A - 1/(32 pi kappa)) < 0", A - 1.0 / (32.0 * math.pi * kappa), 0.0)
    else:
        md = inst.m_delta
        add("omega(2xi) <= omega(xi) + gamma/(4 m(1/d))", inst.omega(2 * xi),
            w + gamma / (4.0 * md))
        add("omega(xi) + gamma/(4 m(1/d)) <= 1.5 omega(xi)", w + gamma / (4.0 * md), 1.5 * w)
        add("dissipation <= -omega/(2 pi xi)", Dm.hi, -w / (2.0 * math.pi * xi))
        I1, I2, tlo, thi, err, ok = inst.core.velocity(xi, M, tol, 0.0, limit)
        add("near velocity <= 2 kappa + omega m(1/d) ln(xi/d)", I1 + thi + err,
            2.0 * kappa + w * md * math.log(xi / d))
        add("far velocity <= omega m(1/d) + gamma", I2 + thi + err, w * md + gamma)
        add("drift <= 2 A gamma omega/xi", drift, 2.0 * A * gamma * w / xi)
        add("combined < (2 A gamma - 1/(2 pi)) omega/xi", drift + Dm.hi,
            (2.0 * A * gamma - 1.0 / (2.0 * math.pi)) * w / xi)
    return out


# -- negativity sweep ---------------------------------------------------------

def _family_from_dict(fd):
    return ModulusFamily(Symbol.from_config(fd["symbol"]), fd["A"], fd["kappa"], fd["gamma"])


def _evaluate(task):
    """Worker: evaluate one chunk of (B, xi/delta) points."""
    fd, B, ratios, tol, M, limit, stability = task
    inst = _family_from_dict(fd).instance(B)
    rows = []
    for r in ratios:
        xi = r * inst.delta
        Om = omega_bracket(inst, xi, tol, M, limit)
        Dm = dissipation_bracket(inst, xi, tol, M, limit)
        row = {
            "B": B, "xi_over_delta": float(r), "xi": xi,
            "omega_prime": inst.omega_prime(xi),
            "omega_second": inst.omega_second_piecewise(xi),
            "Omega": Om.hi, "Omega_lo": Om.lo, "D": Dm.hi, "D_lo": Dm.lo,
            "D_tail_width": Dm.tail_width,
            "Omega_slope": omega_log_slope(inst, xi, tol, M, limit),
        }
        if stability:
            Om2 = omega_bracket(inst, xi, 0.5 * tol, M, limit)
            Dm2 = dissipation_bracket(inst, xi, 0.5 * tol, M, limit)
            row["stability"] = max(abs(Om2.hi - Om.hi) / (tol * abs(Om.hi)),
                                   abs(Dm2.hi - Dm.hi) / (tol * abs(Dm.hi)))
        else:
            row["stability"] = 0.0
        rows.append(row)
    return rows


@dataclass
class CertificateReport:
    family: dict
    config: dict
    rows: list
    intervals: list
    intermediate: list
    tail_integrals: list
    symbol_conditions: dict
    family_violations: list
    backend: str = BACKEND
    summary: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.summary["passed"]

    @property
    def stable(self):
        return self.summary["stable"]

    def write_csv(self, path):
        cols = ["B", "xi_over_delta", "omega_prime", "Omega", "D", "combined", "margin", "passed"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in self.rows:
                w.writerow([repr(float(r[c])) if c != "passed" else int(r[c]) for c in cols])

    def summary_json(self):
        return json.dumps(self.summary, indent=2, sort_keys=True)


def _interval_bounds(rows, delta_ratio_split=1.0):
    """Continuity estimate of the combined expression between adjacent samples."""
    out = []
    for a, b in zip(rows[:-1], rows[1:]):
        h = math.log(b["xi"] / a["xi"])
        slopes = []
        for r in (a, b):
            slopes.append(abs(r["Omega_slope"] * r["omega_prime"]
                              + r["Omega"] * r["xi"] * r["omega_second"]))
        dD = abs(b["D"] - a["D"]) / h
        L = 2.0 * max(slopes) + 2.0 * dD
        straddle = a["xi_over_delta"] < delta_ratio_split < b["xi_over_delta"]
        if straddle:
            bound = max(a["combined"], b["combined"]) + L * h
        else:
            bound = 0.5 * (a["combined"] + b["combined"]) + 0.5 * L * h
        scale = max(abs(a["D"]), abs(b["D"]))
        out.append({"B": a["B"], "lo": a["xi_over_delta"], "hi": b["xi_over_delta"],
                    "bound": bound, "margin": -bound / scale, "passed": bound < 0.0})
    return out


def verify_negativity(family, config=None):
    """Evaluate ``Omega omega' + D`` with conservative brackets on the (B, xi) grid."""
    config = config or CertificateConfig()
    fd = family.to_dict()
    ratios = config.xi_over_delta()
    tasks = []
    chunk = 64
    for B in config.B_list:
        for i in range(0, len(ratios), chunk):
            tasks.append((fd, B, ratios[i:i + chunk], config.tol, config.M, config.limit,
                          config.stability_check))
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            results = list(ex.map(_evaluate, tasks))
    else:
        results = [_evaluate(t) for t in tasks]
    rows = [r for chunk_rows in results for r in chunk_rows]

    for r in rows:
        r["combined"] = r["Omega"] * r["omega_prime"] + r["D"]
        r["margin"] = -r["combined"] / abs(r["D"]) if r["D"] != 0.0 else -math.inf
        r["passed"] = bool(r["combined"] < -config.margin * abs(r["D"]))
        r["regime"] = "near" if r["xi_over_delta"] <= 1.0 else "far"

    intervals = []
    intermediate = []
    tails = []
    for B in config.B_list:
        sub = [r for r in rows if r["B"] == B]
        intervals.extend(_interval_bounds(sub))
        inst = family.instance(B)
        lo, hi = tail_integral(inst, config.M)
        tails.append({"B": B, "lo": lo, "hi": hi, "holds": hi <= 2.0 * B})
        for r in sub[::config.intermediate_stride]:
            for chk in check_intermediate_bounds(inst, r["xi"], config.tol, config.M,
                                                 config.limit):
                intermediate.append({"B": B, "xi_over_delta": r["xi_over_delta"],
                                     **asdict(chk)})

    conds = {rep.condition_id: rep.passed for rep in check_conditions(family.symbol)}
    worst = min(rows, key=lambda r: r["margin"])
    neg_ok = all(r["passed"] for r in rows)
    int_ok = all(iv["passed"] for iv in intervals)
    stable = all(r["stability"] <= 10.0 for r in rows)
    signs_ok = all(r["D"] < 0.0 and r["Omega_lo"] > 0.0 for r in rows)
    tail_w = max(r["D_tail_width"] / abs(r["D"]) for r in rows)
    summary = {
        "passed": bool(neg_ok and int_ok and stable),
        "grid_passed": neg_ok,
        "between_samples_passed": int_ok,
        "stable": stable,
        "max_stability_ratio": max(r["stability"] for r in rows),
        "sign_structure": signs_ok,
        "max_tail_width_over_D": tail_w,
        "worst_margin": worst["margin"],
        "worst_B": worst["B"],
        "worst_xi_over_delta": worst["xi_over_delta"],
        "worst_between_samples_margin": float(min(iv["margin"] for iv in intervals)),
        "failing_points": sum(not r["passed"] for r in rows),
        "failing_near_points": sum((not r["passed"]) and r["regime"] == "near" for r in rows),
        "intermediate_bounds_hold": all(c["holds"] for c in intermediate),
        "tail_integral_bound_holds": all(t["holds"] for t in tails),
        "constants": {"A": family.A, "kappa": family.kappa, "gamma": family.gamma},
        "symbol": family.symbol.to_config(),
        "symbol_conditions": conds,
        "family_violations": family.violations(),
        "split_point_note": "xi = delta(B) is evaluated at delta(B)*(1 -+ 1e-6)",
        "backend": BACKEND,
    }
    cfg = asdict(config)
    cfg["workers"] = 1  # results do not depend on it
    return CertificateReport(fd, cfg, rows, intervals, intermediate, tails, conds,
                             family.violations(), BACKEND, summary)


def write_report(report, directory):
    os.makedirs(directory, exist_ok=True)
    report.write_csv(os.path.join(directory, "report.csv"))
    with open(os.path.join(directory, "summary.json"), "w") as fh:
        fh.write(report.summary_json())
        fh.write("\n")
