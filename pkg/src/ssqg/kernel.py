"""Planar kernel of the velocity map and its pointwise bounds.

The operator is ``d_j Lambda^-1 m(Lambda)``, with symbol ``i zeta_j |zeta|^-1 m(|zeta|)``.
With the transform convention ``f(x) = (2 pi)^-2 int f^(zeta) e^{-i zeta.x} dzeta``
the kernel for ``m = 1`` is ``+x_j / (2 pi |x|^3)``.  Because the symbol is radial
times ``zeta_j/|zeta|`` the kernel factors as ``K(x) = (x_j/|x|) k(|x|)`` with the
oscillatory Hankel integral

    k(r) = (2 pi r^2)^-1 int_0^inf m(t/r) t J_1(t) dt.

The integral is split by a smooth cutoff ``eta`` (1 on ``t <= lam/2``, 0 on
``t >= lam``).  The compact piece is integrated directly.  The remainder is
integrated by parts four times using ``(t^n J_n)' = t^n J_{n-1}``, which turns it
into ``int G_4(t) t^5 J_5(t) dt`` with ``G_{k+1} = -(G_k/t)'``.  That integrand
decays like ``t^-3.5`` and is truncated at ``T`` with an analytic tail bound.
"""

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import jv

from .errors import DomainError
from .symbols import Symbol, eval_m, find_r0, scaled_derivatives_array

C_GEO = 64.0
R_MIN, R_MAX = 1e-7, 1e3
LANDAU = 0.7858  # |J_nu(x)| <= LANDAU x^(-1/3) for all nu > 0, x > 0
IBP_STEPS = 4
CROSSOVER = (1.0, 10.0)

# Degree-9 smoothstep: 0 at 0, 1 at 1, first four derivatives vanish at both ends.
_SMOOTH = np.polynomial.Polynomial([0, 0, 0, 0, 0, 126, -420, 540, -315, 70])
_SMOOTH_D = [_SMOOTH.deriv(k) for k in range(IBP_STEPS + 1)]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)
_GL_X10, _GL_W10 = np.polynomial.legendre.leggauss(10)


def _ibp_terms(steps=IBP_STEPS):
    """G_steps as ``{(p, j): c}`` meaning ``sum c t^-p G_0^(j)``."""
    g = {(0, 0): 1.0}
    for _ in range(steps):
        nxt = {}
        for (p, j), c in g.items():
            nxt[(p + 2, j)] = nxt.get((p + 2, j), 0.0) + (p + 1) * c
            nxt[(p + 1, j + 1)] = nxt.get((p + 1, j + 1), 0.0) - c
        g = nxt
    return g


IBP_TERMS = _ibp_terms()


def _one_minus_cutoff(t, lam, k):
    """k-th derivative of ``1 - eta(t/lam)``."""
    s = np.clip(2.0 * t / lam - 1.0, 0.0, 1.0)
    inside = (t > lam / 2) & (t < lam)
    if k == 0:
        return np.where(t >= lam, 1.0, np.where(inside, _SMOOTH(s), 0.0))
    return np.where(inside, (2.0 / lam) ** k * _SMOOTH_D[k](s), 0.0)


def _G0_derivs(symbol, r, t, lam):
    """``[G_0^(j)(t) for j = 0..4]`` where ``G_0 = (1 - eta(t/lam)) m(t/r)``."""
    s = scaled_derivatives_array(symbol, t / r, IBP_STEPS)
    M = [s[i] / t ** i for i in range(IBP_STEPS + 1)]
    cut = [_one_minus_cutoff(t, lam, k) for k in range(IBP_STEPS + 1)]
    return [sum(math.comb(j, i) * cut[j - i] * M[i] for i in range(j + 1))
            for j in range(IBP_STEPS + 1)]


def _G4(symbol, r, t, lam):
    d = _G0_derivs(symbol, r, t, lam)
    return sum(c * t ** (-p) * d[j] for (p, j), c in IBP_TERMS.items())


def _panel_sum(f, edges):
    a, b = edges[:-1, None], edges[1:, None]
    mid, half = (a + b) / 2, (b - a) / 2
    hi = np.sum(f(mid + half * _GL_X) * _GL_W * half)
    lo = np.sum(f(mid + half * _GL_X10) * _GL_W10 * half)
    return hi, abs(hi - lo)


@lru_cache(maxsize=64)
def _hm_sup(symbol, rho_lo):
    """Sup over rho >= rho_lo of ``rho^k |m^(k)(rho)| / m(rho)``, k = 0..4, with 10% slack."""
    if symbol.is_constant:
        return (1.0,) + (0.0,) * IBP_STEPS
    rho = np.logspace(math.log10(rho_lo), 300, 2000)
    s = scaled_derivatives_array(symbol, rho, IBP_STEPS)
    return tuple(float(1.1 * np.max(np.abs(s[k] / s[0]))) if k else 1.0
                 for k in range(IBP_STEPS + 1))


@dataclass(frozen=True)
class RadialValue:
    """``r^2 k(r) 2 pi`` split into its pieces, with an absolute error estimate."""
    near: float
    far: float
    tail: float
    error: float

    @property
    def total(self):
        return self.near + self.far


@lru_cache(maxsize=4096)
def radial_profile(symbol, r, lam=1.0, T=2000.0):
    """The Hankel integral ``int_0^inf m(t/r) t J_1(t) dt`` by the cutoff split."""
    if not R_MIN <= r <= R_MAX:
        raise DomainError(f"|x| = {r!r} is outside the supported range [{R_MIN:g}, {R_MAX:g}]")
    if T < 1000.0:
        raise DomainError("transform truncation must be at least 1000 / |x|")

    # compact piece: t J_1(t) ~ t^2/2 makes t < 1e-9 negligible
    def near_f(t):
        cut = 1.0 - _one_minus_cutoff(t, lam, 0)
        return cut * eval_m(symbol, t / r) * t * jv(1, t)

    u = np.linspace(math.log(1e-9 * lam), math.log(lam / 2), 40)
    near_lo, e1 = _panel_sum(near_f, np.exp(u))
    near_hi, e2 = _panel_sum(near_f, np.linspace(lam / 2, lam, 5))

    def far_f(t):
        return _G4(symbol, r, t, lam) * t ** 5 * jv(5, t)

    n = max(8, int(math.ceil((T - lam) / (math.pi / 2))))
    edges = np.concatenate([np.linspace(lam / 2, lam, 5)[:-1], np.linspace(lam, T, n + 1)])
    far, e3 = _panel_sum(far_f, edges)

    rho_T = T / r
    if rho_T < find_r0(symbol):
        raise DomainError("truncation too small for the symbol's growth regime")
    H = _hm_sup(symbol, rho_T)
    coef = sum(abs(c) * H[j] for (p, j), c in IBP_TERMS.items())
    tail = coef * LANDAU * eval_m(symbol, rho_T) * (6.0 / 11.0) * T ** (-7.0 / 3.0)
    err = e1 + e2 + e3 + tail + 1e-14 * abs(near_lo + near_hi + far)
    return RadialValue(near_lo + near_hi, far, tail, err)


@dataclass(frozen=True)
class KernelValue:
    value: float
    error: float
    K1: float
    K2: float


@dataclass(frozen=True)
class KernelProbe:
    symbol: Symbol = field(default_factory=Symbol)
    j: int = 1
    radii: tuple = tuple(np.logspace(-6, 2, 33))
    angles: int = 16
    truncation: float = 2000.0
    R_factor: float = 1.0

    def __post_init__(self):
        if self.j not in (1, 2):
            raise DomainError("component j must be 1 or 2")
        radii = tuple(float(r) for r in self.radii)
        if not radii or any(r <= 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
            raise DomainError("probe radii must be positive and strictly increasing")
        object.__setattr__(self, "radii", radii)
        if int(self.angles) < 1:
            raise DomainError("need at least one angular sample")
        if self.truncation < 1000.0:
            raise DomainError("transform truncation must be at least 1000 / min radius")
        if not self.R_factor > 0:
            raise DomainError("R_factor must be positive")

    def points(self):
        for r in self.radii:
            for a in range(self.angles):
                phi = 2 * math.pi * a / self.angles
                yield r, phi, (r * math.cos(phi), r * math.sin(phi))


def compute_kernel(probe, x):
    """K_j(x) as the sum of the compact and the integrated-by-parts pieces."""
    x1, x2 = (float(c) for c in x)
    r = math.hypot(x1, x2)
    if r == 0.0:
        raise DomainError("the kernel is singular at x = 0")
    prof = radial_profile(probe.symbol, r, probe.R_factor, probe.truncation)
    scale = (x1 if probe.j == 1 else x2) / r / (2 * math.pi * r * r)
    return KernelValue(scale * prof.total, abs(scale) * prof.error,
                       scale * prof.near, scale * prof.far)


def kernel_gradient(probe, x):
    """Central-difference gradient of K_j with step |x| 1e-3; returns (grad, error)."""
    x1, x2 = (float(c) for c in x)
    h = 1e-3 * math.hypot(x1, x2)
    g, err = [], 0.0
    for e in ((1, 0), (0, 1)):
        p = compute_kernel(probe, (x1 + h * e[0], x2 + h * e[1]))
        q = compute_kernel(probe, (x1 - h * e[0], x2 - h * e[1]))
        g.append((p.value - q.value) / (2 * h))
        err += (p.error + q.error) / (2 * h)
    return np.array(g), err


@dataclass
class KernelBoundReport:
    symbol: Symbol
    j: int
    rows: list
    C_K: float
    C_gradK: float
    plateau_variation: tuple
    stable: bool
    flagged_radii: list
    note: str = ""

    @property
    def passed(self):
        return self.stable and math.isfinite(self.C_K) and math.isfinite(self.C_gradK)

    def radius_maxima(self):
        """Per-radius maxima of the two bound ratios."""
        out = {}
        for row in self.rows:
            k, g = out.get(row["r"], (0.0, 0.0))
            out[row["r"]] = (max(k, row["K_bound_ratio"]), max(g, row["gradK_bound_ratio"]))
        return out


def verify_kernel_bounds(probe, plateau_decades=2.0, plateau_tol=0.1):
    """Bound ratios ``|K| |x|^2 / m(1/|x|)`` and ``|grad K| |x|^3 / m(1/|x|)`` on the probe."""
    rows = []
    for r, phi, x in probe.points():
        kv = compute_kernel(probe, x)
        g, gerr = kernel_gradient(probe, x)
        mr = eval_m(probe.symbol, 1.0 / r)
        rows.append({
            "r": r, "angle": phi, "K": kv.value,
            "K_bound_ratio": abs(kv.value) * r * r / mr,
            "gradK_bound_ratio": float(np.hypot(*g)) * r ** 3 / mr,
            "error_estimate": kv.error,
        })
    report = KernelBoundReport(probe.symbol, probe.j, rows, 0.0, 0.0, (0.0, 0.0), True, [])
    maxima = report.radius_maxima()
    report.C_K = max(v[0] for v in maxima.values())
    report.C_gradK = max(v[1] for v in maxima.values())
    r_lo = probe.radii[0]
    small = [v for r, v in maxima.items() if r <= r_lo * 10 ** plateau_decades * (1 + 1e-12)]
    var = []
    for i in range(2):
        vals = [v[i] for v in small]
        var.append((max(vals) - min(vals)) / max(vals) if max(vals) > 0 else 0.0)
    report.plateau_variation = tuple(var)
    report.stable = all(v < plateau_tol for v in var)
    report.flagged_radii = [r for r in maxima if CROSSOVER[0] <= r <= CROSSOVER[1]]
    if not report.stable:
        report.note = "bound ratios still vary over the smallest radii; the symbol may fail the derivative conditions"
    return report


_A_CACHE = {}


def estimate_A(symbol, probe=None):
    """``A = 64 max(C_K, C_gradK)``, floored at 1.  Cached per symbol for the default probe."""
    symbol = Symbol.from_config(symbol)
    key = None
    if probe is None:
        key = symbol
        if key in _A_CACHE:
            return _A_CACHE[key]
        probe = KernelProbe(symbol=symbol, radii=tuple(np.logspace(-6, 2, 17)), angles=8)
    report = verify_kernel_bounds(probe)
    if not report.passed:
        from .errors import CertificationError
        raise CertificationError(f"kernel bounds are not stable for {symbol.label()}: {report.note}")
    A = max(1.0, C_GEO * max(report.C_K, report.C_gradK))
    if key is not None:
        _A_CACHE[key] = A
    return A


def write_kernel_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "angle", "K", "K_bound_ratio", "gradK_bound_ratio", "error_estimate"])
        for row in report.rows:
            w.writerow([repr(float(row[k])) for k in
                        ("r", "angle", "K", "K_bound_ratio", "gradK_bound_ratio", "error_estimate")])
