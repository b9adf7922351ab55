"""Radial Fourier multipliers ``m(|zeta|)`` and checks of their growth conditions.

Two symbols are built in::

    constant-one     m(r) = 1                           (critical SQG)
    loglog-power     m(r) = (ln(e + ln(e + r)))**beta    (beta >= 0)

Only ``beta < 1`` makes ``m = o(ln ln r)``; larger exponents are accepted so
that the condition checker can demonstrate failures.
"""

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from ._kernels_py import gk_quad
from .errors import CertificationError, DomainError, PreconditionError

E = math.e
KINDS = ("constant-one", "loglog-power")

# 2 r m'(r) <= m(r) is searched on r = 2**k for k in this range.
R0_GRID = tuple(2.0 ** k for k in range(-20, 51))
R0_LIMIT = 1e15

# Hormander-Mikhlin ratios above this are reported as unbounded.
HM_BOUND = 10.0
LIMIT_THRESHOLD = 0.1
TAIL_DECADES = 6


@dataclass(frozen=True)
class Symbol:
    kind: str = "constant-one"
    beta: float = 0.0
    d: int = 2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown symbol kind {self.kind!r}; expected one of {KINDS}")
        beta = float(self.beta)
        if self.kind == "constant-one":
            beta = 0.0
        if not math.isfinite(beta) or beta < 0.0:
            raise DomainError(f"beta must be finite and >= 0, got {self.beta!r}")
        object.__setattr__(self, "beta", beta)
        if not isinstance(self.d, int) or isinstance(self.d, bool) or self.d < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.d!r}")

    @classmethod
    def from_config(cls, cfg):
        if isinstance(cfg, Symbol):
            return cfg
        if isinstance(cfg, str):
            return cls(cfg)
        unknown = set(cfg) - {"kind", "beta", "d"}
        if unknown:
            raise DomainError(f"unknown symbol keys: {sorted(unknown)}")
        return cls(cfg.get("kind", "constant-one"), cfg.get("beta", 0.0), cfg.get("d", 2))

    def to_config(self):
        if self.kind == "constant-one":
            return {"kind": "constant-one"}
        return {"kind": self.kind, "beta": self.beta}

    @property
    def code(self):
        """Integer tag understood by the kernel core."""
        return 0 if self.kind == "constant-one" else 1

    @property
    def is_constant(self):
        return self.kind == "constant-one" or self.beta == 0.0

    def is_admissible(self):
        """True when the symbol is o(ln ln r), i.e. the regularity theory applies."""
        return self.kind == "constant-one" or self.beta < 1.0

    def __call__(self, r):
        return eval_m(self, r)

    def label(self):
        if self.kind == "constant-one":
            return "constant-one"
        return f"loglog-power(beta={self.beta:g})"


def _check_r(r):
    if isinstance(r, np.ndarray):
        if not np.all(np.isfinite(r)) or np.any(r < 0):
            raise DomainError("radii must be finite and non-negative")
        return r
    r = float(r)
    if not math.isfinite(r) or r < 0.0:
        raise DomainError(f"radius must be finite and non-negative, got {r!r}")
    return r


def eval_m(symbol, r):
    """m(r) for a scalar or an array of radii."""
    r = _check_r(r)
    if isinstance(r, np.ndarray):
        if symbol.is_constant:
            return np.ones_like(r, dtype=float)
        return np.log(E + np.log(E + r)) ** symbol.beta
    if symbol.is_constant:
        return 1.0
    return math.log(E + math.log(E + r)) ** symbol.beta


def eval_m_log(symbol, log_r):
    """m(r) given ``ln r``; usable far beyond the double range of r itself."""
    if symbol.is_constant:
        return 1.0
    if log_r > 30.0:
        l1 = log_r + math.log1p(E * math.exp(-log_r))
    else:
        l1 = math.log(E + math.exp(log_r))
    return math.log(E + l1) ** symbol.beta


def _log_jet(u, n):
    w = [0.0] * (n + 1)
    w[0] = math.log(u[0])
    for k in range(1, n + 1):
        s = sum(j * w[j] * u[k - j] for j in range(1, k))
        w[k] = (u[k] - s / k) / u[0]
    return w


def _pow_jet(u, beta, n):
    v = [0.0] * (n + 1)
    v[0] = u[0] ** beta
    for k in range(1, n + 1):
        s = sum((beta * j - (k - j)) * u[j] * v[k - j] for j in range(1, k + 1))
        v[k] = s / (k * u[0])
    return v


def _jet(symbol, r, n, scale):
    """Taylor coefficients of s -> m(r + scale*s) at s = 0."""
    u = [0.0] * (n + 1)
    u[0] = E + r
    if n:
        u[1] = scale
    w = _log_jet(u, n)
    w[0] += E
    w = [w[0]] + w[1:]
    w = _log_jet(w, n)
    return _pow_jet(w, symbol.beta, n)


def eval_m_deriv(symbol, r, k):
    """The k-th radial derivative of m, 1 <= k <= d + 2."""
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= symbol.d + 2:
        raise DomainError(f"derivative order must be in 1..{symbol.d + 2}, got {k!r}")
    r = _check_r(r)
    if isinstance(r, np.ndarray):
        return np.array([eval_m_deriv(symbol, float(x), k) for x in r.ravel()]).reshape(r.shape)
    if symbol.is_constant:
        return 0.0
    return math.factorial(k) * _jet(symbol, r, k, 1.0)[k]


def scaled_derivatives(symbol, r, n):
    """``[r**k * m^(k)(r) for k in 0..n]`` without overflow for huge r."""
    if symbol.is_constant:
        return [1.0] + [0.0] * n
    v = _jet(symbol, r, n, r)
    return [math.factorial(k) * v[k] for k in range(n + 1)]


def scaled_derivatives_array(symbol, r, n):
    """Vectorised ``scaled_derivatives``; returns an array of shape ``(n+1,) + r.shape``."""
    r = np.asarray(r, float)
    out = np.zeros((n + 1,) + r.shape)
    if symbol.is_constant:
        out[0] = 1.0
        return out

    def log_jet(u):
        w = [np.log(u[0])]
        for k in range(1, n + 1):
            acc = np.zeros_like(r)
            for j in range(1, k):
                acc = acc + j * w[j] * u[k - j]
            w.append((u[k] - acc / k) / u[0])
        return w

    u = [E + r, r] + [np.zeros_like(r)] * (n - 1)
    w = log_jet(u[:n + 1])
    w[0] = w[0] + E
    w = log_jet(w)
    beta = symbol.beta
    v = [w[0] ** beta]
    for k in range(1, n + 1):
        acc = np.zeros_like(r)
        for j in range(1, k + 1):
            acc = acc + (beta * j - (k - j)) * w[j] * v[k - j]
        v.append(acc / (k * w[0]))
    for k in range(n + 1):
        out[k] = math.factorial(k) * v[k]
    return out


@dataclass
class SymbolConditionReport:
    condition_id: str
    log10_r: np.ndarray
    values: np.ndarray
    envelope: np.ndarray
    worst_ratio: float
    passed: bool
    r0: float
    note: str = ""
    flags: np.ndarray = field(default=None, repr=False)

    @property
    def radii(self):
        with np.errstate(over="ignore"):
            return 10.0 ** self.log10_r


def _limit_report(cid, log10_r, q, r0, note=""):
    """Decay check: non-increasing over the last decades and final value small."""
    log10_r = np.asarray(log10_r, float)
    q = np.asarray(q, float)
    tail = log10_r >= log10_r[-1] - TAIL_DECADES
    qt = q[tail]
    monotone = bool(np.all(np.diff(qt) <= 1e-12 * np.abs(qt[:-1])))
    envelope = np.full_like(q, np.nan)
    envelope[tail] = np.maximum.accumulate(qt[::-1])[::-1]
    passed = monotone and bool(q[-1] < LIMIT_THRESHOLD)
    flags = np.zeros(len(q), bool)
    flags[tail] = True
    return SymbolConditionReport(cid, log10_r, q, envelope, float(np.max(qt)), passed, r0,
                                 note, flags)


def _cond_growth(symbol, r0):
    # r = 10**(10**s): the ratio to ln ln r only decays on iterated-log scales.
    log10_r = 10.0 ** (np.arange(0, 241) / 4.0)
    q = []
    for x in log10_r:
        L = x * math.log(10.0)
        q.append(eval_m_log(symbol, L) / math.log(L))
    return _limit_report("growth-loglog", log10_r, q, r0,
                         "r sampled as 10**(10**s), s in [0, 60]")


def _double_grid():
    return np.arange(0, 1201) / 4.0


def _cond_derivative_ratio(symbol, r0):
    log10_r = _double_grid()
    q = [scaled_derivatives(symbol, 10.0 ** x, 1)[1] / eval_m(symbol, 10.0 ** x) for x in log10_r]
    return _limit_report("derivative-ratio", log10_r, np.abs(q), r0)


def _cond_supercritical(symbol, r0):
    log10_r = _double_grid()
    q = [eval_m(symbol, 10.0 ** x) * (1.0 + x * math.log(10.0)) / 10.0 ** x for x in log10_r]
    return _limit_report("supercritical-decay", log10_r, q, r0)


def _cond_hm(symbol, r0):
    log10_r = np.arange(-24, 1201) / 4.0
    rows = np.array([scaled_derivatives(symbol, 10.0 ** x, symbol.d + 2) for x in log10_r])
    m = rows[:, 0]
    out = []
    for k in range(symbol.d + 3):
        q = np.abs(rows[:, k]) / m
        worst = float(np.max(q))
        running = np.maximum.accumulate(q)
        out.append(SymbolConditionReport(f"hormander-mikhlin-{k}", log10_r, q, running, worst,
                                         bool(worst <= HM_BOUND), r0,
                                         f"bounded by {HM_BOUND:g}"))
    return out


def integral_lhs(symbol, zeta):
    """``int_0^zeta m(1/r) dr`` by the substitution r = zeta*exp(-v)."""
    lz = math.log(zeta)

    def f(v):
        return eval_m_log(symbol, v - lz) * math.exp(-v)

    val, err, ok = gk_quad(f, [0.0, 5.0, 40.0, 200.0, 745.0], 0.0, 1e-13)
    return zeta * val


def _cond_integral(symbol, r0):
    log10_z = np.arange(-14, -1, 2, dtype=float)
    q = []
    for x in log10_z:
        z = 10.0 ** x
        q.append(integral_lhs(symbol, z) / (2.0 * z * eval_m(symbol, 1.0 / z)))
    q = np.array(q)
    worst = float(np.max(q))
    return SymbolConditionReport("integral-bound", log10_z, q, np.ones_like(q), worst,
                                 bool(worst <= 1.0), r0, "ratio of the two sides; bound is 1")


def check_conditions(symbol):
    """One report per growth condition, plus the two derived properties."""
    try:
        r0 = find_r0(symbol)
    except CertificationError:
        r0 = math.inf
    reports = [_cond_growth(symbol, r0), _cond_derivative_ratio(symbol, r0)]
    reports.extend(_cond_hm(symbol, r0))
    reports.append(_cond_supercritical(symbol, r0))
    reports.append(_cond_integral(symbol, r0))
    return reports


def conditions_pass(symbol):
    return all(rep.passed for rep in check_conditions(symbol))


def write_condition_csv(reports, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["condition_id", "r", "value", "envelope", "passed"])
        for rep in reports:
            for x, v, e in zip(rep.log10_r, rep.values, rep.envelope):
                r = repr(10.0 ** x) if x < 300 else f"1e+{x:.17g}"
                w.writerow([rep.condition_id, r, repr(float(v)),
                            "" if np.isnan(e) else repr(float(e)), int(rep.passed)])


@lru_cache(maxsize=None)
def find_r0(symbol):
    """Smallest dyadic radius beyond which 2 r m'(r) <= m(r) on the search grid."""
    if symbol.is_constant:
        return R0_GRID[0]
    last_bad = -1
    for i, r in enumerate(R0_GRID):
        m0, m1 = scaled_derivatives(symbol, r, 1)
        if 2.0 * m1 > m0:
            last_bad = i
    if last_bad == len(R0_GRID) - 1:
        raise CertificationError(
            f"2 r m'(r) <= m(r) fails up to r = {R0_LIMIT:g} for {symbol.label()}")
    return R0_GRID[last_bad + 1]


def g_of_delta(symbol, delta):
    """``delta * m(1/delta)``."""
    delta = float(delta)
    if not delta > 0.0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    return delta * eval_m_log(symbol, -math.log(delta))


def g_prime(symbol, delta):
    if symbol.is_constant:
        return 1.0
    r = 1.0 / delta
    m0, m1 = scaled_derivatives(symbol, r, 1)
    return m0 - m1


def solve_delta(symbol, B, kappa):
    """The unique delta <= 1/r0 with ``B * delta * m(1/delta) = kappa``."""
    B = float(B)
    kappa = float(kappa)
    if not (math.isfinite(B) and B >= 1.0):
        raise DomainError(f"B must be finite and >= 1, got {B!r}")
    if not (math.isfinite(kappa) and kappa > 0.0):
        raise DomainError(f"kappa must be positive, got {kappa!r}")
    r0 = find_r0(symbol)
    g_max = g_of_delta(symbol, 1.0 / r0)
    if kappa > g_max:
        raise PreconditionError(
            f"kappa = {kappa:g} exceeds g(1/r0) = {g_max:g}; delta is not unique")
    if symbol.is_constant:
        return kappa / B
    target = math.log(kappa / B)

    def phi(s):
        return s + math.log(eval_m_log(symbol, -s)) - target

    s_hi = -math.log(r0)
    s_lo = target
    while phi(s_lo) >= 0.0:
        s_lo -= math.log(eval_m_log(symbol, -s_lo)) + 1.0
    if phi(s_hi) <= 0.0:
        s = s_hi
    else:
        s = brentq(phi, s_lo, s_hi, xtol=1e-15, rtol=4.0 * np.finfo(float).eps, maxiter=200)
    delta = math.exp(s)
    best, best_res = delta, abs(B * g_of_delta(symbol, delta) - kappa)
    for _ in range(3):
        res = B * g_of_delta(symbol, delta) - kappa
        delta = delta - res / (B * g_prime(symbol, delta))
        r = abs(B * g_of_delta(symbol, delta) - kappa)
        if r < best_res:
            best, best_res = delta, r
    return best
