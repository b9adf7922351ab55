"""The two-branch family of moduli of continuity ``omega_B`` and test moduli.

For ``B >= 1`` the branch point ``delta(B)`` solves ``B delta m(1/delta) = kappa``
and

    omega_B'(x) = B - (B**2 / (8 kappa)) x m(1/x) (4 + ln(delta/x)),   x <= delta
    omega_B'(x) = gamma / (x (4 + ln(x/delta)) m(1/delta)),            x >  delta

with ``omega_B(0) = 0``.  Evaluation is done by the kernel core (compiled or
pure Python); this module adds validation, checks and the data-fitting search.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels_py as _k
from ._backend import ModulusCore
from .errors import CertificationError, DomainError
from .symbols import Symbol, find_r0, g_of_delta, solve_delta

# Below this the branch-point table loses its subnormal-free margin.
DELTA_FLOOR = 1e-290
SPLIT_OFFSET = 1e-6


def default_constants(A, symbol):
    """Smallness constants with a factor-2 margin in every condition."""
    kappa = 1.0 / (64.0 * math.pi * A)
    try:
        kappa = min(kappa, 0.5 * g_of_delta(symbol, 1.0 / find_r0(symbol)))
    except CertificationError:
        pass
    gamma = min(0.5 * kappa, 1.0 / (8.0 * math.pi * A))
    return kappa, gamma


@dataclass(frozen=True)
class ModulusFamily:
    symbol: Symbol
    A: float
    kappa: float
    gamma: float

    def __post_init__(self):
        for name in ("A", "kappa", "gamma"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v > 0.0):
                raise DomainError(f"{name} must be positive and finite, got {v!r}")
            object.__setattr__(self, name, v)

    @classmethod
    def auto(cls, symbol, A):
        kappa, gamma = default_constants(A, symbol)
        return cls(symbol, A, kappa, gamma)

    def violations(self):
        """Names of the smallness conditions this family breaks."""
        out = []
        if not 32.0 * math.pi * self.kappa * self.A < 1.0:
            out.append("32*pi*kappa*A < 1")
        if not 4.0 * math.pi * self.A * self.gamma < 1.0:
            out.append("4*pi*A*gamma < 1")
        if not self.gamma < self.kappa:
            out.append("gamma < kappa")
        try:
            gmax = g_of_delta(self.symbol, 1.0 / find_r0(self.symbol))
            if self.kappa > gmax:
                out.append("kappa <= g(1/r0)")
        except CertificationError:
            out.append("r0 exists")
        return out

    def instance(self, B):
        return ModulusInstance(self, B)

    def to_dict(self):
        return {"symbol": self.symbol.to_config(), "A": self.A,
                "kappa": self.kappa, "gamma": self.gamma}


def _check_xi(xi):
    xi = float(xi)
    if not (xi > 0.0 and math.isfinite(xi)):
        raise DomainError(f"xi must be positive and finite, got {xi!r}")
    return xi


class _ModulusBase:
    """Shared evaluation API over a kernel core."""

    core = None
    B = 1.0
    delta = 1.0

    def omega(self, xi):
        return self.core.omega(_check_xi(xi))

    def omega_prime(self, xi):
        """Left-continuous derivative."""
        return self.core.omega_prime(_check_xi(xi))

    def omega_prime_right(self, xi):
        return self.core.omega_prime_right(_check_xi(xi))

    def omega_second_piecewise(self, xi):
        """Second derivative of the smooth piece containing xi (left piece at a kink)."""
        return self.core.omega_second(_check_xi(xi))

    def omega_diff(self, a, b):
        """``omega(b) - omega(a)`` for ``0 <= a <= b`` without cancellation."""
        return self.core.omega_diff(float(a), float(b))

    def omega_array(self, xi):
        f = self.core.omega
        xi = np.asarray(xi, float)
        return np.array([f(_check_xi(x)) for x in xi.ravel()]).reshape(xi.shape)

    def omega_prime_array(self, xi):
        f = self.core.omega_prime
        xi = np.asarray(xi, float)
        return np.array([f(_check_xi(x)) for x in xi.ravel()]).reshape(xi.shape)

    def constants(self):
        return {}


class ModulusInstance(_ModulusBase):
    """One member ``omega_B`` of a family; immutable once built."""

    kind = _k.KIND_FAMILY

    def __init__(self, family, B):
        B = float(B)
        if not (math.isfinite(B) and B >= 1.0):
            raise DomainError(f"B must be finite and >= 1, got {B!r}")
        self.family = family
        self.B = B
        self.delta = solve_delta(family.symbol, B, family.kappa)
        if self.delta < DELTA_FLOOR:
            raise DomainError(f"delta(B) = {self.delta:g} is below {DELTA_FLOOR:g}; "
                              "B is too large for double precision")
        self.core = ModulusCore(_k.KIND_FAMILY, family.symbol.code, family.symbol.beta,
                                B, family.kappa, family.gamma, self.delta)
        self.omega_at_delta = self.core.omega_delta

    symbol = property(lambda self: self.family.symbol)
    A = property(lambda self: self.family.A)
    kappa = property(lambda self: self.family.kappa)
    gamma = property(lambda self: self.family.gamma)

    @property
    def m_delta(self):
        return self.core.m_delta

    def omega_second(self, xi):
        """Exact second derivative on the near branch ``0 < xi < delta``."""
        xi = _check_xi(xi)
        if not xi < self.delta:
            raise DomainError("omega_second is defined on the branch 0 < xi < delta(B)")
        return self.core.omega_second(xi)

    def omega_second_bound(self, xi):
        """Upper bound ``-(B^2/(32 kappa)) m(1/xi) (4 + ln(delta/xi))``."""
        xi = _check_xi(xi)
        return -(self.B ** 2 / (32.0 * self.kappa)) * self.symbol(1.0 / xi) * (
            4.0 + math.log(self.delta / xi))

    def left_slope_at_delta(self):
        return self.core.omega_prime(self.delta)

    def right_slope_at_delta(self):
        return self.core.omega_prime_right(self.delta)

    def split_points(self):
        """Evaluation points standing in for the exact branch point."""
        return (self.delta * (1.0 - SPLIT_OFFSET), self.delta * (1.0 + SPLIT_OFFSET))

    def constants(self):
        out = self.family.to_dict()
        out.update(B=self.B, delta=self.delta)
        return out


class LinearModulus(_ModulusBase):
    """``omega(x) = c x``: not a bounded modulus, but its dissipation vanishes."""

    kind = _k.KIND_LINEAR

    def __init__(self, c=1.0, symbol=None, A=1.0):
        self.B = float(c)
        self.delta = math.inf
        self.symbol = symbol or Symbol()
        self.A = float(A)
        self.core = ModulusCore(_k.KIND_LINEAR, self.symbol.code, self.symbol.beta,
                                self.B, 1.0, 0.5, 1.0)

    def constants(self):
        return {"kind": "linear", "c": self.B, "A": self.A}


class ClampedLinearModulus(_ModulusBase):
    """``omega(x) = c min(x, knee)``."""

    kind = _k.KIND_CLAMPED

    def __init__(self, c=1.0, knee=1.0, symbol=None, A=1.0):
        self.B = float(c)
        self.delta = float(knee)
        self.symbol = symbol or Symbol()
        self.A = float(A)
        self.core = ModulusCore(_k.KIND_CLAMPED, self.symbol.code, self.symbol.beta,
                                self.B, 1.0, 0.5, self.delta)

    def constants(self):
        return {"kind": "clamped", "c": self.B, "knee": self.delta, "A": self.A}


# -- checks -------------------------------------------------------------------

@dataclass
class AxiomCheck:
    name: str
    passed: bool
    worst: float
    failing_xi: list = field(default_factory=list)


@dataclass
class AxiomReport:
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self):
        return [c for c in self.checks if not c.passed]


def log_grid(delta, lo_decade, hi_decade, per_decade):
    n = int(round((hi_decade - lo_decade) * per_decade)) + 1
    return delta * np.logspace(lo_decade, hi_decade, n)


def tail_integral(inst, M=1e6, epsrel=1e-12):
    """Bracket for ``int_delta^inf omega(eta)/eta**2 d eta``.

    The tail beyond ``Y = M delta`` uses ``omega(eta) <= omega(Y) + Y omega'(Y) ln(eta/Y)``,
    valid because ``eta omega'(eta)`` is non-increasing there.
    """
    d = inst.delta
    core = inst.core

    def f(u):
        return core.omega(d * math.exp(u)) * math.exp(-u)

    U = math.log(M)
    val, err, ok = _k.gk_quad(f, [0.0, 1.0, 5.0, U], 0.0, epsrel)
    if not ok:
        raise CertificationError("tail integral did not converge")
    val /= d
    Y = M * d
    wY = core.omega(Y)
    return val + wY / Y, val + wY / Y + core.omega_prime_right(Y)


def check_modulus_axioms(inst, per_decade=400, decades=(-8.0, 8.0), right_offset=1e-14):
    """Monotonicity, concavity, doubling and the origin slope on log grids."""
    d = inst.delta
    xs = log_grid(d, decades[0], decades[1], per_decade)
    core = inst.core
    checks = []

    # Strict monotonicity via cancellation-free increments.
    inc = np.array([core.omega_diff(a, b) for a, b in zip(xs[:-1], xs[1:])])
    bad = np.nonzero(~(inc > 0.0))[0]
    checks.append(AxiomCheck("monotone", bad.size == 0, float(np.min(inc)),
                             [float(xs[i]) for i in bad[:10]]))

    # Chord slopes of consecutive triples are non-increasing.
    slopes = inc / np.diff(xs)
    ds = np.diff(slopes)
    tol = 1e-10 * np.abs(slopes[:-1])
    bad = np.nonzero(ds > tol)[0]
    checks.append(AxiomCheck("concave-chords", bad.size == 0, float(np.max(ds / np.abs(slopes[:-1]))),
                             [float(xs[i + 1]) for i in bad[:10]]))

    # One-sided derivatives non-increasing, including the jump at delta.
    dp = np.array([core.omega_prime(x) for x in xs])
    bad = np.nonzero(np.diff(dp) > 1e-12 * np.abs(dp[:-1]))[0]
    left = core.omega_prime(d)
    right = core.omega_prime_right(d * (1.0 + right_offset))
    jump_ok = left - right > 1e-12 * inst.B
    checks.append(AxiomCheck("concave-derivative", bad.size == 0 and jump_ok, float(right - left),
                             [float(xs[i + 1]) for i in bad[:10]] + ([] if jump_ok else [d])))

    # Doubling on the far branch.
    far = xs[xs >= d]
    ratio = np.array([core.omega(2.0 * x) / core.omega(x) for x in far])
    bad = np.nonzero(ratio > 1.5)[0]
    checks.append(AxiomCheck("doubling", bad.size == 0, float(np.max(ratio)),
                             [float(far[i]) for i in bad[:10]]))

    # omega(x) <= B x on the near branch, omega(delta) in [B delta/2, B delta].
    near = xs[xs <= d]
    excess = np.array([core.omega(x) / (inst.B * x) for x in near])
    wd = core.omega(d)
    ok = bool(np.all(excess <= 1.0)) and inst.B * d / 2 <= wd <= inst.B * d
    checks.append(AxiomCheck("below-linear", ok, float(np.max(excess)),
                             [float(near[i]) for i in np.nonzero(excess > 1.0)[0][:10]]))

    # omega'(0+) = B.
    tiny = max(d * 1e-250, 1e-300)
    s0 = core.omega_prime(tiny)
    checks.append(AxiomCheck("origin-slope", abs(s0 - inst.B) <= 1e-12 * inst.B,
                             abs(s0 - inst.B) / inst.B))
    return AxiomReport(checks)


# -- fitting to data ----------------------------------------------------------

def fit_criterion(inst, sup_norm, grad_norm):
    """``omega_B(2 sup/grad) - 2 sup``; non-negative when theta_0 obeys omega_B."""
    a = 2.0 * sup_norm / grad_norm
    return inst.omega(a) - 2.0 * sup_norm


def _criterion_upper(family, B, sup_norm, grad_norm):
    """Cheap upper bound for ``omega_B(a)`` using ``omega_B(delta) <= B delta``."""
    d = solve_delta(family.symbol, B, family.kappa)
    a = 2.0 * sup_norm / grad_norm
    if a <= d:
        return B * a
    md = family.kappa / (B * d)
    return B * d + (family.gamma / md) * math.log1p(math.log(a / d) / 4.0)


def _holds(family, B, sup_norm, grad_norm):
    try:
        d = solve_delta(family.symbol, B, family.kappa)
    except (OverflowError, ValueError):
        d = 0.0
    if d < DELTA_FLOOR:
        if _criterion_upper(family, B, sup_norm, grad_norm) < 2.0 * sup_norm:
            return False
        raise CertificationError(f"criterion requires B beyond the double-precision range "
                                 f"(B = {B:g})")
    return fit_criterion(family.instance(B), sup_norm, grad_norm) >= 0.0


def find_B_for_data(family, sup_norm, grad_norm, B_max=1e300, rtol=1e-10):
    """Smallest B (doubling, then bisection) with ``omega_B(2 sup/grad) >= 2 sup``."""
    sup_norm = float(sup_norm)
    grad_norm = float(grad_norm)
    for name, v in (("sup_norm", sup_norm), ("grad_norm", grad_norm)):
        if not (v > 0.0 and math.isfinite(v)):
            raise DomainError(f"{name} must be positive and finite, got {v!r}")
    B = max(1.0, grad_norm)
    lo = None
    while not _holds(family, B, sup_norm, grad_norm):
        lo = B
        B *= 2.0
        if B > B_max:
            raise CertificationError(
                f"no B <= {B_max:g} makes omega_B(2 sup/grad) >= 2 sup "
                f"(sup = {sup_norm:g}, grad = {grad_norm:g}); the modulus family grows too "
                "slowly for data of this amplitude")
    hi = B
    if lo is None:
        return hi
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if _holds(family, mid, sup_norm, grad_norm):
            hi = mid
        else:
            lo = mid
    return hi


def export_csv(inst, path, xi=None):
    """Write ``xi, omega, omega_prime`` with the constants as header comments."""
    if xi is None:
        xi = log_grid(inst.delta, -8, 8, 20)
    with open(path, "w", newline="") as fh:
        for k, v in inst.constants().items():
            fh.write(f"# {k} = {v}\n")
        w = csv.writer(fh)
        w.writerow(["xi", "omega", "omega_prime"])
        for x in xi:
            w.writerow([repr(float(x)), repr(inst.omega(x)), repr(inst.omega_prime(x))])
