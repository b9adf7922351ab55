"""Independent reference values: closed forms, mpmath quadrature and sympy derivatives."""

import functools
import math

import mpmath as mp
import sympy as sp


def m_mp(beta, r):
    r = mp.mpf(r)
    return mp.log(mp.e + mp.log(mp.e + r)) ** beta


@functools.lru_cache(maxsize=None)
def m_deriv_sympy(beta, k):
    r = sp.symbols("r", nonnegative=True)
    expr = sp.log(sp.E + sp.log(sp.E + r)) ** sp.nsimplify(beta)
    return sp.lambdify(r, sp.diff(expr, r, k), "mpmath")


def riesz(x, j):
    """Planar Riesz kernel x_j / (2 pi |x|^3)."""
    r = math.hypot(*x)
    return x[j - 1] / (2 * math.pi * r ** 3)


class FamilyOracle:
    """High-precision omega_B for a given (symbol, B, kappa, gamma, delta)."""

    def __init__(self, beta, B, kappa, gamma, delta, dps=40):
        self.dps = dps
        with mp.workdps(dps):
            self.beta = beta
            self.B = mp.mpf(B)
            self.kappa = mp.mpf(kappa)
            self.gamma = mp.mpf(gamma)
            self.d = mp.mpf(delta)
            self.c = self.B ** 2 / (8 * self.kappa)
            self.wd = self._near(self.d)

    def m(self, r):
        return m_mp(self.beta, r) if self.beta else mp.mpf(1)

    def wp(self, t):
        t = mp.mpf(t)
        if t <= self.d:
            return self.B - self.c * t * self.m(1 / t) * (4 + mp.log(self.d / t))
        return self.gamma / (t * (4 + mp.log(t / self.d)) * self.m(1 / self.d))

    def _near(self, x):
        x = mp.mpf(x)
        if x == 0:
            return mp.mpf(0)
        if self.beta == 0:
            return self.B * x - self.c * x ** 2 * (mp.mpf(9) / 4 + mp.log(self.d / x) / 2)
        # integrate the slope deficit in log variables
        f = lambda u: self.c * mp.exp(2 * u) * self.m(mp.exp(-u)) * (4 + mp.log(self.d) - u)
        lx = mp.log(x)
        return self.B * x - mp.quad(f, mp.linspace(lx - 80, lx, 17)) - self.c * mp.exp(
            2 * (lx - 80)) * self.m(mp.exp(80 - lx)) * (84 + mp.log(self.d) - lx) / 2

    def omega(self, x):
        with mp.workdps(max(self.dps, mp.mp.dps)):
            x = mp.mpf(x)
            if x <= self.d:
                return self._near(x)
            return self.wd + self.gamma / self.m(1 / self.d) * mp.log((4 + mp.log(x / self.d)) / 4)


def dissipation_mp(w, xi, kinks, w2=None, dps=40):
    """D(xi) = (1/pi)[int_0^{xi/2} (w(xi+2e)+w(xi-2e)-2w(xi))/e^2 + int_{xi/2}^inf (...)/e^2].

    ``kinks`` are the points where w' jumps; the integrands are split there.
    The first integrand is replaced by its limit 4 w''(xi) on a tiny initial piece.
    """
    with mp.workdps(dps):
        xi = mp.mpf(xi)
        f1 = lambda e: (w(xi + 2 * e) + w(xi - 2 * e) - 2 * w(xi)) / e ** 2
        f2 = lambda e: (w(2 * e + xi) - w(2 * e - xi) - 2 * w(xi)) / e ** 2
        e0 = xi * mp.mpf(10) ** -8
        br = []
        for k in kinks:
            k = mp.mpf(k)
            br += [abs(k - xi) / 2, (k + xi) / 2]
        p1 = sorted(set([e0, xi / 2] + [q for q in br if e0 < q < xi / 2]))
        far = [q for q in br if q > xi / 2]
        p2 = sorted(set([xi / 2] + far + [10 * max([xi] + far), 1000 * max([xi] + far)])) + [mp.inf]
        if w2 is None:
            w2 = mp.diff(w, xi, 2)
        total = 4 * w2 * e0 + mp.quad(f1, p1) + mp.quad(f2, p2)
        return total / mp.pi


def clamped_omega(knee=1.0):
    return lambda e: min(e, mp.mpf(knee)) if e > 0 else mp.mpf(0)


def clamped_Omega(xi):
    """Omega for omega = min(eta, 1), m = 1, A = 1, xi <= 1."""
    return 2 * xi + xi * math.log(1 / xi)


def velocity_mp(w, xi, kinks, m=None, A=1, dps=30):
    """A (int_0^xi w m(1/eta)/eta + xi int_xi^inf w m(1/eta)/eta^2) by mpmath."""
    m = m or (lambda r: mp.mpf(1))
    with mp.workdps(dps):
        xi = mp.mpf(xi)
        f1 = lambda u: w(mp.exp(u)) * m(mp.exp(-u))
        f2 = lambda u: w(mp.exp(u)) * m(mp.exp(-u)) * mp.exp(-u)
        lx = mp.log(xi)
        ks = sorted(mp.log(k) for k in kinks)
        p1 = [lx - 700] + [k for k in ks if k < lx] + [lx]
        p2 = [lx] + [k for k in ks if k > lx] + [lx + 50, lx + 200, mp.inf]
        p2 = sorted(set(p2[:-1])) + [mp.inf]
        return A * (mp.quad(f1, p1) + xi * mp.quad(f2, p2))
