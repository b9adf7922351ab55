"""Pure-Python kernels for modulus evaluation and the certificate integrals.

This module mirrors ``_kernels.pyx`` line for line and is used when the
compiled extension is unavailable (or when ``SSQG_PURE_PYTHON=1``).  Both
implementations must agree to rounding; ``tests/test_backends.py`` checks it.

Conventions shared with the compiled core
-----------------------------------------
A modulus is described by ``(kind, sym, beta, B, kappa, gamma, delta)``:

* ``KIND_FAMILY``: the two-branch family member; ``B`` is the slope at the
  origin and ``delta`` the branch point solving ``B*delta*m(1/delta) = kappa``.
* ``KIND_LINEAR``: ``omega(x) = B*x`` (``kappa``, ``gamma``, ``delta`` unused).
* ``KIND_CLAMPED``: ``omega(x) = B*min(x, delta)``.

``sym``/``beta`` select the radial symbol ``m`` that enters the velocity
integrals (``SYM_CONSTANT`` is ``m == 1``; ``SYM_LOGLOG`` is
``(ln(e + ln(e + r)))**beta``).

On ``(0, X]`` with ``X = delta`` (``inf`` for the linear modulus) every kind is
written as ``omega(x) = B*x - H(x)``.  Differences of ``omega`` are formed
from ``H`` directly, which avoids the cancellation that would otherwise wipe
out the second differences in the dissipation integral at ``xi << delta``.
"""

import math

E = math.e
INF = float("inf")
EPMACH = 2.220446049250313e-16
UFLOW = 2.2250738585072014e-308

SYM_CONSTANT = 0
SYM_LOGLOG = 1

KIND_FAMILY = 0
KIND_LINEAR = 1
KIND_CLAMPED = 2

# H-table: log-spaced panels of this width below delta.
PANEL_WIDTH = 0.5
MAX_PANELS = 240
LOG_TINY = math.log(1e-300)

# Cut-offs of the exponentially decaying substituted integrands.
NEAR_VMAX = 45.0
VEL_VMAX = 50.0

_XGK = (
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
)
_WGK = (
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
)
_WG = (
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
)

_GL8_X = (0.18343464249564978, 0.525532409916329, 0.7966664774136267, 0.9602898564975362)
_GL8_W = (0.36268378337836177, 0.31370664587788705, 0.22238103445337434, 0.10122853629037669)

BACKEND = "python"


class QuadratureFailure(ArithmeticError):
    pass


def m_eval(sym, beta, r):
    if sym == SYM_CONSTANT:
        return 1.0
    return math.log(E + math.log(E + r)) ** beta


def m_deriv1(sym, beta, r):
    if sym == SYM_CONSTANT:
        return 0.0
    l1 = math.log(E + r)
    l2 = math.log(E + l1)
    return beta * l2 ** (beta - 1.0) / ((E + l1) * (E + r))


def qk15(f, a, b):
    """One 15-point Kronrod panel; returns (result, abserr)."""
    centr = 0.5 * (a + b)
    hlgth = 0.5 * (b - a)
    dhlgth = abs(hlgth)
    fc = f(centr)
    resg = fc * _WG[3]
    resk = fc * _WGK[7]
    resabs = abs(resk)
    fv1 = [0.0] * 7
    fv2 = [0.0] * 7
    for j in range(3):
        jtw = 2 * j + 1
        absc = hlgth * _XGK[jtw]
        f1 = f(centr - absc)
        f2 = f(centr + absc)
        fv1[jtw] = f1
        fv2[jtw] = f2
        resg += _WG[j] * (f1 + f2)
        resk += _WGK[jtw] * (f1 + f2)
        resabs += _WGK[jtw] * (abs(f1) + abs(f2))
    for j in range(4):
        jtwm1 = 2 * j
        absc = hlgth * _XGK[jtwm1]
        f1 = f(centr - absc)
        f2 = f(centr + absc)
        fv1[jtwm1] = f1
        fv2[jtwm1] = f2
        resk += _WGK[jtwm1] * (f1 + f2)
        resabs += _WGK[jtwm1] * (abs(f1) + abs(f2))
    reskh = 0.5 * resk
    resasc = _WGK[7] * abs(fc - reskh)
    for j in range(7):
        resasc += _WGK[j] * (abs(fv1[j] - reskh) + abs(fv2[j] - reskh))
    result = resk * hlgth
    resabs *= dhlgth
    resasc *= dhlgth
    abserr = abs((resk - resg) * hlgth)
    if resasc != 0.0 and abserr != 0.0:
        abserr = resasc * min(1.0, (200.0 * abserr / resasc) ** 1.5)
    if resabs > UFLOW / (50.0 * EPMACH):
        abserr = max(EPMACH * 50.0 * resabs, abserr)
    return result, abserr


def gk_quad(f, points, epsabs, epsrel, limit=2000):
    """Globally adaptive G7-K15 quadrature over the breakpoints ``points``.

    Returns ``(result, abserr, converged)``.  Non-convergence is reported,
    not raised, so callers can attach their own diagnostics.
    """
    # [a, b, result, error, refinable]
    intervals = []
    for a, b in zip(points[:-1], points[1:]):
        if b > a:
            r, e = qk15(f, a, b)
            intervals.append([a, b, r, e, True])
    if not intervals:
        return 0.0, 0.0, True
    while True:
        result = 0.0
        errsum = 0.0
        for iv in intervals:
            result += iv[2]
            errsum += iv[3]
        if errsum <= max(epsabs, epsrel * abs(result)):
            return result, errsum, True
        if len(intervals) >= limit:
            return result, errsum, False
        imax = -1
        emax = -1.0
        for i, iv in enumerate(intervals):
            if iv[4] and iv[3] > emax:
                emax = iv[3]
                imax = i
        if imax < 0:
            return result, errsum, False
        a, b = intervals[imax][0], intervals[imax][1]
        mid = 0.5 * (a + b)
        if (b - a) <= 4.0 * EPMACH * max(abs(a), abs(b)) or not (a < mid < b):
            intervals[imax][4] = False
            continue
        r1, e1 = qk15(f, a, mid)
        r2, e2 = qk15(f, mid, b)
        intervals[imax] = [a, mid, r1, e1, True]
        intervals.append([mid, b, r2, e2, True])


def phi(v):
    """``v - 1 + exp(-v)`` without cancellation near v = 0."""
    if v < 0.5:
        term = 0.5 * v * v
        s = term
        for k in range(3, 22):
            term *= -v / k
            s += term
        return s
    return v - 1.0 + math.exp(-v)


def _gl8(f, a, b):
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    s = 0.0
    for x, w in zip(_GL8_X, _GL8_W):
        s += w * (f(c - h * x) + f(c + h * x))
    return s * h


class ModulusCore:
    """Scalar evaluator for one modulus plus its certificate integrals."""

    def __init__(self, kind, sym, beta, B, kappa, gamma, delta):
        self.kind = int(kind)
        self.sym = int(sym)
        self.beta = float(beta)
        self.B = float(B)
        self.kappa = float(kappa)
        self.gamma = float(gamma)
        self.delta = float(delta)
        if self.kind == KIND_FAMILY:
            self.c = self.B / (8.0 * self.kappa)  # B^2/(8 kappa) would overflow for huge B
            self.log_delta = math.log(self.delta)
            self.m_delta = m_eval(self.sym, self.beta, 1.0 / self.delta)
            self.xlin = self.delta
            self._build_table()
            self.omega_delta = self.B * self.delta - self._H(self.delta)
            self.kinks = ((self.delta, self.omega_prime_right(self.delta)
                           - self.omega_prime(self.delta)),)
        elif self.kind == KIND_LINEAR:
            self.xlin = INF
            self.omega_delta = 0.0
            self.kinks = ()
        elif self.kind == KIND_CLAMPED:
            self.xlin = self.delta
            self.omega_delta = self.B * self.delta
            self.kinks = ((self.delta, -self.B),)
        else:
            raise ValueError("unknown modulus kind %r" % kind)

    # -- symbol -----------------------------------------------------------
    def m(self, r):
        return m_eval(self.sym, self.beta, r)

    # -- near branch helpers (family only) --------------------------------
    def _h(self, t):
        return self.c * (self.B * t) * m_eval(self.sym, self.beta, 1.0 / t) * (4.0 + self.log_delta - math.log(t))

    def _hlog(self, u):
        t = math.exp(u)
        return self._h(t) * t

    def _build_table(self):
        n = int((self.log_delta - LOG_TINY) / PANEL_WIDTH)
        n = max(0, min(MAX_PANELS, n))
        self.n_panels = n
        cum = [0.0] * (n + 1)
        tmin = math.exp(self.log_delta - n * PANEL_WIDTH)
        cum[n] = 0.5 * tmin * self._h(tmin)
        for j in range(n - 1, -1, -1):
            u_hi = self.log_delta - j * PANEL_WIDTH
            cum[j] = cum[j + 1] + _gl8(self._hlog, u_hi - PANEL_WIDTH, u_hi)
        self.table = cum

    def _H(self, x):
        """Integral of the slope deficit ``B - omega'`` from 0 to x <= delta."""
        if x <= 0.0:
            return 0.0
        u = math.log(x)
        j = int(math.ceil((self.log_delta - u) / PANEL_WIDTH))
        if j > self.n_panels:
            return 0.5 * x * self._h(x)
        if j <= 0:
            return self.table[0]
        u_j = self.log_delta - j * PANEL_WIDTH
        return self.table[j] + _gl8(self._hlog, u_j, u)

    def _Hint(self, a, b):
        """``H(b) - H(a)`` for ``0 <= a < b <= delta`` without cancellation."""
        if a > 0.0:
            span = math.log(b / a)
            if span <= 1.0:
                ua = math.log(a)
                if span <= PANEL_WIDTH:
                    return _gl8(self._hlog, ua, ua + span)
                um = ua + 0.5 * span
                return _gl8(self._hlog, ua, um) + _gl8(self._hlog, um, ua + span)
        return self._H(b) - self._H(a)

    def H(self, x):
        if self.kind == KIND_FAMILY:
            return self._H(min(x, self.delta))
        return 0.0

    def Hint(self, a, b):
        if self.kind == KIND_FAMILY:
            return self._Hint(a, b)
        return 0.0

    # -- evaluation ---------------------------------------------------------
    def omega(self, x):
        if self.kind == KIND_FAMILY:
            if x <= self.delta:
                return self.B * x - self._H(x)
            return self.omega_delta + (self.gamma / self.m_delta) * math.log1p(
                math.log(x / self.delta) / 4.0)
        if self.kind == KIND_LINEAR:
            return self.B * x
        return self.B * min(x, self.delta)

    def omega_prime(self, x):
        """Left-continuous derivative."""
        if self.kind == KIND_FAMILY:
            if x <= self.delta:
                return self.B - self._h(x)
            return self.gamma / (x * (4.0 + math.log(x / self.delta)) * self.m_delta)
        if self.kind == KIND_LINEAR:
            return self.B
        return self.B if x <= self.delta else 0.0

    def omega_prime_right(self, x):
        if self.kind == KIND_FAMILY:
            if x < self.delta:
                return self.B - self._h(x)
            return self.gamma / (x * (4.0 + math.log(x / self.delta)) * self.m_delta)
        if self.kind == KIND_LINEAR:
            return self.B
        return self.B if x < self.delta else 0.0

    def omega_second(self, x):
        """Second derivative of the smooth piece containing x (left piece at a kink)."""
        if self.kind != KIND_FAMILY:
            return 0.0
        if x <= self.delta:
            r = 1.0 / x
            mm = m_eval(self.sym, self.beta, r)
            mp = m_deriv1(self.sym, self.beta, r)
            return -self.c * self.B * ((mm - mp * r) * (4.0 + self.log_delta - math.log(x)) - mm)
        L = math.log(x / self.delta)
        return -self.gamma * (5.0 + L) / (self.m_delta * x * x * (4.0 + L) ** 2)

    def omega_diff(self, a, b):
        """``omega(b) - omega(a)`` for ``0 <= a <= b``."""
        if b <= a:
            return 0.0
        if self.kind == KIND_LINEAR:
            return self.B * (b - a)
        if self.kind == KIND_CLAMPED:
            return self.B * (min(b, self.delta) - min(a, self.delta))
        d = self.delta
        if b <= d:
            return self.B * (b - a) - self._Hint(a, b)
        g = self.gamma / self.m_delta
        if a >= d:
            return g * math.log1p(math.log(b / a) / (4.0 + math.log(a / d)))
        left = self.B * (d - a) - self._Hint(a, d)
        return left + g * math.log1p(math.log(b / d) / 4.0)

    # -- certificate integrals ----------------------------------------------
    def velocity(self, xi, M, epsrel, epsabs, limit):
        """Pieces of the velocity modulus (without the factor A).

        Returns ``(I1, I2, tail_lo, tail_hi, abserr, converged)`` where the
        near integral is ``I1`` and the far integral ``I2 + tail``.
        """
        if self.kind == KIND_LINEAR:
            raise ValueError("velocity modulus diverges for an unbounded linear modulus")
        sym, beta = self.sym, self.beta
        omega = self.omega

        def f1(v):
            return omega(xi * math.exp(-v)) * m_eval(sym, beta, math.exp(v) / xi)

        pts = [0.0]
        for xk, _ in self.kinks:
            if 0.0 < xk < xi:
                pts.append(math.log(xi / xk))
        pts.append(VEL_VMAX)
        pts.sort()
        I1, e1, ok1 = gk_quad(f1, pts, epsabs, epsrel, limit)
        vmax_r = math.exp(VEL_VMAX) / xi
        tail1 = 2.0 * self.B * xi * math.exp(-VEL_VMAX) * m_eval(sym, beta, vmax_r)

        Y = M * max(xi, self.xlin)

        def f2(u):
            return omega(xi * math.exp(u)) * m_eval(sym, beta, math.exp(-u) / xi) * math.exp(-u)

        umax = math.log(Y / xi)
        pts = [0.0]
        for xk, _ in self.kinks:
            if xi < xk < Y:
                pts.append(math.log(xk / xi))
        pts.append(umax)
        pts.sort()
        I2, e2, ok2 = gk_quad(f2, pts, epsabs, epsrel, limit)
        wY = omega(Y)
        tail_lo = xi * m_eval(sym, beta, 0.0) * wY / Y
        tail_hi = tail1 + xi * m_eval(sym, beta, 1.0 / Y) * (wY / Y + self.omega_prime_right(Y))
        return I1, I2, tail_lo, tail_hi, e1 + e2, ok1 and ok2

    def dissipation(self, xi, M, epsrel, epsabs, limit):
        """Pieces of the dissipation functional times pi.

        Returns ``(near, far, tail_lo, tail_hi, abserr, converged)``; the
        functional is bracketed by ``(near + far + tail_*) / pi``.
        """
        for xk, _ in self.kinks:
            if abs(xk - xi) <= 4.0 * EPMACH * xi:
                raise ValueError("dissipation is singular at a kink of omega")
        second = self.omega_second

        # Near field: int_{-xi}^{xi} omega''(xi+s) w(|s|) ds with |s| = xi e^{-v},
        # plus the jump terms of omega' inside (0, 2 xi).
        def fr(v):
            ev = math.exp(-v)
            return second(xi * (1.0 + ev)) * 2.0 * phi(v) * xi * ev

        def fl(v):
            ev = math.exp(-v)
            return second(-xi * math.expm1(-v)) * 2.0 * phi(v) * xi * ev

        near = 0.0
        err = 0.0
        ok = True
        if self.kind == KIND_FAMILY:
            pr = [0.0, NEAR_VMAX]
            pl = [0.0, NEAR_VMAX]
            for xk, _ in self.kinks:
                if xi < xk < 2.0 * xi:
                    pr.append(-math.log1p((xk - 2.0 * xi) / xi))
                elif 0.0 < xk < xi:
                    pl.append(-math.log1p(-xk / xi))
            pr = sorted(p for p in pr if 0.0 <= p <= NEAR_VMAX)
            pl = sorted(p for p in pl if 0.0 <= p <= NEAR_VMAX)
            nr, er, okr = gk_quad(fr, pr, epsabs, epsrel, limit)
            nl, el, okl = gk_quad(fl, pl, epsabs, epsrel, limit)
            near += nr + nl
            err += er + el
            ok = okr and okl
        for xk, jump in self.kinks:
            if xi < xk < 2.0 * xi:
                near += jump * 2.0 * phi(-math.log1p((xk - 2.0 * xi) / xi))
            elif 0.0 < xk < xi:
                near += jump * 2.0 * phi(-math.log1p(-xk / xi))
        near_tail = 0.0
        if self.kind == KIND_FAMILY:
            ev = math.exp(-NEAR_VMAX)
            smax = max(abs(second(xi * (1.0 + ev))), abs(second(xi * (1.0 - ev))))
            near_tail = 4.0 * smax * xi * (NEAR_VMAX + 1.0) * ev

        # Far field.
        far = 0.0
        tail_hi = 0.0
        xlin = self.xlin
        if xlin == INF:
            return near, 0.0, -near_tail, 0.0, err, ok
        start = 0.5 * xi
        if xlin > 2.0 * xi:
            eta_star = 0.5 * (xlin - xi)
            if self.kind == KIND_FAMILY:
                h2 = 2.0 * self._H(xi)
                Hint = self._Hint

                def g1(u):
                    eta = math.exp(u)
                    return (h2 - Hint(max(0.0, 2.0 * eta - xi), 2.0 * eta + xi)) / eta

                f1v, e1, ok1 = gk_quad(g1, [math.log(start), math.log(eta_star)],
                                       epsabs, epsrel, limit)
                far += f1v
                err += e1
                ok = ok and ok1
            start = eta_star
        Y = M * max(xi, xlin)
        diff = self.omega_diff

        def g2(u):
            eta = math.exp(u)
            return diff(max(0.0, 2.0 * eta - xi), 2.0 * eta + xi) / eta

        pts = [math.log(start), math.log(Y)]
        for xk, _ in self.kinks:
            for eta in (0.5 * (xk + xi), 0.5 * (xk - xi)):
                if start < eta < Y:
                    pts.append(math.log(eta))
        pts.sort()
        f2v, e2, ok2 = gk_quad(g2, pts, epsabs, epsrel, limit)
        far += f2v - 2.0 * self.omega(xi) / start
        err += e2
        ok = ok and ok2
        tail_hi = 2.0 * xi * self.omega_prime_right(2.0 * Y - xi) / Y
        return near, far, -near_tail, tail_hi, err, ok
