# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for modulus evaluation and the certificate integrals.

Line-for-line twin of ``_kernels_py``; see that module for the conventions.
All state lives in a per-instance struct, and every integral builds its own
context on the stack, so concurrent calls on one instance are safe.
"""

from libc.math cimport log, exp, log1p, expm1, fabs, ceil, pow, INFINITY
from libc.stdlib cimport malloc, free

cdef double E = 2.718281828459045
cdef double EPMACH = 2.220446049250313e-16
cdef double UFLOW = 2.2250738585072014e-308

SYM_CONSTANT = 0
SYM_LOGLOG = 1
KIND_FAMILY = 0
KIND_LINEAR = 1
KIND_CLAMPED = 2
BACKEND = "compiled"

cdef enum:
    MAX_PANELS = 240
cdef double PANEL_WIDTH = 0.5
cdef double NEAR_VMAX = 45.0
cdef double VEL_VMAX = 50.0
cdef double LOG_TINY = log(1e-300)

cdef double XGK[8]
cdef double WGK[8]
cdef double WG[4]
cdef double GLX[4]
cdef double GLW[4]
XGK[:] = [0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
          0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
          0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
          0.207784955007898467600689403773245, 0.0]
WGK[:] = [0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
          0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
          0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
          0.204432940075298892414161999234649, 0.209482141084727828012999174891714]
WG[:] = [0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
         0.381830050505118944950369775488975, 0.417959183673469387755102040816327]
GLX[:] = [0.18343464249564978, 0.525532409916329, 0.7966664774136267, 0.9602898564975362]
GLW[:] = [0.36268378337836177, 0.31370664587788705, 0.22238103445337434, 0.10122853629037669]


ctypedef double (*integrand)(double, void*) noexcept nogil

cdef struct Mod:
    int kind
    int sym
    double beta
    double B
    double kappa
    double gamma
    double delta
    double c
    double log_delta
    double m_delta
    double xlin
    double omega_delta
    int n_panels
    double table[MAX_PANELS + 1]
    int nk
    double kx
    double kj

cdef struct Ctx:
    Mod* m
    double xi
    double h2


cdef inline double c_m(int sym, double beta, double r) noexcept nogil:
    if sym == 0:
        return 1.0
    return exp(beta * log(log(E + log(E + r))))


cdef inline double c_m1(int sym, double beta, double r) noexcept nogil:
    cdef double l1, l2
    if sym == 0:
        return 0.0
    l1 = log(E + r)
    l2 = log(E + l1)
    return beta * exp((beta - 1.0) * log(l2)) / ((E + l1) * (E + r))


def m_eval(int sym, double beta, double r):
    return c_m(sym, beta, r)


def m_deriv1(int sym, double beta, double r):
    return c_m1(sym, beta, r)


cdef void qk15(integrand f, void* ctx, double a, double b,
               double* result, double* abserr) noexcept nogil:
    cdef double centr = 0.5 * (a + b)
    cdef double hlgth = 0.5 * (b - a)
    cdef double dhlgth = fabs(hlgth)
    cdef double fv1[7]
    cdef double fv2[7]
    cdef double fc, resg, resk, resabs, absc, f1, f2, reskh, resasc, err
    cdef int j, jtw, jtwm1
    fc = f(centr, ctx)
    resg = fc * WG[3]
    resk = fc * WGK[7]
    resabs = fabs(resk)
    for j in range(3):
        jtw = 2 * j + 1
        absc = hlgth * XGK[jtw]
        f1 = f(centr - absc, ctx)
        f2 = f(centr + absc, ctx)
        fv1[jtw] = f1
        fv2[jtw] = f2
        resg += WG[j] * (f1 + f2)
        resk += WGK[jtw] * (f1 + f2)
        resabs += WGK[jtw] * (fabs(f1) + fabs(f2))
    for j in range(4):
        jtwm1 = 2 * j
        absc = hlgth * XGK[jtwm1]
        f1 = f(centr - absc, ctx)
        f2 = f(centr + absc, ctx)
        fv1[jtwm1] = f1
        fv2[jtwm1] = f2
        resk += WGK[jtwm1] * (f1 + f2)
        resabs += WGK[jtwm1] * (fabs(f1) + fabs(f2))
    reskh = 0.5 * resk
    resasc = WGK[7] * fabs(fc - reskh)
    for j in range(7):
        resasc += WGK[j] * (fabs(fv1[j] - reskh) + fabs(fv2[j] - reskh))
    result[0] = resk * hlgth
    resabs *= dhlgth
    resasc *= dhlgth
    err = fabs((resk - resg) * hlgth)
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, pow(200.0 * err / resasc, 1.5))
    if resabs > UFLOW / (50.0 * EPMACH):
        err = max(EPMACH * 50.0 * resabs, err)
    abserr[0] = err


cdef int gk_quad(integrand f, void* ctx, double* pts, int npts, double epsabs,
                 double epsrel, int limit, double* result, double* abserr) noexcept nogil:
    """Globally adaptive G7-K15; returns 1 when converged, 0 otherwise, -1 on OOM."""
    cdef double* ia = <double*> malloc(limit * sizeof(double))
    cdef double* ib = <double*> malloc(limit * sizeof(double))
    cdef double* ir = <double*> malloc(limit * sizeof(double))
    cdef double* ie = <double*> malloc(limit * sizeof(double))
    cdef int* ok = <int*> malloc(limit * sizeof(int))
    cdef int n = 0, i, imax, status
    cdef double res, errsum, emax, a, b, mid, r1, e1, r2, e2
    if ia == NULL or ib == NULL or ir == NULL or ie == NULL or ok == NULL:
        free(ia); free(ib); free(ir); free(ie); free(ok)
        return -1
    for i in range(npts - 1):
        if pts[i + 1] > pts[i] and n < limit:
            qk15(f, ctx, pts[i], pts[i + 1], &r1, &e1)
            ia[n] = pts[i]; ib[n] = pts[i + 1]; ir[n] = r1; ie[n] = e1; ok[n] = 1
            n += 1
    status = 1
    res = 0.0
    errsum = 0.0
    while n > 0:
        res = 0.0
        errsum = 0.0
        for i in range(n):
            res += ir[i]
            errsum += ie[i]
        if errsum <= max(epsabs, epsrel * fabs(res)):
            status = 1
            break
        if n >= limit:
            status = 0
            break
        imax = -1
        emax = -1.0
        for i in range(n):
            if ok[i] and ie[i] > emax:
                emax = ie[i]
                imax = i
        if imax < 0:
            status = 0
            break
        a = ia[imax]
        b = ib[imax]
        mid = 0.5 * (a + b)
        if (b - a) <= 4.0 * EPMACH * max(fabs(a), fabs(b)) or not (a < mid < b):
            ok[imax] = 0
            continue
        qk15(f, ctx, a, mid, &r1, &e1)
        qk15(f, ctx, mid, b, &r2, &e2)
        ib[imax] = mid; ir[imax] = r1; ie[imax] = e1; ok[imax] = 1
        ia[n] = mid; ib[n] = b; ir[n] = r2; ie[n] = e2; ok[n] = 1
        n += 1
    result[0] = res
    abserr[0] = errsum
    free(ia); free(ib); free(ir); free(ie); free(ok)
    return status


cdef double phi(double v) noexcept nogil:
    """``v - 1 + exp(-v)`` without cancellation near v = 0."""
    cdef double term, s
    cdef int k
    if v < 0.5:
        term = 0.5 * v * v
        s = term
        for k in range(3, 22):
            term *= -v / k
            s += term
        return s
    return v - 1.0 + exp(-v)


cdef inline double h_(Mod* m, double t) noexcept nogil:
    return m.c * (m.B * t) * c_m(m.sym, m.beta, 1.0 / t) * (4.0 + m.log_delta - log(t))


cdef inline double hlog(Mod* m, double u) noexcept nogil:
    cdef double t = exp(u)
    return h_(m, t) * t


cdef double gl8_hlog(Mod* m, double a, double b) noexcept nogil:
    cdef double c = 0.5 * (a + b)
    cdef double h = 0.5 * (b - a)
    cdef double s = 0.0
    cdef int i
    for i in range(4):
        s += GLW[i] * (hlog(m, c - h * GLX[i]) + hlog(m, c + h * GLX[i]))
    return s * h


cdef void build_table(Mod* m) noexcept nogil:
    cdef int n = <int> ((m.log_delta - LOG_TINY) / PANEL_WIDTH)
    cdef int j
    cdef double tmin, u_hi
    n = max(0, min(MAX_PANELS, n))
    m.n_panels = n
    tmin = exp(m.log_delta - n * PANEL_WIDTH)
    m.table[n] = 0.5 * tmin * h_(m, tmin)
    for j in range(n - 1, -1, -1):
        u_hi = m.log_delta - j * PANEL_WIDTH
        m.table[j] = m.table[j + 1] + gl8_hlog(m, u_hi - PANEL_WIDTH, u_hi)


cdef double H_(Mod* m, double x) noexcept nogil:
    cdef double u, u_j
    cdef int j
    if x <= 0.0:
        return 0.0
    u = log(x)
    j = <int> ceil((m.log_delta - u) / PANEL_WIDTH)
    if j > m.n_panels:
        return 0.5 * x * h_(m, x)
    if j <= 0:
        return m.table[0]
    u_j = m.log_delta - j * PANEL_WIDTH
    return m.table[j] + gl8_hlog(m, u_j, u)


cdef double Hint_(Mod* m, double a, double b) noexcept nogil:
    cdef double span, ua, um
    if a > 0.0:
        span = log(b / a)
        if span <= 1.0:
            ua = log(a)
            if span <= PANEL_WIDTH:
                return gl8_hlog(m, ua, ua + span)
            um = ua + 0.5 * span
            return gl8_hlog(m, ua, um) + gl8_hlog(m, um, ua + span)
    return H_(m, b) - H_(m, a)


cdef double omega_(Mod* m, double x) noexcept nogil:
    if m.kind == 0:
        if x <= m.delta:
            return m.B * x - H_(m, x)
        return m.omega_delta + (m.gamma / m.m_delta) * log1p(log(x / m.delta) / 4.0)
    if m.kind == 1:
        return m.B * x
    return m.B * min(x, m.delta)


cdef double omega_prime_(Mod* m, double x) noexcept nogil:
    if m.kind == 0:
        if x <= m.delta:
            return m.B - h_(m, x)
        return m.gamma / (x * (4.0 + log(x / m.delta)) * m.m_delta)
    if m.kind == 1:
        return m.B
    return m.B if x <= m.delta else 0.0


cdef double omega_prime_right_(Mod* m, double x) noexcept nogil:
    if m.kind == 0:
        if x < m.delta:
            return m.B - h_(m, x)
        return m.gamma / (x * (4.0 + log(x / m.delta)) * m.m_delta)
    if m.kind == 1:
        return m.B
    return m.B if x < m.delta else 0.0


cdef double omega_second_(Mod* m, double x) noexcept nogil:
    cdef double r, mm, mp, L
    if m.kind != 0:
        return 0.0
    if x <= m.delta:
        r = 1.0 / x
        mm = c_m(m.sym, m.beta, r)
        mp = c_m1(m.sym, m.beta, r)
        return -m.c * m.B * ((mm - mp * r) * (4.0 + m.log_delta - log(x)) - mm)
    L = log(x / m.delta)
    return -m.gamma * (5.0 + L) / (m.m_delta * x * x * (4.0 + L) * (4.0 + L))


cdef double omega_diff_(Mod* m, double a, double b) noexcept nogil:
    cdef double d, g, left
    if b <= a:
        return 0.0
    if m.kind == 1:
        return m.B * (b - a)
    if m.kind == 2:
        return m.B * (min(b, m.delta) - min(a, m.delta))
    d = m.delta
    if b <= d:
        return m.B * (b - a) - Hint_(m, a, b)
    g = m.gamma / m.m_delta
    if a >= d:
        return g * log1p(log(b / a) / (4.0 + log(a / d)))
    left = m.B * (d - a) - Hint_(m, a, d)
    return left + g * log1p(log(b / d) / 4.0)


# -- integrands ---------------------------------------------------------------

cdef double f_vel1(double v, void* p) noexcept nogil:
    cdef Ctx* c = <Ctx*> p
    return omega_(c.m, c.xi * exp(-v)) * c_m(c.m.sym, c.m.beta, exp(v) / c.xi)


cdef double f_vel2(double u, void* p) noexcept nogil:
    cdef Ctx* c = <Ctx*> p
    return omega_(c.m, c.xi * exp(u)) * c_m(c.m.sym, c.m.beta, exp(-u) / c.xi) * exp(-u)


cdef double f_near_r(double v, void* p) noexcept nogil:
    cdef Ctx* c = <Ctx*> p
    cdef double ev = exp(-v)
    return omega_second_(c.m, c.xi * (1.0 + ev)) * 2.0 * phi(v) * c.xi * ev


cdef double f_near_l(double v, void* p) noexcept nogil:
    cdef Ctx* c = <Ctx*> p
    cdef double ev = exp(-v)
    return omega_second_(c.m, -c.xi * expm1(-v)) * 2.0 * phi(v) * c.xi * ev


cdef double f_far1(double u, void* p) noexcept nogil:
    cdef Ctx* c = <Ctx*> p
    cdef double eta = exp(u)
    return (c.h2 - Hint_(c.m, max(0.0, 2.0 * eta - c.xi), 2.0 * eta + c.xi)) / eta


cdef double f_far2(double u, void* p) noexcept nogil:
    cdef Ctx* c = <Ctx*> p
    cdef double eta = exp(u)
    return omega_diff_(c.m, max(0.0, 2.0 * eta - c.xi), 2.0 * eta + c.xi) / eta


cdef void sort_pts(double* p, int n) noexcept nogil:
    cdef int i, j
    cdef double t
    for i in range(1, n):
        t = p[i]
        j = i - 1
        while j >= 0 and p[j] > t:
            p[j + 1] = p[j]
            j -= 1
        p[j + 1] = t


cdef class ModulusCore:
    """Scalar evaluator for one modulus plus its certificate integrals."""

    cdef Mod mod

    def __init__(self, int kind, int sym, double beta, double B, double kappa,
                 double gamma, double delta):
        cdef Mod* m = &self.mod
        m.kind = kind
        m.sym = sym
        m.beta = beta
        m.B = B
        m.kappa = kappa
        m.gamma = gamma
        m.delta = delta
        m.nk = 0
        m.n_panels = 0
        if kind == 0:
            m.c = B / (8.0 * kappa)
            m.log_delta = log(delta)
            m.m_delta = c_m(sym, beta, 1.0 / delta)
            m.xlin = delta
            build_table(m)
            m.omega_delta = B * delta - H_(m, delta)
            m.nk = 1
            m.kx = delta
            m.kj = omega_prime_right_(m, delta) - omega_prime_(m, delta)
        elif kind == 1:
            m.xlin = INFINITY
            m.omega_delta = 0.0
        elif kind == 2:
            m.xlin = delta
            m.omega_delta = B * delta
            m.nk = 1
            m.kx = delta
            m.kj = -B
        else:
            raise ValueError("unknown modulus kind %r" % kind)

    @property
    def kind(self): return self.mod.kind
    @property
    def sym(self): return self.mod.sym
    @property
    def beta(self): return self.mod.beta
    @property
    def B(self): return self.mod.B
    @property
    def kappa(self): return self.mod.kappa
    @property
    def gamma(self): return self.mod.gamma
    @property
    def delta(self): return self.mod.delta
    @property
    def c(self): return self.mod.c
    @property
    def m_delta(self): return self.mod.m_delta
    @property
    def xlin(self): return self.mod.xlin
    @property
    def omega_delta(self): return self.mod.omega_delta
    @property
    def n_panels(self): return self.mod.n_panels
    @property
    def kinks(self):
        if self.mod.nk:
            return ((self.mod.kx, self.mod.kj),)
        return ()

    def m(self, double r):
        return c_m(self.mod.sym, self.mod.beta, r)

    def H(self, double x):
        if self.mod.kind == 0:
            return H_(&self.mod, min(x, self.mod.delta))
        return 0.0

    def Hint(self, double a, double b):
        if self.mod.kind == 0:
            return Hint_(&self.mod, a, b)
        return 0.0

    cpdef double omega(self, double x):
        return omega_(&self.mod, x)

    cpdef double omega_prime(self, double x):
        return omega_prime_(&self.mod, x)

    cpdef double omega_prime_right(self, double x):
        return omega_prime_right_(&self.mod, x)

    cpdef double omega_second(self, double x):
        return omega_second_(&self.mod, x)

    cpdef double omega_diff(self, double a, double b):
        return omega_diff_(&self.mod, a, b)

    def velocity(self, double xi, double M, double epsrel, double epsabs, int limit):
        cdef Mod* m = &self.mod
        cdef Ctx ctx
        cdef double pts[4]
        cdef int n, s1, s2
        cdef double I1, e1, I2, e2, tail1, Y, umax, wY, tail_lo, tail_hi
        if m.kind == 1:
            raise ValueError("velocity modulus diverges for an unbounded linear modulus")
        ctx.m = m
        ctx.xi = xi
        ctx.h2 = 0.0
        with nogil:
            pts[0] = 0.0
            n = 1
            if m.nk and 0.0 < m.kx < xi:
                pts[n] = log(xi / m.kx)
                n += 1
            pts[n] = VEL_VMAX
            n += 1
            sort_pts(pts, n)
            s1 = gk_quad(f_vel1, &ctx, pts, n, epsabs, epsrel, limit, &I1, &e1)
            tail1 = 2.0 * m.B * xi * exp(-VEL_VMAX) * c_m(m.sym, m.beta, exp(VEL_VMAX) / xi)
            Y = M * max(xi, m.xlin)
            umax = log(Y / xi)
            pts[0] = 0.0
            n = 1
            if m.nk and xi < m.kx < Y:
                pts[n] = log(m.kx / xi)
                n += 1
            pts[n] = umax
            n += 1
            sort_pts(pts, n)
            s2 = gk_quad(f_vel2, &ctx, pts, n, epsabs, epsrel, limit, &I2, &e2)
            wY = omega_(m, Y)
            tail_lo = xi * c_m(m.sym, m.beta, 0.0) * wY / Y
            tail_hi = tail1 + xi * c_m(m.sym, m.beta, 1.0 / Y) * (wY / Y + omega_prime_right_(m, Y))
        if s1 < 0 or s2 < 0:
            raise MemoryError()
        return I1, I2, tail_lo, tail_hi, e1 + e2, bool(s1 == 1 and s2 == 1)

    def dissipation(self, double xi, double M, double epsrel, double epsabs, int limit):
        cdef Mod* m = &self.mod
        cdef Ctx ctx
        cdef double pr[3]
        cdef double pl[3]
        cdef double pts[6]
        cdef int nr_, nl_, n, sa = 1, sb = 1, sc = 1, sd = 1, i
        cdef double near = 0.0, err = 0.0, nr, er, nl, el, t, ev, smax, near_tail = 0.0
        cdef double far = 0.0, tail_hi = 0.0, start, eta_star, f1v, e1, f2v, e2, Y, eta
        if m.nk and fabs(m.kx - xi) <= 4.0 * EPMACH * xi:
            raise ValueError("dissipation is singular at a kink of omega")
        ctx.m = m
        ctx.xi = xi
        ctx.h2 = 0.0
        with nogil:
            if m.kind == 0:
                pr[0] = 0.0; pr[1] = NEAR_VMAX; nr_ = 2
                pl[0] = 0.0; pl[1] = NEAR_VMAX; nl_ = 2
                if m.nk:
                    if xi < m.kx < 2.0 * xi:
                        t = -log1p((m.kx - 2.0 * xi) / xi)
                        if 0.0 <= t <= NEAR_VMAX:
                            pr[nr_] = t
                            nr_ += 1
                    elif 0.0 < m.kx < xi:
                        t = -log1p(-m.kx / xi)
                        if 0.0 <= t <= NEAR_VMAX:
                            pl[nl_] = t
                            nl_ += 1
                sort_pts(pr, nr_)
                sort_pts(pl, nl_)
                sa = gk_quad(f_near_r, &ctx, pr, nr_, epsabs, epsrel, limit, &nr, &er)
                sb = gk_quad(f_near_l, &ctx, pl, nl_, epsabs, epsrel, limit, &nl, &el)
                near += nr + nl
                err += er + el
            if m.nk and xi < m.kx < 2.0 * xi:
                near += m.kj * 2.0 * phi(-log1p((m.kx - 2.0 * xi) / xi))
            elif m.nk and 0.0 < m.kx < xi:
                near += m.kj * 2.0 * phi(-log1p(-m.kx / xi))
            if m.kind == 0:
                ev = exp(-NEAR_VMAX)
                smax = max(fabs(omega_second_(m, xi * (1.0 + ev))),
                           fabs(omega_second_(m, xi * (1.0 - ev))))
                near_tail = 4.0 * smax * xi * (NEAR_VMAX + 1.0) * ev
            if m.xlin != INFINITY:
                start = 0.5 * xi
                if m.xlin > 2.0 * xi:
                    eta_star = 0.5 * (m.xlin - xi)
                    if m.kind == 0:
                        ctx.h2 = 2.0 * H_(m, xi)
                        pts[0] = log(start)
                        pts[1] = log(eta_star)
                        sc = gk_quad(f_far1, &ctx, pts, 2, epsabs, epsrel, limit, &f1v, &e1)
                        far += f1v
                        err += e1
                    start = eta_star
                Y = M * max(xi, m.xlin)
                pts[0] = log(start)
                pts[1] = log(Y)
                n = 2
                if m.nk:
                    eta = 0.5 * (m.kx + xi)
                    if start < eta < Y:
                        pts[n] = log(eta)
                        n += 1
                    eta = 0.5 * (m.kx - xi)
                    if start < eta < Y:
                        pts[n] = log(eta)
                        n += 1
                sort_pts(pts, n)
                sd = gk_quad(f_far2, &ctx, pts, n, epsabs, epsrel, limit, &f2v, &e2)
                far += f2v - 2.0 * omega_(m, xi) / start
                err += e2
                tail_hi = 2.0 * xi * omega_prime_right_(m, 2.0 * Y - xi) / Y
        if sa < 0 or sb < 0 or sc < 0 or sd < 0:
            raise MemoryError()
        if m.xlin == INFINITY:
            return near, 0.0, -near_tail, 0.0, err, bool(sa == 1 and sb == 1)
        return near, far, -near_tail, tail_hi, err, bool(sa == 1 and sb == 1 and sc == 1 and sd == 1)
