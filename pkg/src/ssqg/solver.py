"""Pseudo-spectral time integration of ``theta_t + u.grad theta + Lambda theta = 0``.

The dissipation is handled exactly by an integrating factor and the advection
by the three-stage strong-stability-preserving Runge-Kutta scheme of Shu and
Osher, written in the integrating-factor variables.
"""

import csv
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft

from .errors import BlowUpError, DomainError, PreconditionError
from .spectral import (Grid, SpectralField, from_modes, l2_norm, velocity_multiplier,
                       write_snapshot)
from .symbols import Symbol, conditions_pass

PRESETS = ("shear+vortex", "random-lowpass")
BLOWUP_GRAD = 1e12
DT_MAX = 0.1
DIAG_COLUMNS = ("t", "sup_theta", "sup_grad_theta", "l2", "moc_ratio", "dt")


@dataclass(frozen=True)
class MonitorConfig:
    """Modulus-of-continuity monitor; ``B=None`` fits B to the initial data."""
    B: float = None
    A: float = None
    kappa: float = None
    gamma: float = None
    B_scale: float = 1.0
    n_distances: int = 40
    require_initial_obeyed: bool = True


@dataclass(frozen=True)
class SolverConfig:
    N: int = 256
    symbol: Symbol = field(default_factory=Symbol)
    T: float = 5.0
    cfl: float = 0.5
    diag_every: int = 10
    snapshot_every: int = 0
    initial: object = "shear+vortex"
    seed: int = 0
    amplitude: float = 1.0
    dt: float = None
    advection: bool = True
    monitor: MonitorConfig = None
    workers: int = None

    def __post_init__(self):
        problems = []
        if not (isinstance(self.N, int) and self.N >= 16 and self.N % 2 == 0):
            problems.append(f"N must be an even integer >= 16, got {self.N!r}")
        if not (self.T > 0 and math.isfinite(self.T)):
            problems.append(f"T must be positive, got {self.T!r}")
        if not 0 < self.cfl <= 1:
            problems.append(f"cfl must lie in (0, 1], got {self.cfl!r}")
        if self.diag_every < 1 or self.snapshot_every < 0:
            problems.append("diag_every must be >= 1 and snapshot_every >= 0")
        if self.dt is not None and not self.dt > 0:
            problems.append("a fixed dt must be positive")
        if isinstance(self.initial, str) and self.initial not in PRESETS:
            problems.append(f"unknown preset {self.initial!r}; expected one of {PRESETS}")
        if problems:
            raise DomainError("; ".join(problems))

    @property
    def grid(self):
        return Grid(self.N)


@dataclass(frozen=True)
class State:
    time: float
    theta: SpectralField

    @property
    def grid(self):
        return self.theta.grid

    def values(self):
        return sfft.ifft2(self.theta.coeffs).real * self.theta.coeffs.size


def initial_state(config):
    g = config.grid
    if isinstance(config.initial, str):
        X, Y = g.coords()
        if config.initial == "shear+vortex":
            theta = np.sin(X) * np.sin(Y) + np.cos(Y)
        else:
            theta = _random_lowpass(g, config.seed)
        c = sfft.fft2(theta) / theta.size
    else:
        c = from_modes(g, config.initial).coeffs
    return State(0.0, SpectralField(g, config.amplitude * c))


def _random_lowpass(g, seed):
    rng = np.random.default_rng(seed)
    modes = []
    for z1 in range(-4, 5):
        for z2 in range(-4, 5):
            # one representative of every +-zeta pair
            if 0 < z1 * z1 + z2 * z2 <= 16 and (z1 > 0 or (z1 == 0 and z2 > 0)):
                modes.append(((z1, z2), complex(rng.standard_normal(), rng.standard_normal())))
    c = from_modes(g, modes).coeffs
    v = sfft.ifft2(c).real * c.size
    return v / np.max(np.abs(v))


class _Operators:
    """Per-grid constant arrays used by every stage."""

    def __init__(self, grid, symbol, workers):
        self.grid = grid
        self.workers = workers
        self.vm = velocity_multiplier(grid, symbol)
        self.ikx = 1j * grid.kx
        self.iky = 1j * grid.ky
        self.mask = grid.dealias_mask
        self.kabs = grid.kabs
        self.n2 = grid.N * grid.N

    def ifft(self, c):
        return sfft.ifft2(c, workers=self.workers).real * self.n2

    def rhs(self, c, advection=True):
        """``-(u.grad theta)^`` (dealiased, mean mode zero), plus sup |u| and sup |grad theta|."""
        if not advection:
            return np.zeros_like(c), 0.0, 0.0
        u1 = self.ifft(self.vm.f1 * c)
        u2 = self.ifft(self.vm.f2 * c)
        tx = self.ifft(self.ikx * c)
        ty = self.ifft(self.iky * c)
        nl = sfft.fft2(u1 * tx + u2 * ty, workers=self.workers) / self.n2
        nl = np.where(self.mask, -nl, 0.0)
        nl[0, 0] = 0.0
        umax = float(np.sqrt(np.max(u1 * u1 + u2 * u2)))
        gmax = float(np.sqrt(np.max(tx * tx + ty * ty)))
        return nl, umax, gmax

    def decay(self, h):
        return np.exp(-self.kabs * h)


_OPS = {}


def _ops(grid, symbol, workers=None):
    key = (grid.N, symbol, workers)
    if key not in _OPS:
        _OPS[key] = _Operators(grid, symbol, workers)
    return _OPS[key]


def _ssp_rk3(ops, c, dt, n0, advection):
    e1, eh = ops.decay(dt), ops.decay(dt / 2)
    c1 = e1 * (c + dt * n0)
    n1 = ops.rhs(c1, advection)[0]
    c2 = 0.75 * eh * c + 0.25 / eh * (c1 + dt * n1)
    n2 = ops.rhs(c2, advection)[0]
    return (1.0 / 3.0) * e1 * c + (2.0 / 3.0) * eh * (c2 + dt * n2)


def step(state, dt, symbol=Symbol(), advection=True, workers=None):
    """One integrating-factor SSP-RK3 step of size ``dt``."""
    if not dt > 0:
        raise DomainError("time step must be positive")
    ops = _ops(state.grid, symbol, workers)
    c = np.where(ops.mask, state.theta.coeffs, 0.0)
    n0 = ops.rhs(c, advection)[0]
    new = _ssp_rk3(ops, c, dt, n0, advection)
    if not np.all(np.isfinite(new)):
        raise BlowUpError("non-finite coefficients after a time step", state=state)
    return State(state.time + dt, SpectralField(state.grid, new))


def refined_sup(state, candidates=8, iterations=8):
    """sup |theta| of the trigonometric interpolant.

    The largest grid local maxima of |theta| are polished by Newton's method on
    the interpolant, so the value does not jitter as the extremum moves between
    grid points.
    """
    g = state.grid
    c = state.theta.coeffs
    v = state.values()
    a = np.abs(v)
    peak = np.ones_like(a, dtype=bool)
    for sy in (-1, 0, 1):
        for sx in (-1, 0, 1):
            if sx or sy:
                peak &= a >= np.roll(a, (sy, sx), (0, 1))
    idx = np.flatnonzero(peak)
    idx = idx[np.argsort(a.ravel()[idx])[::-1][:candidates]]
    nz = np.abs(c) > 0
    kx, ky, cc = g.kx[nz], g.ky[nz], c[nz]
    best = float(a.max())
    for flat in idx:
        iy, ix = divmod(int(flat), g.N)
        p = np.array([ix * g.dx, iy * g.dx])
        sgn = math.copysign(1.0, v[iy, ix])
        for _ in range(iterations):
            e = cc * np.exp(1j * (kx * p[0] + ky * p[1]))
            grad = np.array([np.sum(1j * kx * e).real, np.sum(1j * ky * e).real])
            hxx = -np.sum(kx * kx * e).real
            hxy = -np.sum(kx * ky * e).real
            hyy = -np.sum(ky * ky * e).real
            H = np.array([[hxx, hxy], [hxy, hyy]])
            if not (np.linalg.det(H) > 0 and sgn * hxx < 0):
                break
            try:
                dp = np.linalg.solve(H, grad)
            except np.linalg.LinAlgError:
                break
            if np.hypot(*dp) > g.dx:
                break
            p = p - dp
            if np.hypot(*dp) < 1e-14:
                break
        val = abs(float(np.sum(cc * np.exp(1j * (kx * p[0] + ky * p[1]))).real))
        best = max(best, val)
    return best


def default_lags(N, n_distances=40):
    """Axis and diagonal grid vectors with lengths log-spaced from one cell to pi."""
    axis_n = np.unique(np.round(np.geomspace(1, N // 2, n_distances)).astype(int))
    diag_n = np.unique(np.round(np.geomspace(1, int(N / (2 * math.sqrt(2))), n_distances)).astype(int))
    lags = []
    for n in axis_n:
        lags += [(int(n), 0), (0, int(n))]
    for n in diag_n:
        lags += [(int(n), int(n)), (int(n), -int(n))]
    return lags


def torus_distance(N, lag):
    dx = 2 * math.pi / N
    a, b = (abs(int(s)) % N for s in lag)
    return dx * math.hypot(min(a, N - a), min(b, N - b))


def moc_scan(values, omega, lags):
    """``(ratio, (iy, ix), lag)`` maximising ``|theta(x+h) - theta(x)| / omega(|h|)``."""
    N = values.shape[0]
    best = (0.0, (0, 0), tuple(lags[0]) if lags else (0, 0))
    for lag in lags:
        d = torus_distance(N, lag)
        if d == 0.0:
            raise DomainError(f"lag {lag} is the zero vector on the torus")
        hx, hy = lag
        diff = np.abs(np.roll(values, (-hy, -hx), (0, 1)) - values)
        k = int(np.argmax(diff))
        r = float(diff.flat[k]) / omega(d)
        if r > best[0]:
            best = (r, divmod(k, N), (int(hx), int(hy)))
    return best


def moc_ratio(state, inst, lags=None):
    values = state.values() if isinstance(state, State) else np.asarray(state)
    lags = default_lags(values.shape[0]) if lags is None else lags
    return moc_scan(values, inst.omega, lags)[0]


@dataclass
class DiagnosticsRow:
    t: float
    sup_theta: float
    sup_grad_theta: float
    l2: float
    moc_ratio: float
    dt: float
    argmax: tuple = None

    def as_csv(self):
        return [repr(float(getattr(self, k))) for k in DIAG_COLUMNS]


@dataclass
class BreakthroughEvent:
    t: float
    ratio: float
    x: tuple
    h: tuple


@dataclass
class RunResult:
    state: State
    diagnostics: list
    snapshots: list
    instance: object = None
    lags: list = None
    event: BreakthroughEvent = None
    config: SolverConfig = None


def monitor_instance(config, theta0):
    """Modulus instance used by the monitor, fitting B to the data if asked."""
    from .kernel import estimate_A
    from .moduli import ModulusFamily, find_B_for_data
    from .spectral import RealField, sup_norms
    mon = config.monitor
    A = mon.A if mon.A is not None else estimate_A(config.symbol)
    fam = ModulusFamily.auto(config.symbol, A)
    if mon.kappa is not None or mon.gamma is not None:
        fam = replace(fam, kappa=mon.kappa if mon.kappa is not None else fam.kappa,
                      gamma=mon.gamma if mon.gamma is not None else fam.gamma)
    B = mon.B
    if B is None:
        sup, grad = sup_norms(RealField(config.grid, theta0))
        B = find_B_for_data(fam, sup, grad)
    return fam.instance(B * mon.B_scale)


def run(config, on_diagnostics=None):
    """Integrate to ``config.T``; a blow-up raises with the partial output attached."""
    if not conditions_pass(config.symbol):
        warnings.warn(f"{config.symbol.label()} fails some growth conditions", RuntimeWarning)
    state = initial_state(config)
    ops = _ops(state.grid, config.symbol, config.workers)
    c = np.where(ops.mask, state.theta.coeffs, 0.0)
    state = State(0.0, SpectralField(state.grid, c))

    inst = lags = None
    if config.monitor is not None:
        inst = monitor_instance(config, state.values())
        lags = default_lags(config.N, config.monitor.n_distances)

    diags, snaps = [], []
    result = RunResult(state, diags, snaps, inst, lags, None, config)

    def record(st, dt, grad):
        ratio, arg = 0.0, None
        if inst is not None:
            ratio, x, h = moc_scan(st.values(), inst.omega, lags)
            arg = (x, h)
        row = DiagnosticsRow(st.time, refined_sup(st), grad, l2_norm(st.theta), ratio, dt, arg)
        diags.append(row)
        if on_diagnostics is not None:
            on_diagnostics(row)
        return row

    def snap(st):
        snaps.append((st.time, st.values()))

    n0, umax, gmax = ops.rhs(c, True)
    if not config.advection:
        n0 = np.zeros_like(c)
    first = record(state, 0.0, gmax)
    if inst is not None and config.monitor.require_initial_obeyed and first.moc_ratio >= 1.0:
        raise PreconditionError(
            f"initial data does not obey omega_B (ratio {first.moc_ratio:.6g} >= 1); B was not fitted")
    if config.snapshot_every:
        snap(state)

    nstep = 0
    t, T = 0.0, config.T
    while t < T * (1 - 1e-14):
        if config.dt is not None:
            dt = config.dt
        else:
            dt = min(DT_MAX, config.cfl * state.grid.dx / max(1.0, umax))
        dt = min(dt, T - t)
        new = _ssp_rk3(ops, c, dt, n0, config.advection)
        if not np.all(np.isfinite(new)):
            raise BlowUpError(f"non-finite coefficients at t = {t + dt:g}", state=state,
                              diagnostics=diags)
        nstep += 1
        t = T if abs(T - (t + dt)) < 1e-12 * T else t + dt
        c = new
        state = State(t, SpectralField(state.grid, c))
        n0, umax, gmax = ops.rhs(c, True)
        if not config.advection:
            n0 = np.zeros_like(c)
        if not (math.isfinite(gmax) and gmax <= BLOWUP_GRAD):
            raise BlowUpError(f"sup |grad theta| = {gmax:g} at t = {t:g}", state=state,
                              diagnostics=diags)
        last = t >= T
        if nstep % config.diag_every == 0 or last:
            record(state, dt, gmax)
        if config.snapshot_every and (nstep % config.snapshot_every == 0 or last):
            snap(state)
    result.state = state
    if inst is not None:
        result.event = detect_breakthrough(result, inst)
    return result


def detect_breakthrough(result, inst=None, require_initial_obeyed=False):
    """First diagnostics time with moc ratio >= 1, or None."""
    rows = result.diagnostics
    if not rows:
        return None
    if require_initial_obeyed and rows[0].moc_ratio >= 1.0:
        raise PreconditionError("initial moc ratio >= 1: B was not fitted to the data")
    for row in rows:
        if row.moc_ratio >= 1.0:
            x, h = row.argmax if row.argmax else ((0, 0), (0, 0))
            dx = 2 * math.pi / result.state.grid.N
            return BreakthroughEvent(row.t, row.moc_ratio, (x[1] * dx, x[0] * dx), h)
    return None


def write_diagnostics(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DIAG_COLUMNS)
        for row in rows:
            w.writerow(row.as_csv())


def write_snapshots(result, directory):
    import os
    os.makedirs(directory, exist_ok=True)
    paths = []
    for i, (t, values) in enumerate(result.snapshots):
        p = os.path.join(directory, f"theta_{i:05d}.ssqg")
        write_snapshot(p, result.state.grid, t, values)
        paths.append(p)
    return paths
