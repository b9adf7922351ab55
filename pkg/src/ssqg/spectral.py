"""Fourier toolbox on the periodic square [0, 2 pi)^2.

Arrays are indexed ``[iy, ix]`` so that the row-major flattening has x fastest.
Spectral coefficients are normalised so that mode 0 is the mean value,
``f(x) = sum_zeta F[zeta] exp(i zeta.x)``.
"""

import math
import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import DomainError, NumericalError
from .symbols import Symbol, eval_m

SNAPSHOT_MAGIC = "SSQG1"


@dataclass(frozen=True)
class Grid:
    N: int

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or isinstance(self.N, bool):
            raise DomainError(f"grid size must be an integer, got {self.N!r}")
        if self.N < 16 or self.N % 2:
            raise DomainError(f"grid size must be even and >= 16, got {self.N}")

    @property
    def dx(self):
        return 2 * math.pi / self.N

    @cached_property
    def k(self):
        """Integer wavenumbers in [-N/2, N/2) in FFT order."""
        return np.fft.fftfreq(self.N, 1.0 / self.N)

    @cached_property
    def kx(self):
        return np.broadcast_to(self.k[None, :], (self.N, self.N))

    @cached_property
    def ky(self):
        return np.broadcast_to(self.k[:, None], (self.N, self.N))

    @cached_property
    def kabs(self):
        return np.hypot(self.kx, self.ky)

    @cached_property
    def dealias_mask(self):
        return (np.abs(self.kx) <= self.N / 3) & (np.abs(self.ky) <= self.N / 3)

    def coords(self):
        x = np.arange(self.N) * self.dx
        return np.meshgrid(x, x)  # X[iy, ix] = x_ix, Y[iy, ix] = y_iy

    def index(self, zeta1, zeta2):
        """Array position of the wavenumber pair ``(zeta1, zeta2)``."""
        return int(zeta2) % self.N, int(zeta1) % self.N


@dataclass(frozen=True)
class RealField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.N, self.grid.N):
            raise DomainError(f"field shape {v.shape} does not match N={self.grid.N}")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class SpectralField:
    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.grid.N, self.grid.N):
            raise DomainError(f"coefficient shape {c.shape} does not match N={self.grid.N}")
        object.__setattr__(self, "coeffs", c)

    @property
    def mean(self):
        return self.coeffs[0, 0].real

    def __getitem__(self, zeta):
        return self.coeffs[self.grid.index(*zeta)]

    def hermitian_defect(self):
        """max |F(zeta) - conj F(-zeta)| over the modes that have a partner."""
        c = self.coeffs
        partner = np.conj(np.roll(np.flip(c, (0, 1)), 1, (0, 1)))
        return float(np.max(np.abs(c - partner)))


def _fft2(a, workers=None):
    return sfft.fft2(a, workers=workers) / a.size


def _ifft2(c, workers=None):
    return sfft.ifft2(c, workers=workers).real * c.size


def forward(f, workers=None):
    if not np.all(np.isfinite(f.values)):
        raise NumericalError("non-finite values in grid field")
    return SpectralField(f.grid, _fft2(f.values, workers))


def inverse(F, workers=None):
    if not np.all(np.isfinite(F.coeffs)):
        raise NumericalError("non-finite spectral coefficients")
    return RealField(F.grid, _ifft2(F.coeffs, workers))


def imaginary_residue(F):
    """Largest imaginary part of the inverse transform; zero for Hermitian input."""
    return float(np.max(np.abs(sfft.ifft2(F.coeffs).imag * F.coeffs.size)))


def radial_values(grid, sigma, zero_mode=None):
    """``sigma(|zeta|)`` on the lattice; ``zero_mode`` overrides the value at zeta = 0."""
    r = grid.kabs
    if zero_mode is None:
        return np.asarray(sigma(r), dtype=float)
    out = np.zeros_like(r)
    nz = r > 0
    out[nz] = sigma(r[nz])
    out[0, 0] = zero_mode
    return out


def apply_radial_multiplier(F, sigma, zero_mode=None):
    return SpectralField(F.grid, F.coeffs * radial_values(F.grid, sigma, zero_mode))


def Lambda(F):
    return apply_radial_multiplier(F, lambda r: r)


def Lambda_inv(F):
    return apply_radial_multiplier(F, lambda r: 1.0 / r, zero_mode=0.0)


def m_of_Lambda(F, symbol):
    return apply_radial_multiplier(F, lambda r: eval_m(symbol, r))


@dataclass(frozen=True)
class VelocityMultiplier:
    """Coefficient-wise factors with ``U_i = factor_i * theta^``."""
    f1: np.ndarray
    f2: np.ndarray


_VEL_CACHE = {}


def velocity_multiplier(grid, symbol):
    key = (grid.N, symbol)
    if key not in _VEL_CACHE:
        r = grid.kabs
        w = np.zeros_like(r)
        nz = r > 0
        w[nz] = eval_m(symbol, r[nz]) / r[nz]
        _VEL_CACHE[key] = VelocityMultiplier(-1j * grid.ky * w, 1j * grid.kx * w)
    return _VEL_CACHE[key]


def velocity_from_theta(Theta, symbol=Symbol()):
    """``u = grad-perp Lambda^-1 m(Lambda) theta``; sin(x) maps to (0, cos(x))."""
    vm = velocity_multiplier(Theta.grid, symbol)
    return SpectralField(Theta.grid, vm.f1 * Theta.coeffs), SpectralField(Theta.grid, vm.f2 * Theta.coeffs)


def divergence(U1, U2):
    g = U1.grid
    return SpectralField(g, 1j * g.kx * U1.coeffs + 1j * g.ky * U2.coeffs)


def gradient(F):
    g = F.grid
    return SpectralField(g, 1j * g.kx * F.coeffs), SpectralField(g, 1j * g.ky * F.coeffs)


def dealias(F):
    return SpectralField(F.grid, np.where(F.grid.dealias_mask, F.coeffs, 0.0))


def sup_norms(f, workers=None):
    """(max |f|, max |grad f|) on the grid, the gradient taken spectrally."""
    F = forward(f, workers)
    gx, gy = gradient(F)
    g = np.hypot(_ifft2(gx.coeffs, workers), _ifft2(gy.coeffs, workers))
    return float(np.max(np.abs(f.values))), float(np.max(g))


def l2_norm(F):
    """Root mean square of the field (Parseval)."""
    return float(math.sqrt(np.sum(np.abs(F.coeffs) ** 2)))


def from_modes(grid, modes):
    """Field from ``[((z1, z2), amp), ...]``, adding the conjugate partner of every mode."""
    c = np.zeros((grid.N, grid.N), dtype=complex)
    for (z1, z2), a in modes:
        if max(abs(z1), abs(z2)) >= grid.N // 2:
            raise DomainError(f"mode {(z1, z2)} is not resolved on N={grid.N}")
        if z1 == 0 and z2 == 0:
            c[0, 0] += complex(a).real
            continue
        c[grid.index(z1, z2)] += a
        c[grid.index(-z1, -z2)] += np.conj(a)
    return SpectralField(grid, c)


def write_snapshot(path, grid, t, values):
    values = np.asarray(values, dtype="<f8")
    if values.shape != (grid.N, grid.N):
        raise DomainError("snapshot values do not match the grid")
    with open(path, "wb") as fh:
        fh.write(f"{SNAPSHOT_MAGIC} N={grid.N} t={float(t)!r} fields=theta\n".encode("ascii"))
        fh.write(np.ascontiguousarray(values).tobytes())


_HEADER = re.compile(rb"^SSQG1 N=(\d+) t=(\S+) fields=theta$")


def read_snapshot(path, N=None):
    """Returns ``(t, values)``; rejects a file whose N differs from the expected one."""
    with open(path, "rb") as fh:
        m = _HEADER.match(fh.readline().rstrip(b"\n"))
        if not m:
            raise DomainError(f"{path}: not an SSQG1 snapshot")
        n, t = int(m.group(1)), float(m.group(2))
        if N is not None and n != N:
            raise DomainError(f"{path}: snapshot has N={n}, expected N={N}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * n:
        raise DomainError(f"{path}: expected {n * n} values, found {data.size}")
    return t, data.reshape(n, n).copy()
