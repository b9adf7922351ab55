"""Moduli-of-continuity certificates and a pseudo-spectral solver for
slightly supercritical surface quasi-geostrophic dynamics.

The velocity law is ``u = grad_perp Lambda^{-1} m(Lambda) theta`` with a radial
symbol ``m`` growing slower than ``ln ln``; see ``ssqg.symbols``.
"""

from ._backend import BACKEND
from .errors import (BlowUpError, CertificationError, ConfigError, DomainError,
                     NumericalError, PreconditionError, QuadratureError, SSQGError)
from .symbols import Symbol

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Symbol",
    "SSQGError",
    "DomainError",
    "PreconditionError",
    "ConfigError",
    "CertificationError",
    "NumericalError",
    "QuadratureError",
    "BlowUpError",
]
