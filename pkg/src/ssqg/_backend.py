"""Pick the compiled kernel core when available, else the pure-Python twin.

Set ``SSQG_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py as python_core

core = python_core
if not os.environ.get("SSQG_PURE_PYTHON"):
    try:
        from . import _kernels as core  # noqa: F811
    except ImportError:
        core = python_core

BACKEND = core.BACKEND
ModulusCore = core.ModulusCore

__all__ = ["BACKEND", "ModulusCore", "core", "python_core"]
