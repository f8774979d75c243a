"""Selects the RK4 backend at import.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``KURASYNC_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the NumPy implementation is used.
"""
import os

from . import _rk4_py

_force_py = os.environ.get("KURASYNC_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_py:
        raise ImportError("pure-Python backend requested")
    from ._rk4 import rk4_advance as _compiled
except ImportError:
    _compiled = None

if _compiled is not None:
    rk4_advance = _compiled
    BACKEND = "cython"
else:
    rk4_advance = _rk4_py.rk4_advance
    BACKEND = "python"

python_rk4_advance = _rk4_py.rk4_advance
compiled_rk4_advance = _compiled
