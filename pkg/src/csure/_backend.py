"""Numba/numpy backend selection.

Set ``CSURE_DISABLE_NUMBA=1`` before import to force the pure-numpy kernels.
Numba is also skipped when it is not installed.
"""
import os

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

_DISABLED = os.environ.get("CSURE_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}
USE_NUMBA = HAS_NUMBA and not _DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(func=None, **kwargs):
    """``numba.njit(cache=True)``, or ``None`` when numba is unavailable."""
    if not HAS_NUMBA:
        return None if func is not None else (lambda f: None)
    kwargs.setdefault("cache", True)
    dec = numba.njit(**kwargs)
    return dec(func) if func is not None else dec
