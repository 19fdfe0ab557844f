"""Optional numba acceleration.

Hot loops are written once as plain Python over numpy arrays and compiled
with ``numba.njit`` when numba is importable and not disabled.  Setting the
environment variable ``SCATLAB_DISABLE_NUMBA=1`` forces the pure-numpy code
paths, which every accelerated kernel provides.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_FALSEY = {"", "0", "false", "no", "off"}


def numba_enabled():
    """True when compiled kernels should be used (read at call time)."""
    if numba is None:
        return False
    return os.environ.get("SCATLAB_DISABLE_NUMBA", "").strip().lower() in _FALSEY


def njit(func):
    """Compile ``func`` with numba if available; otherwise return it unchanged."""
    if numba is None:
        return func
    return numba.njit(cache=True, nogil=True)(func)
