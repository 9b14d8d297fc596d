"""Optional numba acceleration.

Set ``FBCONTROL_DISABLE_NUMBA=1`` to run every kernel as plain Python/numpy.
"""
import os

_flag = os.environ.get("FBCONTROL_DISABLE_NUMBA", "").strip().lower()

try:
    import numba

    USE_NUMBA = _flag not in ("1", "true", "yes", "on")
except ImportError:  # pragma: no cover
    numba = None
    USE_NUMBA = False


def jit(fn):
    """``numba.njit`` when enabled, identity otherwise.

    The original function stays reachable as ``.py_func`` in both modes.
    """
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    fn.py_func = fn
    return fn
