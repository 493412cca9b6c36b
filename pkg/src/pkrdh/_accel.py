"""Optional numba acceleration.

Set ``PKRDH_DISABLE_NUMBA=1`` to force the pure-numpy kernels.  The flag is read
once at import time.
"""
import os

_disabled = os.environ.get("PKRDH_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _disabled:
        raise ImportError
    import numba
except ImportError:
    numba = None

USE_NUMBA = numba is not None


def njit(fn):
    """``numba.njit(cache=True)`` when numba is enabled, identity otherwise."""
    if numba is None:
        return fn
    return numba.njit(cache=True)(fn)
