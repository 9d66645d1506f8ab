"""Numba acceleration switch.

Hot lattice kernels are compiled with numba's @njit by default.  Setting the
environment variable NEUROSWARM_NO_NUMBA=1 (before import) selects the pure
numpy twin implementations instead; both paths compute bit-identical results.
"""

import os


def _disabled() -> bool:
    return os.environ.get("NEUROSWARM_NO_NUMBA", "").strip().lower() in {
        "1", "true", "yes", "on",
    }


NUMBA_DISABLED = _disabled()

if NUMBA_DISABLED:
    HAVE_NUMBA = False
else:
    try:
        import numba  # noqa: F401
        HAVE_NUMBA = True
    except ImportError:
        HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED


def jit_or_fallback(func):
    """Return an njit-compiled version of func, or func itself when numba is off."""
    if USE_NUMBA:
        from numba import njit
        return njit(cache=True, nogil=True)(func)
    return func
