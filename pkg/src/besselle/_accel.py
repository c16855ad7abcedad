"""Optional numba acceleration.

Hot numeric kernels in this package are written twice: a loop-based version
compiled with ``numba.njit`` and a vectorized pure-numpy version.  Set the
environment variable ``BESSELLE_NO_NUMBA=1`` to force the numpy path (useful
for debugging and for the numba-vs-numpy benchmark).
"""

import os

FORCE_NUMPY = os.environ.get("BESSELLE_NO_NUMBA", "0").lower() in ("1", "true", "yes")

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not FORCE_NUMPY


def maybe_njit(*args, **kwargs):
    """njit when numba is active, identity decorator otherwise."""

    def decorate(func):
        if USE_NUMBA:
            return _njit(*args, **kwargs)(func)
        return func

    if len(args) == 1 and callable(args[0]) and not kwargs:
        func, args = args[0], ()
        return decorate(func)
    return decorate
