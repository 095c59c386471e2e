"""Numba switch.

Set ``TWOBODY_DISABLE_NUMBA=1`` to force the pure-numpy kernels. The flag is
read once at import time; both kernel families stay importable either way so
they can be compared side by side.
"""
import os

try:
    import numba as nb

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    nb = None
    HAVE_NUMBA = False

_FLAG = os.environ.get("TWOBODY_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise."""
    if HAVE_NUMBA:
        return nb.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
