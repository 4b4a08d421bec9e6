"""Numba switch.

Kernels are compiled with numba when it is importable, unless the
environment variable ``GRIDFREE_DISABLE_NUMBA`` is set to a truthy value.
In that case ``njit`` is a no-op and the kernels run as plain Python/NumPy.
"""

import os

_FLAG = "GRIDFREE_DISABLE_NUMBA"


def _disabled():
    return os.environ.get(_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    if _disabled():
        raise ImportError
    import numba as _numba
except ImportError:  # pragma: no cover - depends on environment
    _numba = None

HAVE_NUMBA = _numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def backend():
    return "numba" if HAVE_NUMBA else "numpy"
