"""Backend selection for the hot numeric kernels.

Every kernel in this package exists twice: a numba ``@njit`` loop version and
a vectorised numpy version.  The numba path is used when numba imports and
``CSIE_DISABLE_NUMBA`` is unset (or ``0``); otherwise the numpy path runs.
The choice is made once at import time, but :func:`use_numba` lets tests and
benchmarks switch between the two explicitly.
"""

import os

try:
    import numba
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False

_FLAG = os.environ.get("CSIE_DISABLE_NUMBA", "0").strip().lower()
_ENABLED = _HAVE_NUMBA and _FLAG in ("", "0", "false", "no")


def njit(*args, **kwargs):
    """``numba.njit`` with caching, or an identity decorator without numba."""
    if not _HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def numba_available():
    return _HAVE_NUMBA


def numba_enabled():
    """True when kernels dispatch to the compiled path."""
    return _ENABLED


def use_numba(flag):
    """Force the backend; returns the previous setting."""
    global _ENABLED
    prev = _ENABLED
    _ENABLED = bool(flag) and _HAVE_NUMBA
    return prev
