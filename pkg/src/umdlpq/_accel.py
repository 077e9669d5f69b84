"""Numba shim.

Kernels in :mod:`umdlpq.kernels` come in two flavours: an explicit-loop
version compiled with ``numba.njit`` and a vectorised numpy version.  The
numba path is used when numba imports cleanly and the environment variable
``UMDLPQ_DISABLE_NUMBA`` is unset (or set to ``0``/``false``).
"""

import os

_FLAG = os.environ.get("UMDLPQ_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG not in ("", "0", "false", "no")

try:
    if DISABLED_BY_ENV:
        raise ImportError("numba disabled by UMDLPQ_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        # bare @njit and @njit(...) both become the identity
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def deco(fn):
            return fn

        return deco


DEFAULT_BACKEND = "numba" if HAVE_NUMBA else "numpy"
