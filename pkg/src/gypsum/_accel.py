"""numba shim: ``njit`` compiles when numba is importable and GYPSUM_DISABLE_NUMBA is unset.

With the flag set (or numba missing) the decorated functions run as plain Python, and
callers that care pick their vectorized numpy path instead via ``USE_NUMBA``.
"""
import os

_DISABLED = os.environ.get("GYPSUM_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit, prange
    USE_NUMBA = True
except ImportError:
    USE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(func):
            return func
        return wrap

    prange = range
