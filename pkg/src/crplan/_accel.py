"""numba switch for the hot kernels.

Kernels are written so that the same source runs under ``numba.njit`` or as
plain numpy. Set ``CRPLAN_DISABLE_NUMBA=1`` before import to force the
numpy path (used by the benchmark and for debugging).
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

DISABLED = os.environ.get("CRPLAN_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")
ENABLED = numba is not None and not DISABLED


def njit(func=None, **options):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""
    options.setdefault("cache", True)

    def wrap(f):
        if ENABLED:
            return numba.njit(**options)(f)
        return f

    if func is None:
        return wrap
    return wrap(func)


def backend() -> str:
    return "numba" if ENABLED else "numpy"
