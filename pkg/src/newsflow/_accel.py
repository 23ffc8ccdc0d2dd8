"""JIT selection for the numeric kernels.

Set ``NEWSFLOW_NO_NUMBA=1`` to force the pure-numpy fallbacks (useful for
debugging, profiling and for comparing both paths in the benchmarks).
"""
import os

__all__ = ["USE_NUMBA", "njit"]


def _env_disabled():
    return os.environ.get("NEWSFLOW_NO_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = not _env_disabled()

if USE_NUMBA:
    try:
        from numba import njit as _numba_njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False

if USE_NUMBA:

    def njit(func):
        return _numba_njit(cache=True, nogil=True)(func)

else:

    def njit(func):
        return func
