"""Optional numba acceleration.

Hot kernels are written twice: a pure-numpy version and an ``@njit`` loop
version. The loop version is used when numba imports and the environment
variable ``QUASIWORK_DISABLE_NUMBA`` is unset or falsy. Both are always
importable so tests and benchmarks can compare them directly.
"""
import os

_FALSY = {"", "0", "false", "no", "off"}


def _env_disabled() -> bool:
    return os.environ.get("QUASIWORK_DISABLE_NUMBA", "").strip().lower() not in _FALSY


try:
    import numba

    HAVE_NUMBA = True
    # the bundled TBB is too old for numba; OpenMP is thread-safe across callers
    if os.environ.get("NUMBA_THREADING_LAYER") is None:
        numba.config.THREADING_LAYER = "omp"
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _env_disabled()
prange = numba.prange if HAVE_NUMBA else range


def njit(*args, **kwargs):
    """``numba.njit`` with caching, or an identity decorator without numba."""
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    return numba.njit(*args, **kwargs)


def select(numba_impl, numpy_impl):
    """Pick the kernel implementation according to the active backend."""
    return numba_impl if USE_NUMBA else numpy_impl


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
