"""Numba acceleration switch.

Hot kernels are written once in loop form and compiled with ``numba.njit``
when available. Setting ``TORICNQS_NUMBA=0`` in the environment (before the
package is imported) selects the pure-numpy fallback implementations instead.
``TORICNQS_THREADS`` caps the numba thread pool.
"""

import os

# the bundled TBB is too old for numba and only produces a warning; prefer OpenMP
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _env_flag(name, default):
    value = os.environ.get(name)
    if value is None:
        return default
    return value.strip().lower() not in ("0", "false", "no", "off", "")


USE_NUMBA = HAVE_NUMBA and _env_flag("TORICNQS_NUMBA", True)

if HAVE_NUMBA and os.environ.get("TORICNQS_THREADS"):
    numba.set_num_threads(int(os.environ["TORICNQS_THREADS"]))


def njit(*args, **kwargs):
    """``numba.njit`` with ``cache=True``; identity decorator without numba."""
    kwargs.setdefault("cache", True)

    def wrap(fn):
        if not HAVE_NUMBA:
            return fn
        return numba.njit(**kwargs)(fn)

    if args and callable(args[0]):
        return wrap(args[0])
    return wrap


def backend():
    return "numba" if USE_NUMBA else "numpy"
