"""Kernel backend selection.

The hot numerical kernels in :mod:`bohmchaos.kernels` are compiled with
numba when available.  Setting the environment variable ``BOHMCHAOS_JIT``
to ``numpy`` (or ``0``/``off``) before import selects the pure-numpy
fallback path instead; ``numba`` forces compilation and raises if numba
cannot be imported.  ``benchmarks/compare_backends.py`` times both paths.
"""

import os

_FLAG = os.environ.get("BOHMCHAOS_JIT", "auto").strip().lower()

NUMBA_AVAILABLE = False
if _FLAG not in ("numpy", "0", "off", "false", "no"):
    try:
        import numba

        NUMBA_AVAILABLE = True
    except ImportError:
        NUMBA_AVAILABLE = False

if _FLAG in ("numba", "jit", "1", "on") and not NUMBA_AVAILABLE:
    raise ImportError("BOHMCHAOS_JIT=%s but numba is not importable" % _FLAG)

JIT_ENABLED = NUMBA_AVAILABLE


def _identity_decorator(func=None, **kwargs):
    if func is not None:
        return func

    def wrap(f):
        return f

    return wrap


if JIT_ENABLED:
    from numba import prange

    def jit(func=None, *, parallel=False):
        """numba.njit with the project defaults (cached, nopython)."""
        decorator = numba.njit(cache=True, parallel=parallel)
        if func is not None:
            return decorator(func)
        return decorator

else:
    prange = range
    jit = _identity_decorator


def backend_name():
    return "numba" if JIT_ENABLED else "numpy"
