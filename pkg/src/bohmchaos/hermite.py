"""Physicists' Hermite polynomials via the stable three-term recurrence."""

import numpy as np

__all__ = ["hermite_value", "hermite_all"]


def hermite_all(n_max: int, k):
    """Values H_0(k) .. H_{n_max}(k) stacked along the first axis.

    ``k`` may be a scalar or an ndarray; the recurrence
    H_{n+1} = 2k H_n - 2n H_{n-1} is applied termwise.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    k = np.asarray(k, dtype=float)
    out = np.empty((n_max + 1,) + k.shape, dtype=float)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = 2.0 * k
    for n in range(1, n_max):
        out[n + 1] = 2.0 * k * out[n] - 2.0 * n * out[n - 1]
    if not np.all(np.isfinite(out)):
        raise OverflowError("Hermite recurrence overflowed for n_max=%d" % n_max)
    return out


def hermite_value(n: int, k):
    """H_n(k) for a scalar or array argument.

    Raises OverflowError if an intermediate value leaves the representable
    range (does not happen for n <= 24 and |k| <= 20).
    """
    if n < 0:
        raise ValueError("polynomial degree must be >= 0")
    values = hermite_all(n, k)[n]
    if values.ndim == 0:
        return float(values)
    return values
