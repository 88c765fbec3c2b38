"""Bernstein polynomial basis on [0, 1].

The degree-M basis consists of the M+1 nonnegative polynomials
B_{m,M}(t) = binom(M, m) t^m (1-t)^(M-m), which form a partition of unity.
All kernel profiles in this package are linear combinations of them.
"""

import numpy as np

from .validation import check_int


def binomial(n, k):
    """binom(n, k) as a float, via the multiplicative recurrence.

    Exact in double precision for the basis orders in scope (n <= 60).
    """
    n = check_int("n", n, low=0)
    k = check_int("k", k, low=0, high=n)
    k = min(k, n - k)
    out = 1.0
    for j in range(1, k + 1):
        out = out * (n - k + j) / j
    return out


def bernstein_eval(m, order, t):
    """Evaluate B_{m,order} at t (scalar or array) in [0, 1]."""
    order = check_int("order", order, low=0)
    m = check_int("m", m, low=0, high=order)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("t must lie in [0, 1]")
    out = binomial(order, m) * t**m * (1.0 - t) ** (order - m)
    return out if out.ndim else float(out)


def bernstein_design(order, t):
    """Design matrix of all basis functions at the points t.

    Returns an array of shape (len(t), order+1) with columns B_{0,order}..B_{order,order}.
    """
    order = check_int("order", order, low=0)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("t must lie in [0, 1]")
    B = np.empty((t.size, order + 1))
    coef = 1.0
    for m in range(order + 1):
        if m > 0:
            coef = coef * (order - m + 1) / m
        B[:, m] = coef * t**m * (1.0 - t) ** (order - m)
    return B


def bernstein_moment(m, order):
    """Integral of B_{m,order} over [0, 1]; equals 1/(order+1) for every m."""
    order = check_int("order", order, low=0)
    check_int("m", m, low=0, high=order)
    return 1.0 / (order + 1)
