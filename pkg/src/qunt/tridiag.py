"""Tridiagonal solver (Thomas algorithm).

Rows are written as ``lower[i] * x[i-1] + diag[i] * x[i] + upper[i] * x[i+1] = rhs[i]``
with ``lower[0]`` and ``upper[-1]`` ignored.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .errors import SingularSystemError

__all__ = ["SingularSystemError", "solve_tridiagonal", "thomas"]


@njit(cache=True)
def thomas(lower, diag, upper, rhs, out):
    """Solve in place into ``out``. Returns False on a bad pivot."""
    n = diag.shape[0]
    cp = np.empty(n)
    dp = np.empty(n)
    piv = diag[0]
    if piv == 0.0 or not np.isfinite(piv):
        return False
    cp[0] = upper[0] / piv
    dp[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - lower[i] * cp[i - 1]
        if piv == 0.0 or not np.isfinite(piv):
            return False
        cp[i] = upper[i] / piv
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / piv
    out[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]
    return True


def solve_tridiagonal(lower, diag, upper, rhs):
    """Solve a tridiagonal system without pivoting.

    Parameters
    ----------
    lower, diag, upper, rhs : array_like
        Equal-length 1D arrays. ``lower[0]`` and ``upper[-1]`` are not used.

    Returns
    -------
    numpy.ndarray
        The solution vector.
    """
    lower = np.ascontiguousarray(lower, dtype=float)
    diag = np.ascontiguousarray(diag, dtype=float)
    upper = np.ascontiguousarray(upper, dtype=float)
    rhs = np.ascontiguousarray(rhs, dtype=float)
    n = diag.shape[0]
    if not (lower.shape == upper.shape == rhs.shape == (n,)):
        raise ValueError("lower, diag, upper and rhs must be 1D arrays of equal length")
    out = np.empty(n)
    if not thomas(lower, diag, upper, rhs, out):
        raise SingularSystemError("zero or non-finite pivot in tridiagonal elimination")
    return out
