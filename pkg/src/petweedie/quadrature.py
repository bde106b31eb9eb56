"""Gauss-Laguerre rules in log space.

Weights of the generalised rule for ``x**a * exp(-x)`` overflow for large ``a``,
so nodes (eigenvalues of the Jacobi matrix) come with log-weights from the
Christoffel function, evaluated with a rescaled three-term recurrence.
"""
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln


def _christoffel_logweights(x, a):
    # w_i = 1 / sum_k p_k(x_i)**2 over orthonormal Laguerre polynomials; the
    # eigenvector route loses all relative accuracy for the tiny far-tail weights
    n = x.shape[0]
    prev = np.zeros(n)
    cur = np.ones(n)
    total = np.ones(n)
    logscale = np.zeros(n)  # log of the factor the running values were divided by
    for k in range(n - 1):
        b_next = np.sqrt((k + 1.0) * (k + 1.0 + a))
        b_k = np.sqrt(k * (k + a)) if k else 0.0
        nxt = ((x - (2.0 * k + a + 1.0)) * cur - b_k * prev) / b_next
        prev, cur = cur, nxt
        total = total + cur * cur
        big = np.abs(cur) > 1e100
        if big.any():
            prev[big] *= 1e-100
            cur[big] *= 1e-100
            total[big] *= 1e-200
            logscale[big] += 100.0 * np.log(10.0)
    # p_0 = Gamma(a + 1)**-0.5; the sum scales by its square
    return gammaln(a + 1.0) - np.log(total) - 2.0 * logscale


@lru_cache(maxsize=4096)
def _rule(n, a):
    k = np.arange(n, dtype=float)
    diag = 2.0 * k + a + 1.0
    off = np.sqrt(k[1:] * (k[1:] + a))
    x = eigh_tridiagonal(diag, off, eigvals_only=True)
    logw = _christoffel_logweights(x, a)
    x.setflags(write=False)
    logw.setflags(write=False)
    return x, logw


def quantize_exponent(a):
    """Snap ``a`` to a coarse grid so rules can be cached."""
    if a < 64.0:
        return round(a * 8.0) / 8.0
    return float(np.exp(round(np.log(a) * 512.0) / 512.0))


def gauss_laguerre(n, a=0.0):
    """Nodes and log-weights for ``int_0^inf x**a exp(-x) f(x) dx``."""
    if n < 1:
        raise ValueError("need at least one node")
    if a <= -1.0:
        raise ValueError("exponent must exceed -1")
    return _rule(int(n), float(a))


def logsumexp_rows(a, axis=-1):
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(a - m), axis=axis))
