"""Hot numerical kernels with a numba path and a pure-numpy path.

The active backend is chosen once at import time (see ``petweedie._backend``).
Wrappers here normalise dtypes so both backends see identical inputs.
"""
from functools import lru_cache
import importlib

import numpy as np

from .._backend import numba_enabled

BACKEND = "numba" if numba_enabled() else "numpy"

SERIES_RTOL = 1e-12
SERIES_MAX_TERMS = 10_000
STABLE_MAX_CANCEL = 1e8
ZOLOTAREV_NODES = 48
SPLIT_MAX = 2.0


def load(name=None):
    """Return the kernel module for ``name`` ('numba' or 'numpy'), default active."""
    name = name or BACKEND
    return importlib.import_module(f"{__name__}._{name}")


@lru_cache(maxsize=None)
def _legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _f64(a, n=None):
    a = np.asarray(a, dtype=np.float64)
    if n is not None and a.ndim == 0:
        a = np.full(n, float(a))
    return np.ascontiguousarray(a.ravel())


def cpg_logdensity(z, lam, shape, scale, rtol=SERIES_RTOL, max_terms=SERIES_MAX_TERMS,
                   backend=None):
    z = _f64(z)
    n = z.shape[0]
    return load(backend).cpg_logdensity(z, _f64(lam, n), _f64(shape, n), _f64(scale, n),
                                        float(rtol), int(max_terms))


def cpg_poisson_logpmf(y, lam, shape, s, rtol=SERIES_RTOL, max_terms=SERIES_MAX_TERMS,
                       backend=None):
    y = np.ascontiguousarray(np.asarray(y, dtype=np.int64).ravel())
    n = y.shape[0]
    return load(backend).cpg_poisson_logpmf(y, _f64(lam, n), _f64(shape, n), _f64(s, n),
                                            float(rtol), int(max_terms))


def stable_series_logdensity(z, alpha, logc, rtol=SERIES_RTOL, max_terms=SERIES_MAX_TERMS,
                             max_cancel=STABLE_MAX_CANCEL, backend=None):
    z = _f64(z)
    return load(backend).stable_series_logdensity(z, float(alpha), _f64(logc, z.shape[0]),
                                                  float(rtol), int(max_terms),
                                                  float(max_cancel))


def stable_integral_logdensity(z, alpha, logc, nodes=ZOLOTAREV_NODES, backend=None):
    z = _f64(z)
    gx, gw = _legendre(int(nodes))
    return load(backend).stable_integral_logdensity(z, float(alpha), _f64(logc, z.shape[0]),
                                                    gx, gw)


def tilted_stable_rvs(lam, omega, alpha, rng, max_proposals, split_max=SPLIT_MAX,
                      backend=None):
    return load(backend).tilted_stable_rvs(_f64(lam), float(omega), float(alpha), rng,
                                           int(max_proposals), float(split_max))
