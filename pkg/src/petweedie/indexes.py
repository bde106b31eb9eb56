"""Dispersion and zero-inflation indexes against Poisson and G0 references.

G0 is the geometric law on {0, 1, ...} with pmf ``q (1 - q)**y``; its variance
is ``mean + mean**2``, so G0-DI = 1 and G0-ZI = 0 for it.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math
from typing import Optional

import numpy as np

from .errors import DomainError
from .pet import PetParams, logpmf, pet_variance
from .seeding import as_generator, substream

MIN_TEST_SIZE = 30
MIN_BOOTSTRAP = 199
DEFAULT_BOOTSTRAP = 999


@dataclass(frozen=True)
class IndexReport:
    p_di: float
    g0_di: float
    p_zi: Optional[float]
    g0_zi: Optional[float]
    source: str
    n: Optional[int] = None
    zero_fraction: Optional[float] = None

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _from_moments(mean, variance, zero_prob, source, n=None):
    if not mean > 0.0:
        raise DomainError("indexes are undefined for a zero mean")
    p_zi = g0_zi = None
    if zero_prob is not None and zero_prob > 0.0:
        lz = math.log(zero_prob)
        p_zi = mean + lz
        g0_zi = math.log1p(mean) + lz
    return IndexReport(
        p_di=variance / mean,
        g0_di=variance / (mean + mean * mean),
        p_zi=p_zi,
        g0_zi=g0_zi,
        source=source,
        n=n,
        zero_fraction=zero_prob if source == "empirical" else None,
    )


def summary_indexes(mean, variance, zero_fraction=None, n=None):
    """Indexes from summary statistics; ZI fields need ``zero_fraction``."""
    if variance < 0.0:
        raise DomainError("variance must be non-negative")
    if zero_fraction is not None and not 0.0 <= zero_fraction <= 1.0:
        raise DomainError("zero fraction must lie in [0, 1]")
    return _from_moments(float(mean), float(variance), zero_fraction, "empirical", n)


def _as_counts(sample):
    y = np.asarray(sample)
    if y.ndim != 1:
        raise DomainError("sample must be one-dimensional")
    if y.size and (np.any(y < 0) or np.any(y != np.round(y))):
        raise DomainError("sample must hold non-negative integers")
    return y.astype(np.int64)


def empirical_indexes(sample):
    """Indexes of a count sample (variance with denominator n - 1)."""
    y = _as_counts(sample)
    if y.size < 2:
        raise DomainError("need at least two observations")
    return _from_moments(float(y.mean()), float(y.var(ddof=1)), float(np.mean(y == 0)),
                         "empirical", int(y.size))


def theoretical_indexes(params, method="quad", draws=None, seed=None):
    """Indexes of PETw_p(m, phi); ZI fields are absent when phi <= 0."""
    mean = params.m
    var = pet_variance(params)
    zero = None
    if params.phi > 0.0:
        kw = {} if draws is None else {"draws": draws}
        lp, _ = logpmf(params, [0], method=method, seed=seed, **kw)
        zero = float(np.exp(lp[0]))
    return _from_moments(mean, var, zero, "theoretical")


def index_curves(p, phi, m_grid, method="quad"):
    """Theoretical indexes over an increasing grid of means.

    Returns an array with columns ``m, p_di, g0_di, p_zi, g0_zi`` (NaN where a
    ZI field is absent).
    """
    m_grid = np.asarray(m_grid, dtype=float)
    if m_grid.ndim != 1 or m_grid.size == 0:
        raise DomainError("mean grid must be a non-empty vector")
    if np.any(np.diff(m_grid) <= 0):
        raise DomainError("mean grid must be strictly increasing")
    rows = []
    for m in m_grid:
        r = theoretical_indexes(PetParams(p, float(m), phi), method=method)
        rows.append((m, r.p_di, r.g0_di,
                     np.nan if r.p_zi is None else r.p_zi,
                     np.nan if r.g0_zi is None else r.g0_zi))
    return np.array(rows)


def _g0_di(y):
    mean = y.mean()
    if mean == 0.0:
        return 0.0
    return y.var(ddof=1) / (mean + mean * mean)


def g0_dispersion_test(sample, bootstrap_reps=DEFAULT_BOOTSTRAP, seed=None, workers=1):
    """One-sided test of H0: G0-DI <= 1 against H1: G0-DI > 1.

    The null distribution of the empirical G0-DI is simulated from the G0 law
    whose mean equals the sample mean (the boundary of H0). Replicate ``b``
    uses its own substream, so the p-value does not depend on ``workers``.
    Returns ``(statistic, p_value)``.
    """
    y = _as_counts(sample)
    if y.size < MIN_TEST_SIZE:
        raise DomainError(f"test needs at least {MIN_TEST_SIZE} observations")
    if bootstrap_reps < MIN_BOOTSTRAP:
        raise DomainError(f"need at least {MIN_BOOTSTRAP} bootstrap replicates")
    if np.all(y == y[0]):
        raise DomainError("test undefined for a constant sample")
    stat = _g0_di(y.astype(float))
    q = 1.0 / (1.0 + y.mean())
    n = y.size

    def rep(b):
        rng = substream(seed, "g0_test", b)
        return _g0_di((rng.geometric(q, n) - 1).astype(float))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            null = np.fromiter(pool.map(rep, range(bootstrap_reps)), float, bootstrap_reps)
    else:
        null = np.fromiter(map(rep, range(bootstrap_reps)), float, bootstrap_reps)
    p_value = (1.0 + np.sum(null >= stat)) / (bootstrap_reps + 1.0)
    return float(stat), float(p_value)


def sample_g0(q, n, seed=None):
    """Draws from the zero-shifted geometric law with success probability ``q``."""
    if not 0.0 < q <= 1.0:
        raise DomainError("q must lie in (0, 1]")
    return (as_generator(seed).geometric(q, int(n)) - 1).astype(np.int64)
