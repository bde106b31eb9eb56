"""Tweedie exponential dispersion laws Tw_p(mu, psi) for p >= 1.

Variance is ``psi * mu**p``. Supported branches:

* ``p == 1``: scaled Poisson, ``psi * Poisson(mu / psi)``
* ``1 < p < 2``: compound Poisson-gamma (atom at zero)
* ``p == 2``: gamma
* ``p == 3``: inverse Gaussian
* ``p > 2``: exponentially tilted positive stable
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy.special import gammaln

from . import kernels
from .errors import ConvergenceError, DomainError, EvaluationError
from .seeding import as_generator

MIN_SCALE = 1e-12
MAX_PROPOSALS = 1_000_000


def _check_power(p):
    if not math.isfinite(p) or p < 1.0:
        raise DomainError(f"Tweedie power p={p} unsupported: no Tweedie law for p < 1 "
                          "other than p = 0, which is out of scope")


@dataclass(frozen=True)
class TweedieParams:
    p: float
    mu: float
    psi: float

    def __post_init__(self):
        _check_power(self.p)
        if not (self.mu >= MIN_SCALE and math.isfinite(self.mu)):
            raise DomainError(f"mean mu={self.mu} must be finite and >= {MIN_SCALE}")
        if not (self.psi >= MIN_SCALE and math.isfinite(self.psi)):
            raise DomainError(f"dispersion psi={self.psi} must be finite and >= {MIN_SCALE}")

    @property
    def variance(self):
        return self.psi * self.mu ** self.p


def cpg_decomposition(params):
    """Compound Poisson-gamma representation for 1 < p < 2.

    Returns ``(rate, shape, scale)``: the number of jumps is Poisson(rate) and each
    jump is gamma(shape, scale).
    """
    p, mu, psi = params.p, params.mu, params.psi
    if not 1.0 < p < 2.0:
        raise DomainError(f"compound Poisson-gamma form needs 1 < p < 2, got p={p}")
    rate = mu ** (2.0 - p) / (psi * (2.0 - p))
    shape = (2.0 - p) / (p - 1.0)
    scale = psi * (p - 1.0) * mu ** (p - 1.0)
    return rate, shape, scale


def stable_parts(p, mu, psi):
    """Tilted positive stable pieces for p > 2.

    Returns ``(lam, omega, alpha)`` where the law is a positive alpha-stable with
    Laplace exponent ``lam * (t / omega)**alpha`` tilted by ``exp(-omega * z)``;
    ``lam`` is also minus the log acceptance rate of naive rejection.
    """
    mu = np.asarray(mu, dtype=float)
    psi = np.asarray(psi, dtype=float)
    lam = mu ** (2.0 - p) / (psi * (p - 2.0))
    omega = mu ** (1.0 - p) / (psi * (p - 1.0))
    alpha = (p - 2.0) / (p - 1.0)
    return lam, omega, alpha


def laplace_exponent(p, mu, psi, s=1.0):
    """``-log E exp(-s Z)`` for Z ~ Tw_p(mu, psi); broadcasts over arrays."""
    mu = np.asarray(mu, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if p == 1.0:
        return (mu / psi) * -np.expm1(-s * psi)
    if p == 2.0:
        return np.log1p(s * psi * mu) / psi
    e = (2.0 - p) / (1.0 - p)
    base = mu ** (1.0 - p)
    return (mu ** (2.0 - p) - (base + (p - 1.0) * s * psi) ** e) / ((2.0 - p) * psi)


# sampling ----------------------------------------------------------------------

def _draw(p, mu, psi, rng, max_proposals=MAX_PROPOSALS):
    """Vectorised draws with elementwise (mu, psi); omega must be constant for p > 2."""
    if p == 1.0:
        return psi * rng.poisson(mu / psi)
    if p < 2.0:
        rate = mu ** (2.0 - p) / (psi * (2.0 - p))
        shape = (2.0 - p) / (p - 1.0)
        scale = psi * (p - 1.0) * mu ** (p - 1.0)
        jumps = rng.poisson(rate)
        g = rng.gamma(np.where(jumps > 0, jumps * shape, 1.0), scale)
        return np.where(jumps > 0, g, 0.0)
    if p == 2.0:
        return rng.gamma(1.0 / psi, psi * mu)
    if p == 3.0:
        return rng.wald(mu, 1.0 / psi)
    lam, omega, alpha = stable_parts(p, mu, psi)
    omega = np.atleast_1d(omega)
    if np.ptp(omega) > 1e-12 * omega.max():
        raise DomainError("tilted stable draws need a common tilt across the batch")
    lam = np.broadcast_to(lam, np.broadcast(mu, psi).shape)
    out, failed, attempts = kernels.tilted_stable_rvs(lam, omega[0], alpha, rng, max_proposals)
    if failed >= 0:
        raise ConvergenceError(
            f"tilted stable rejection exceeded {max_proposals} proposals at draw {failed}",
            attempts=attempts)
    return out.reshape(lam.shape)


def sample_tweedie(params, n, seed=None, max_proposals=MAX_PROPOSALS):
    """Draw ``n`` iid variates from ``params``; deterministic given ``seed``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = as_generator(seed)
    mu = np.full(int(n), params.mu)
    psi = np.full(int(n), params.psi)
    return np.asarray(_draw(params.p, mu, psi, rng, max_proposals), dtype=float)


# density -----------------------------------------------------------------------

def _stable_logdensity(z, p, mu, psi, method):
    lam, omega, alpha = stable_parts(p, mu, psi)
    logc = np.log(lam) - alpha * np.log(omega)
    if method == "integral":
        lg = kernels.stable_integral_logdensity(z, alpha, np.broadcast_to(logc, z.shape))
    else:
        lg, ok = kernels.stable_series_logdensity(z, alpha, np.broadcast_to(logc, z.shape))
        if not ok.all():
            if method == "series":
                bad = int(np.flatnonzero(~ok)[0])
                raise EvaluationError(
                    f"stable series did not converge at z={z[bad]:.6g}",
                    partial=lg[bad], bound=kernels.SERIES_MAX_TERMS)
            lc = np.broadcast_to(logc, z.shape)[~ok]
            lg[~ok] = kernels.stable_integral_logdensity(z[~ok], alpha, lc)
    return lg - omega * z + lam


def tweedie_logdensity(z, p, mu, psi, method="auto"):
    """Log density on z > 0 (log atom mass at z == 0 when 1 < p < 2).

    ``p``, ``mu`` and ``psi`` may be arrays broadcastable against ``z``.
    ``method`` selects the p > 2 evaluator: ``"series"`` raises when the
    alternating series cannot reach tolerance, ``"integral"`` uses the
    Zolotarev integral, ``"auto"`` tries the series first.
    """
    _check_power(p)
    z, mu, psi = np.broadcast_arrays(np.asarray(z, dtype=float),
                                     np.asarray(mu, dtype=float),
                                     np.asarray(psi, dtype=float))
    shape_out = z.shape
    z, mu, psi = z.ravel(), mu.ravel(), psi.ravel()
    if np.any(z < 0):
        raise DomainError("density support is z >= 0")
    if p == 1.0:
        raise DomainError("p = 1 is discrete on psi * N; use a probability mass instead")
    out = np.empty_like(z)
    if p < 2.0:
        rate = mu ** (2.0 - p) / (psi * (2.0 - p))
        shape = (2.0 - p) / (p - 1.0)
        scale = psi * (p - 1.0) * mu ** (p - 1.0)
        atom = z == 0
        out[atom] = -rate[atom]
        pos = ~atom
        if pos.any():
            lf, ok = kernels.cpg_logdensity(z[pos], rate[pos], shape, scale[pos])
            if not ok.all():
                bad = int(np.flatnonzero(~ok)[0])
                raise EvaluationError(
                    f"Tweedie series hit {kernels.SERIES_MAX_TERMS} terms at "
                    f"z={z[pos][bad]:.6g}", partial=lf[bad], bound=kernels.SERIES_MAX_TERMS)
            out[pos] = lf
        return out.reshape(shape_out)
    if np.any(z == 0):
        raise DomainError("density at z = 0 is only defined as an atom for 1 < p < 2")
    if p == 2.0:
        k = 1.0 / psi
        theta = psi * mu
        out = (k - 1.0) * np.log(z) - z / theta - gammaln(k) - k * np.log(theta)
    elif p == 3.0:
        shape_ig = 1.0 / psi
        out = 0.5 * np.log(shape_ig / (2.0 * math.pi * z ** 3)) \
            - shape_ig * (z - mu) ** 2 / (2.0 * mu ** 2 * z)
    else:
        out = _stable_logdensity(z, p, mu, psi, method)
    return out.reshape(shape_out)


def tweedie_density(params, z, method="auto"):
    """Density of ``params`` at ``z`` (atom mass at z == 0 for 1 < p < 2)."""
    lf = tweedie_logdensity(z, params.p, params.mu, params.psi, method=method)
    out = np.exp(lf)
    return float(out) if np.ndim(out) == 0 else out
