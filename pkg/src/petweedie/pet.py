"""Poisson-exponential-Tweedie laws PETw_p(m, phi).

Hierarchy: ``X ~ Exp(1)``, ``Z | X ~ Tw_p(X m, X**(1-p) phi)``, ``Y | Z ~ Poisson(Z)``.
Mean ``m``, variance ``m + m**2 + phi * m**p``.

Three probability-mass evaluators are provided:

``pmf_mc``
    Monte Carlo average of the Poisson kernel over simulated ``(X, Z)``.
``pmf_quadrature``
    Double integral: Gauss-Laguerre over ``x`` (scaled by the Tweedie Laplace
    exponent so the outer integrand is polynomial), and for each node the
    conditional count probability. For 1 < p < 2 the conditional is summed
    termwise over the compound-Poisson jump count; for p = 2 it is a negative
    binomial; for p > 2 it is a generalised Gauss-Laguerre integral of the
    Tweedie density.
``pmf_pgf``
    Exact recursion on the generating function ``1 / (1 + K(1 - t))``, where
    ``K`` is the Laplace exponent of Tw_p(m, phi). All recursion terms share a
    sign, so it is free of cancellation.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy.special import gammaln

from . import kernels
from .errors import ConvergenceError, DomainError, TailUnderflowError
from .quadrature import gauss_laguerre, logsumexp_rows, quantize_exponent
from .seeding import as_generator, substream
from .tweedie import MAX_PROPOSALS, _draw, laplace_exponent, tweedie_logdensity

DEFAULT_DRAWS = 1_000_000
MC_BLOCK = 1 << 17
X_NODES = 64
Z_NODES = 128
DOUBLING_TOL = 1e-8
PMF_FLOOR = 1e-300
TAIL_FLOOR = 1e-280
SUPPORT_TOL = 1e-6
SUPPORT_CAP = 10_000


class QuadratureWarning(RuntimeWarning):
    """Node doubling moved a quadrature result by more than the tolerance."""


@dataclass(frozen=True)
class PetParams:
    p: float
    m: float
    phi: float

    def __post_init__(self):
        if not math.isfinite(self.p) or self.p < 1.0:
            raise DomainError(f"PET power must satisfy p >= 1, got {self.p}")
        if not (self.m > 0.0 and math.isfinite(self.m)):
            raise DomainError(f"mean m={self.m} must be positive and finite")
        bound = phi_lower_bound(self.p, self.m)
        if not self.phi > bound:
            raise DomainError(f"phi={self.phi} gives non-positive variance; need phi > {bound:.6g}")

    @property
    def has_density(self):
        return self.phi > 0.0


def phi_lower_bound(p, m):
    """Smallest admissible dispersion: variance stays positive above it."""
    return -(m ** (2.0 - p) + m ** (1.0 - p))


def _require_law(params):
    if not params.phi > 0.0:
        raise DomainError(f"phi={params.phi} <= 0 defines moments only; no PET law to "
                          "sample or evaluate")


def pet_mean(params):
    return params.m


def pet_variance(params):
    p, m, phi = params.p, params.m, params.phi
    v = m + m * m + phi * m ** p
    if not v > 0.0:
        raise DomainError(f"variance {v} <= 0; need phi > {phi_lower_bound(p, m):.6g}")
    return v


def zero_rate(params):
    """Laplace exponent of Tw_p(m, phi) at 1, so that P(Y = 0) = 1 / (1 + zero_rate)."""
    return float(laplace_exponent(params.p, params.m, params.phi, 1.0))


# sampling ----------------------------------------------------------------------

def _latent_z(params, x, rng, max_proposals=MAX_PROPOSALS):
    p, m, phi = params.p, params.m, params.phi
    if p > 2.0 and p != 3.0:
        alpha = (p - 2.0) / (p - 1.0)
        omega = m ** (1.0 - p) / (phi * (p - 1.0))
        lam = x * (m ** (2.0 - p) / (phi * (p - 2.0)))
        out, failed, attempts = kernels.tilted_stable_rvs(lam, omega, alpha, rng, max_proposals)
        if failed >= 0:
            raise ConvergenceError(f"tilted stable rejection exceeded {max_proposals} "
                                   f"proposals", attempts=attempts)
        return out
    return _draw(p, x * m, phi * x ** (1.0 - p), rng, max_proposals)


def _latent_pairs(params, n, rng):
    x = rng.standard_exponential(n)
    return x, _latent_z(params, x, rng)


def sample_pet(params, n, seed=None):
    """``n`` PET counts; deterministic given ``seed``."""
    _require_law(params)
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = as_generator(seed)
    _, z = _latent_pairs(params, int(n), rng)
    return rng.poisson(z).astype(np.int64)


def sample_pet_means(p, m, phi, rng):
    """One PET draw per entry of the mean vector ``m`` (common p, phi)."""
    m = np.asarray(m, dtype=float)
    if not phi > 0.0:
        raise DomainError("sampling needs phi > 0")
    x = rng.standard_exponential(m.shape[0])
    if p > 2.0 and p != 3.0:
        # the tilt depends on m, so draw per distinct mean
        z = np.empty_like(m)
        for mv in np.unique(m):
            idx = np.flatnonzero(m == mv)
            z[idx] = _latent_z(PetParams(p, float(mv), phi), x[idx], rng)
    else:
        z = _draw(p, x * m, phi * x ** (1.0 - p), rng)
    return rng.poisson(z).astype(np.int64)


# Monte Carlo pmf ---------------------------------------------------------------

def _kernel_values(z, ys):
    with np.errstate(divide="ignore"):
        lz = np.log(z)
    out = np.empty((z.shape[0], len(ys)))
    for k, y in enumerate(ys):
        if y == 0:
            out[:, k] = np.exp(-z)
        else:
            out[:, k] = np.where(z > 0.0, np.exp(-z + y * lz - gammaln(y + 1.0)), 0.0)
    return out


def pmf_mc_table(params, ys, draws=DEFAULT_DRAWS, seed=None, workers=1, return_cov=False):
    """MC estimates and standard errors for every ``y`` in ``ys`` from shared draws.

    Draws are generated in fixed blocks, each on its own substream of ``seed``,
    so results do not depend on ``workers``. With ``return_cov`` the covariance
    matrix of the estimates is returned in place of the standard errors.
    """
    _require_law(params)
    if draws < 10_000:
        raise DomainError("pmf_mc needs at least 10^4 draws")
    ys = np.atleast_1d(np.asarray(ys, dtype=np.int64))
    if np.any(ys < 0):
        raise DomainError("counts must be non-negative")
    master = seed
    if isinstance(seed, np.random.Generator):
        master = int(seed.integers(0, 2 ** 63))
    sizes = [MC_BLOCK] * (draws // MC_BLOCK)
    if draws % MC_BLOCK:
        sizes.append(draws % MC_BLOCK)

    def block(b):
        rng = substream(master, "pmf_mc", b)
        _, z = _latent_pairs(params, sizes[b], rng)
        k = _kernel_values(z, ys)
        return k.sum(axis=0), k.T @ k

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(block, range(len(sizes))))
    else:
        parts = [block(b) for b in range(len(sizes))]
    s = np.sum([q[0] for q in parts], axis=0)
    s2 = np.sum([q[1] for q in parts], axis=0)
    est = s / draws
    cov = (s2 / draws - np.outer(est, est)) / (draws - 1)
    if return_cov:
        return est, cov
    return est, np.sqrt(np.maximum(np.diag(cov), 0.0))


def pmf_mc(params, y, draws=DEFAULT_DRAWS, seed=None, workers=1):
    """Monte Carlo ``P(Y = y)``; returns ``(estimate, std_error)``."""
    est, se = pmf_mc_table(params, [y], draws, seed, workers)
    return float(est[0]), float(se[0])


# quadrature pmf ----------------------------------------------------------------

def _log_conditional(params, x, ys, z_nodes, inner):
    """log P(Y = y | X = x); rows follow ``x``, columns follow ``ys``."""
    p, m, phi = params.p, params.m, params.phi
    out = np.empty((x.shape[0], ys.shape[0]))
    if p > 2.0 and inner == "series":
        table = _conditional_series(params, x, int(ys.max()))
        return table[:, ys]
    for j, y in enumerate(ys):
        if y == 0:
            out[:, j] = -x * zero_rate(params)
        elif p < 2.0:
            lam = x * (m ** (2.0 - p) / (phi * (2.0 - p)))
            shape = (2.0 - p) / (p - 1.0)
            s = phi * (p - 1.0) * m ** (p - 1.0)
            out[:, j], _ = kernels.cpg_poisson_logpmf(np.full(x.shape, y), lam, shape, s)
        elif p == 2.0:
            r = x / phi
            s = phi * m
            out[:, j] = (gammaln(y + r) - gammaln(r) - gammaln(y + 1.0)
                         + y * (np.log(s) - np.log1p(s)) - r * np.log1p(s))
        else:
            out[:, j] = _inner_gl(params, x, int(y), z_nodes)
    return out


def _conditional_series(params, x, ymax):
    # Tw_p(x m, x**(1-p) phi) is the x-th convolution power of Tw_p(m, phi), so
    # the conditional generating function is exp(-x K(1 - t)); its coefficients
    # follow from a recursion with positive terms only.
    c0 = zero_rate(params)
    a = -_pgf_coefficients(params, ymax)[1:]
    ka = np.arange(1, ymax + 1) * a
    h = np.empty((x.shape[0], ymax + 1))
    h[:, 0] = 1.0
    for n in range(1, ymax + 1):
        h[:, n] = x / n * (h[:, n - 1::-1] @ ka[:n])
    with np.errstate(divide="ignore"):
        return np.log(h) - (x * c0)[:, None]


def _inner_gl(params, x, y, z_nodes):
    # Weight z**a exp(-b z) with b = 1 + tilt cancels the exponential factor of
    # the Tweedie density; a centres the rule on the integrand's bulk.
    p, m, phi = params.p, params.m, params.phi
    alpha = (p - 2.0) / (p - 1.0)
    omega = m ** (1.0 - p) / (phi * (p - 1.0))
    b = 1.0 + omega
    lam = x * (m ** (2.0 - p) / (phi * (p - 2.0)))
    kshape = lam * alpha * (b / omega) ** alpha / (1.0 - alpha)
    zs, lws, exps = [], [], []
    for i in range(x.shape[0]):
        a = quantize_exponent(max((1.0 - alpha) * (kshape[i] + y) - 1.0, -alpha))
        u, lw = gauss_laguerre(z_nodes, a)
        zs.append(u / b)
        lws.append(lw - (a + 1.0) * math.log(b))
        exps.append(a)
    z = np.stack(zs)
    lw = np.stack(lws)
    a = np.array(exps)[:, None]
    mu = (x * m)[:, None]
    psi = (phi * x ** (1.0 - p))[:, None]
    lf = tweedie_logdensity(z, p, mu, psi)
    terms = lw + (y - a) * np.log(z) - gammaln(y + 1.0) + lf + (b - 1.0) * z
    return logsumexp_rows(terms, axis=1)


def _check_nodes(x_nodes, z_nodes):
    if x_nodes < 8 or z_nodes < 8:
        raise DomainError("quadrature needs at least 8 nodes per dimension")


def _logpmf_quad_once(params, ys, x_nodes, z_nodes, inner):
    # Outer weight e^{-(1 + c0) x}: P(y | x) e^{c0 x} is a polynomial in x.
    c0 = zero_rate(params)
    u, lw = gauss_laguerre(x_nodes, 0.0)
    x = u / (1.0 + c0)
    lc = _log_conditional(params, x, ys, z_nodes, inner)
    return logsumexp_rows((lw + c0 * x)[:, None] + lc, axis=0) - math.log1p(c0)


def logpmf_quadrature(params, ys, x_nodes=X_NODES, z_nodes=Z_NODES, check=True,
                      inner="series"):
    """log P(Y = y) by quadrature for each ``y`` in ``ys``.

    ``inner`` picks the p > 2 conditional: ``"series"`` (exact coefficients of
    the conditional generating function) or ``"density"`` (generalised
    Gauss-Laguerre against the Tweedie density with ``z_nodes`` nodes).
    With ``check`` the rule is re-run at doubled node counts; the refined value
    is returned and a :class:`QuadratureWarning` is issued when the two differ
    by more than ``1e-8`` in probability.
    """
    _require_law(params)
    if params.p == 1.0:
        raise DomainError("quadrature needs a Tweedie density; use pmf_mc or pmf_pgf for p = 1")
    if inner not in ("series", "density"):
        raise DomainError(f"unknown inner evaluator {inner!r}")
    _check_nodes(x_nodes, z_nodes)
    ys = np.atleast_1d(np.asarray(ys, dtype=np.int64))
    if ys.size == 0:
        return np.empty(0)
    if np.any(ys < 0):
        raise DomainError("counts must be non-negative")
    out = _logpmf_quad_once(params, ys, x_nodes, z_nodes, inner)
    if check:
        hi = _logpmf_quad_once(params, ys, 2 * x_nodes, 2 * z_nodes, inner)
        moved = np.abs(np.exp(hi) - np.exp(out))
        bad = np.flatnonzero(moved >= DOUBLING_TOL)
        if bad.size:
            k = bad[0]
            warnings.warn(f"quadrature not converged at y={ys[k]}: doubling moved "
                          f"{math.exp(out[k]):.3e} to {math.exp(hi[k]):.3e}",
                          QuadratureWarning, stacklevel=2)
        out = hi
    return out


def pmf_quadrature(params, y, x_nodes=X_NODES, z_nodes=Z_NODES, check=True, inner="series"):
    """``P(Y = y)`` by Gauss-Laguerre integration over the exponential mixing variable."""
    return float(np.exp(logpmf_quadrature(params, [y], x_nodes, z_nodes, check, inner)[0]))


# exact generating-function recursion -------------------------------------------

def _pgf_coefficients(params, ymax):
    # power series of 1 + K(1 - t); every coefficient beyond the constant is negative
    p, m, phi = params.p, params.m, params.phi
    k = np.arange(1, ymax + 1, dtype=float)
    if p == 1.0:
        tail = -(m / phi) * np.exp(-phi + k * math.log(phi) - gammaln(k + 1.0))
    elif p == 2.0:
        r = phi * m / (1.0 + phi * m)
        tail = -np.exp(k * math.log(r)) / (k * phi)
    else:
        e = (2.0 - p) / (1.0 - p)
        c = (p - 1.0) * phi
        base = m ** (1.0 - p) + c
        # binom(e, k) (-c / base)**k as a running product
        ratio = np.cumprod((k - 1.0 - e) / k * (c / base))
        tail = -base ** e * ratio / ((2.0 - p) * phi)
    return np.concatenate([[1.0 + zero_rate(params)], tail])


def pmf_pgf(params, ymax):
    """Exact ``P(Y = y)`` for ``y = 0..ymax``."""
    _require_law(params)
    f = _pgf_coefficients(params, int(ymax))
    g = np.empty(int(ymax) + 1)
    g[0] = 1.0 / f[0]
    for n in range(1, int(ymax) + 1):
        g[n] = -np.dot(f[1:n + 1], g[n - 1::-1]) / f[0]
    return g


# dispatch ----------------------------------------------------------------------

def logpmf(params, ys, method="quad", draws=DEFAULT_DRAWS, seed=None,
           x_nodes=X_NODES, z_nodes=Z_NODES):
    """log pmf values and their MC standard errors (zero for deterministic methods)."""
    ys = np.atleast_1d(np.asarray(ys, dtype=np.int64))
    if method == "quad" and params.p == 1.0:
        method = "pgf"
    if method == "quad":
        return logpmf_quadrature(params, ys, x_nodes, z_nodes), np.zeros(ys.shape[0])
    if method == "pgf":
        g = pmf_pgf(params, int(ys.max()) if ys.size else 0)
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(g[ys], 0.0)), np.zeros(ys.shape[0])
    if method == "mc":
        est, se = pmf_mc_table(params, ys, draws, seed)
        with np.errstate(divide="ignore"):
            return np.log(est), se
    raise DomainError(f"unknown pmf method {method!r}")


def support_max(params, tol=SUPPORT_TOL, cap=SUPPORT_CAP, method="quad", **settings):
    """Smallest y with cumulative mass >= 1 - tol (capped)."""
    total = 0.0
    start = 0
    step = 16
    while start <= cap:
        ys = np.arange(start, min(start + step, cap + 1))
        lp, _ = logpmf(params, ys, method=method, **settings)
        cum = total + np.cumsum(np.exp(lp))
        hit = np.flatnonzero(cum >= 1.0 - tol)
        if hit.size:
            return int(ys[hit[0]])
        total = cum[-1]
        start += step
        step *= 2
    return cap


# likelihood and tail index -----------------------------------------------------

def grouped_log_likelihood(params, values, counts, method="quad", draws=DEFAULT_DRAWS,
                           seed=None, x_nodes=X_NODES, z_nodes=Z_NODES):
    """``sum(counts * log pmf(values))`` and its MC variance.

    Under MC all cells share draws, so the variance uses the full covariance of
    the pmf estimates (delta method).
    """
    values = np.asarray(values, dtype=np.int64)
    counts = np.asarray(counts, dtype=float)
    if method == "mc":
        est, cov = pmf_mc_table(params, values, draws, seed, return_cov=True)
        prob = np.maximum(est, PMF_FLOOR)
        grad = counts / prob
        return float(np.dot(counts, np.log(prob))), float(max(grad @ cov @ grad, 0.0))
    lp, _ = logpmf(params, values, method=method, x_nodes=x_nodes, z_nodes=z_nodes)
    prob = np.maximum(np.exp(lp), PMF_FLOOR)
    return float(np.dot(counts, np.log(prob))), 0.0


def pet_log_likelihood(y, p, m, phi, method="quad", draws=DEFAULT_DRAWS, seed=None,
                       x_nodes=X_NODES, z_nodes=Z_NODES, return_se=False):
    """Sum of log pmf over observations with per-observation means ``m``.

    ``m`` may be a scalar or one mean per observation. Pmf values are memoised
    per distinct (mean, count) pair and floored at 1e-300 before the log. With
    ``return_se`` the delta-method MC standard error is returned too.
    """
    y = np.asarray(y, dtype=np.int64).ravel()
    if y.size == 0:
        return (0.0, 0.0) if return_se else 0.0
    if np.any(y < 0):
        raise DomainError("counts must be non-negative")
    m = np.broadcast_to(np.asarray(m, dtype=float), y.shape)
    total = 0.0
    var = 0.0
    means, inverse = np.unique(m, return_inverse=True)
    inverse = inverse.ravel()
    for g, mv in enumerate(means):
        vals, counts = np.unique(y[inverse == g], return_counts=True)
        sub = int(substream(seed, "loglik", g).integers(0, 2 ** 63)) \
            if method == "mc" else None
        ll, v = grouped_log_likelihood(PetParams(p, float(mv), phi), vals, counts, method,
                                       draws, sub, x_nodes, z_nodes)
        total += ll
        var += v
    if return_se:
        return total, math.sqrt(var)
    return total


def ht_index(params, y, x_nodes=X_NODES, z_nodes=Z_NODES):
    """Ratio P(Y = y + 1) / P(Y = y) by quadrature."""
    lp = logpmf_quadrature(params, [y, y + 1], x_nodes, z_nodes)
    if lp[0] < math.log(TAIL_FLOOR):
        raise TailUnderflowError(f"P(Y={y}) = {math.exp(lp[0]):.3e} is below {TAIL_FLOOR}",
                                 partial=math.exp(lp[0]), bound=TAIL_FLOOR)
    return float(math.exp(lp[1] - lp[0]))


def negative_binomial_distance(params, ymax=None):
    """Total variation distance between PET and the moment-matched negative binomial.

    Exploratory check of the p = 2 special case; returns ``(tv, nb_size, nb_prob)``.
    """
    from scipy.stats import nbinom

    _require_law(params)
    mean = pet_mean(params)
    var = pet_variance(params)
    size = mean * mean / (var - mean)
    prob = size / (size + mean)
    if ymax is None:
        ymax = max(int(nbinom.ppf(1 - 1e-12, size, prob)), 50)
    pet = pmf_pgf(params, ymax)
    nb = nbinom.pmf(np.arange(ymax + 1), size, prob)
    tail = abs((1.0 - pet.sum()) - (1.0 - nb.sum()))
    return 0.5 * (np.abs(pet - nb).sum() + tail), size, prob
