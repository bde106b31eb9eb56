"""PET regression by estimating functions.

Mean model ``m_i = exp(x_i' beta)`` and variance ``V_i = m_i + m_i**2 + phi * m_i**p``.
``beta`` solves the quasi-score; the dispersion pair ``(phi, p)`` solves the
Pearson estimating function. Parameter vectors are ordered ``(beta, phi, p)``.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.stats import chi2 as chi2_dist

from .errors import DomainError, RankDeficiencyError
from .pet import logpmf, pet_log_likelihood

M_MIN = 1e-12
M_MAX = 1e12
COND_LIMIT = 1e12
P_BOUNDS = (1.01, 5.0)
PHI_FLOOR = 1e-4
IDENTIFIABILITY_SD = 1e-8
MAX_HALVINGS = 40


@dataclass(frozen=True)
class RegressionData:
    y: np.ndarray
    X: np.ndarray
    names: tuple

    def __post_init__(self):
        y = np.asarray(self.y)
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        if y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DomainError("y must be a vector with one row of X per entry")
        if np.any(~np.isfinite(X)):
            raise DomainError("design matrix has non-finite entries")
        if np.any(y < 0) or np.any(y != np.round(y)):
            raise DomainError("responses must be non-negative integers")
        n, q = X.shape
        if len(self.names) != q:
            raise DomainError(f"{len(self.names)} names for {q} columns")
        if n <= q:
            raise DomainError(f"need more observations than columns (n={n}, q={q})")
        if _rank(X) < q:
            raise RankDeficiencyError("design matrix is not of full column rank", block="X")
        object.__setattr__(self, "y", y.astype(np.int64))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def q(self):
        return self.X.shape[1]


def _rank(X):
    _, r, _ = linalg.qr(X, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    return int(np.sum(d > d.max() * max(X.shape) * np.finfo(float).eps)) if d.size else 0


def intercept_only(y):
    y = np.asarray(y)
    return RegressionData(y, np.ones((y.shape[0], 1)), ("(Intercept)",))


@dataclass
class FitResult:
    beta: np.ndarray
    phi: float
    p: float
    godambe_cov: np.ndarray
    iterations: int
    converged: bool
    names: tuple
    fixed: tuple = ()
    paic: Optional[float] = None
    paic_se: Optional[float] = None
    trace: list = field(default_factory=list)
    p_at_bound: bool = False

    @property
    def theta(self):
        return np.concatenate([self.beta, [self.phi, self.p]])

    @property
    def std_errors(self):
        return np.sqrt(np.maximum(np.diag(self.godambe_cov), 0.0))

    @property
    def labels(self):
        return tuple(self.names) + ("phi", "p")


# moments -------------------------------------------------------------------------

def mean_vector(beta, X, return_flag=False):
    """``exp(X beta)`` clamped into [1e-12, 1e12]; optionally with a clamp flag."""
    eta = np.asarray(X, dtype=float) @ np.asarray(beta, dtype=float)
    if not np.all(np.isfinite(eta)):
        raise DomainError("non-finite linear predictor")
    with np.errstate(over="ignore"):
        m = np.exp(eta)
    clamped = bool(np.any((m < M_MIN) | (m > M_MAX)))
    m = np.clip(m, M_MIN, M_MAX)
    return (m, clamped) if return_flag else m


def phi_bound(m, p):
    """Smallest phi keeping every variance positive."""
    m = np.asarray(m, dtype=float)
    return float(np.max(-(m ** (2.0 - p) + m ** (1.0 - p))))


def variance_vector(m, p, phi):
    m = np.asarray(m, dtype=float)
    v = m + m * m + phi * m ** p
    bad = np.flatnonzero(~(v > 0.0))
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"variance not positive at observation {i}: need "
                          f"phi > {phi_bound(m, p):.6g} (got phi={phi})")
    return v


def _parts(beta, p, phi, data):
    m = mean_vector(beta, data.X)
    v = variance_vector(m, p, phi)
    mp = m ** p
    lm = np.log(m)
    return m, v, mp, lm


# estimating functions ---------------------------------------------------------------

def _score_terms(beta, p, phi, data):
    # per-observation contributions: (n, q) for beta and (n, 2) for (phi, p)
    m, v, mp, lm = _parts(beta, p, phi, data)
    r = data.y - m
    sb = data.X * (m * r / v)[:, None]
    r2 = r * r - v
    sg = np.column_stack([mp / v ** 2 * r2, phi * mp * lm / v ** 2 * r2])
    return sb, sg


def quasi_score(beta, p, phi, data):
    m, v, _, _ = _parts(beta, p, phi, data)
    return data.X.T @ (m * (data.y - m) / v)


def pearson_ef(beta, p, phi, data):
    """Pearson estimating function, components ordered (phi, p)."""
    m, v, mp, lm = _parts(beta, p, phi, data)
    r2 = (data.y - m) ** 2 - v
    return np.array([np.sum(mp / v ** 2 * r2), np.sum(phi * mp * lm / v ** 2 * r2)])


def sensitivity_matrices(beta, p, phi, data):
    """Expected derivatives ``(S_beta, S_gamma, S_gamma_beta)``; S_beta_gamma is zero."""
    m, v, mp, lm = _parts(beta, p, phi, data)
    X = data.X
    s_beta = -(X.T * (m * m / v)) @ X
    dv = np.column_stack([mp, phi * mp * lm])
    s_gamma = -(dv.T / v ** 2) @ dv
    dv_beta = X * ((1.0 + 2.0 * m + p * phi * m ** (p - 1.0)) * m)[:, None]
    s_gamma_beta = -(dv.T / v ** 2) @ dv_beta
    return s_beta, s_gamma, s_gamma_beta


def variability_matrices(beta, p, phi, data):
    """``(V_beta, V_gamma, V_gamma_beta)``; the dispersion blocks are empirical."""
    s_beta, _, _ = sensitivity_matrices(beta, p, phi, data)
    sb, sg = _score_terms(beta, p, phi, data)
    return -s_beta, sg.T @ sg, sg.T @ sb


def _checked_inverse(a, block):
    if a.size == 0:
        return a
    c = np.linalg.cond(a)
    if not np.isfinite(c) or c > COND_LIMIT:
        hint = " (p is not identified when all means are equal; fix p)" \
            if block.startswith("gamma") else ""
        raise RankDeficiencyError(f"sensitivity block {block} is singular "
                                  f"(condition number {c:.3g}){hint}", block=block)
    return np.linalg.inv(a)


def godambe_covariance(S_theta, V_theta, n_beta=None):
    """``S^{-1} V S^{-T}``, symmetrised.

    With ``n_beta`` the inverse of S is formed blockwise (it is block lower
    triangular) so that a singular block can be named.
    """
    S = np.asarray(S_theta, dtype=float)
    V = np.asarray(V_theta, dtype=float)
    if n_beta is None:
        inv = _checked_inverse(S, "theta")
    else:
        k = n_beta
        ib = _checked_inverse(S[:k, :k], "beta")
        ig = _checked_inverse(S[k:, k:], "gamma")
        inv = np.zeros_like(S)
        inv[:k, :k] = ib
        inv[k:, k:] = ig
        inv[k:, :k] = -ig @ S[k:, :k] @ ib
    J = inv @ V @ inv.T
    return 0.5 * (J + J.T)


def theta_matrices(beta, p, phi, data, free=(True, True)):
    """Assembled ``(S_theta, V_theta)`` restricted to the free dispersion components."""
    s_b, s_g, s_gb = sensitivity_matrices(beta, p, phi, data)
    v_b, v_g, v_gb = variability_matrices(beta, p, phi, data)
    keep = np.flatnonzero(free)
    s_g, v_g = s_g[np.ix_(keep, keep)], v_g[np.ix_(keep, keep)]
    s_gb, v_gb = s_gb[keep], v_gb[keep]
    q = data.X.shape[1]
    k = q + keep.size
    S = np.zeros((k, k))
    V = np.zeros((k, k))
    S[:q, :q] = s_b
    S[q:, :q] = s_gb
    S[q:, q:] = s_g
    V[:q, :q] = v_b
    V[q:, :q] = v_gb
    V[:q, q:] = v_gb.T
    V[q:, q:] = v_g
    return S, V


# fitting ---------------------------------------------------------------------------

def poisson_irls(data, tol=1e-10, max_iter=100):
    """Log-link Poisson regression by iteratively reweighted least squares."""
    X = data.X
    y = data.y.astype(float)
    eta = np.log(y + 0.5)
    beta = np.linalg.lstsq(X, eta, rcond=None)[0]
    for _ in range(max_iter):
        m = mean_vector(beta, X)
        w = np.sqrt(m)
        z = X @ beta + (y - m) / m
        new = np.linalg.lstsq(X * w[:, None], z * w, rcond=None)[0]
        if np.max(np.abs(new - beta)) < tol * (1.0 + np.max(np.abs(beta))):
            return new
        beta = new
    return beta


def pearson_phi(data, beta, p):
    m = mean_vector(beta, data.X)
    r = data.y - m
    return max(PHI_FLOOR, float(np.mean((r * r - m - m * m) / m ** p)))


def _valid(beta, p, phi, data):
    try:
        m = mean_vector(beta, data.X)
    except DomainError:
        return False
    v = m + m * m + phi * m ** p
    return bool(np.all(np.isfinite(v)) and np.all(v > 0.0))


def chaser_fit(data, p_init=1.5, phi_init=None, alpha=0.5, tol=1e-8, max_iter=200,
               p_bounds=P_BOUNDS, fix_p=None, fix_phi=None):
    """Alternate a Newton step for beta with a damped step for (phi, p).

    ``fix_p`` / ``fix_phi`` hold the corresponding component at the given value.
    Fixed components get zero rows and columns in the covariance.
    """
    lo, hi = p_bounds
    if not 1.0 <= lo < hi:
        raise DomainError("p bounds must satisfy 1 <= lower < upper")
    if not 0.0 < alpha <= 1.0:
        raise DomainError("alpha must lie in (0, 1]")
    beta = poisson_irls(data)
    p = float(fix_p) if fix_p is not None else float(np.clip(p_init, lo, hi))
    m0 = mean_vector(beta, data.X)
    if fix_p is None and np.std(np.log(m0), ddof=1) < IDENTIFIABILITY_SD:
        raise RankDeficiencyError("p is not identified when all fitted means are equal; "
                                  "set fix_p or profile over a grid of p", block="gamma:p")
    if fix_phi is not None:
        phi = float(fix_phi)
    elif phi_init is not None:
        phi = float(phi_init)
    else:
        phi = pearson_phi(data, beta, p)
    if not _valid(beta, p, phi, data):
        raise DomainError(f"initial phi={phi} violates the variance constraint")
    free = np.array([fix_phi is None, fix_p is None])
    trace = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        # beta: Newton step with the expected derivative
        s_beta, _, _ = sensitivity_matrices(beta, p, phi, data)
        step = np.linalg.solve(s_beta, quasi_score(beta, p, phi, data))
        t = 1.0
        for _ in range(MAX_HALVINGS):
            cand = beta - t * step
            if np.all(np.isfinite(cand)) and _valid(cand, p, phi, data):
                break
            t *= 0.5
        else:
            break
        beta = cand
        # dispersion: damped step on the free components
        if free.any():
            keep = np.flatnonzero(free)
            _, s_gamma, _ = sensitivity_matrices(beta, p, phi, data)
            g = pearson_ef(beta, p, phi, data)[keep]
            sg = s_gamma[np.ix_(keep, keep)]
            delta = -alpha * np.linalg.solve(sg, g) if np.linalg.cond(sg) < COND_LIMIT \
                else np.zeros(keep.size)
            full = np.zeros(2)
            full[keep] = delta
            t = 1.0
            for _ in range(MAX_HALVINGS):
                phi_c = phi + t * full[0]
                p_c = float(np.clip(p + t * full[1], lo, hi))
                if np.isfinite(phi_c) and _valid(beta, p_c, phi_c, data):
                    phi, p = phi_c, p_c
                    break
                t *= 0.5
        sb = np.max(np.abs(quasi_score(beta, p, phi, data)))
        sgn = np.max(np.abs(pearson_ef(beta, p, phi, data)[free])) if free.any() else 0.0
        trace.append({"iteration": it, "beta": beta.tolist(), "phi": phi, "p": p,
                      "score_beta": float(sb), "score_gamma": float(sgn)})
        if sb < tol and sgn < tol:
            converged = True
            break
    S, V = theta_matrices(beta, p, phi, data, free=free)
    cov_free = godambe_covariance(S, V, n_beta=data.q)
    idx = np.concatenate([np.arange(data.q), data.q + np.flatnonzero(free)])
    cov = np.zeros((data.q + 2, data.q + 2))
    cov[np.ix_(idx, idx)] = cov_free
    fixed = tuple(name for name, f in zip(("phi", "p"), free) if not f)
    # a Pearson root for p outside the bounds leaves p pinned and the fit unconverged
    at_bound = bool(free[1] and p in (lo, hi))
    return FitResult(beta=beta, phi=phi, p=p, godambe_cov=cov, iterations=it,
                     converged=converged, names=data.names, fixed=fixed, trace=trace,
                     p_at_bound=at_bound)


def paic(fit, data, method="quad", draws=None, seed=None):
    """Pseudo-AIC ``-2 loglik + 2 (q + 2)`` and its MC standard error.

    Returns ``(None, None)`` when phi <= 0 (no PET law to evaluate).
    """
    if not fit.phi > 0.0:
        return None, None
    m = mean_vector(fit.beta, data.X)
    kw = {} if draws is None else {"draws": draws}
    ll, se = pet_log_likelihood(data.y, fit.p, m, fit.phi, method=method, seed=seed,
                                return_se=True, **kw)
    return -2.0 * ll + 2.0 * (data.q + 2), 2.0 * se


def profile_p_fit(data, p_grid, method="quad", seed=None, **options):
    """Fit with p fixed at each grid value; return the fit with the smallest pAIC."""
    best = None
    for pv in p_grid:
        fit = chaser_fit(data, fix_p=float(pv), **options)
        fit.paic, fit.paic_se = paic(fit, data, method=method, seed=seed)
        if fit.paic is not None and (best is None or fit.paic < best.paic):
            best = fit
    if best is None:
        raise DomainError("no grid value gave a fit with a PET law")
    return best


# goodness of fit ----------------------------------------------------------------------

@dataclass(frozen=True)
class GofResult:
    chi2: float
    df: int
    p_value: float
    cells: tuple
    observed: np.ndarray
    expected: np.ndarray


def _frequency_arrays(observed):
    counts = getattr(observed, "counts", observed)
    if not counts:
        raise DomainError("empty frequency table")
    ys = np.array(sorted(counts), dtype=np.int64)
    if ys[0] < 0:
        raise DomainError("counts must be non-negative")
    freq = np.zeros(ys[-1] + 1)
    for y in ys:
        freq[y] = counts[y]
    if np.any(freq < 0):
        raise DomainError("frequencies must be non-negative")
    return freq


def pmf_until(params, total, pooling, method="quad", start=64, **settings):
    """pmf over 0..K with K large enough that the tail beyond K is below pooling/total."""
    k = start
    while True:
        lp, _ = logpmf(params, np.arange(k), method=method, **settings)
        probs = np.exp(lp)
        tail = max(0.0, 1.0 - probs.sum())
        if total * tail < pooling or k >= 10_000:
            return probs
        k *= 2


def pool_cells(probs, total, pooling):
    """Index k so that cells 0..k-1 and the tail ">= k" all have expectation >= pooling."""
    tails = np.maximum(1.0 - np.concatenate([[0.0], np.cumsum(probs)]), 0.0)
    k = 0
    while (k < probs.size and total * probs[k] >= pooling
           and total * tails[k + 1] >= pooling):
        k += 1
    return k, tails


def chi_square_gof(observed, params, pooling=5.0, n_params=3, method="quad", **settings):
    """Pearson chi-square of a frequency table against PET expectations.

    Cells ``0..k-1`` are kept and ``>= k`` pooled, with ``k`` the largest value
    keeping every expectation at least ``pooling``.
    """
    freq = _frequency_arrays(observed)
    total = float(freq.sum())
    if not total > 0.0:
        raise DomainError("frequency table has zero total")
    probs = pmf_until(params, total, pooling, method=method, **settings)
    k, tails = pool_cells(probs, total, pooling)
    exp_cells = np.concatenate([total * probs[:k], [total * tails[k]]])
    obs_cells = np.concatenate([freq[:k], [freq[k:].sum()]]) if k < freq.size else \
        np.concatenate([freq, np.zeros(k - freq.size), [0.0]])
    df = exp_cells.size - 1 - int(n_params)
    if df <= 0:
        raise DomainError(f"non-positive degrees of freedom ({exp_cells.size} cells, "
                          f"{n_params} estimated parameters)")
    stat = float(np.sum((obs_cells - exp_cells) ** 2 / exp_cells))
    cells = tuple(str(y) for y in range(k)) + (f"{k}+",)
    return GofResult(stat, df, float(chi2_dist.sf(stat, df)), cells, obs_cells, exp_cells)
