"""Loop kernels compiled with numba.

Every function here has a vectorised twin in ``_numpy`` with the same
signature and the same summation rules; results agree to rounding.
"""
import math

import numpy as np
from numba import njit

LOG_PI = math.log(math.pi)
U_MAX = math.pi * (1.0 - 1e-12)
BISECT_STEPS = 64
PEAK_DROP = 40.0


@njit(cache=True)
def _log_sinc(x):
    if x < 1e-4:
        return -x * x / 6.0
    return math.log(math.sin(x) / x)


@njit(cache=True)
def log_zolotarev(u, alpha):
    beta = 1.0 - alpha
    return ((math.log(alpha) + _log_sinc(alpha * u) - _log_sinc(u)) / beta
            + math.log(beta / alpha) + _log_sinc(beta * u) - _log_sinc(alpha * u))


# compound Poisson-gamma density series --------------------------------------

@njit(cache=True)
def _cpg_term(j, ljc, shape):
    return j * ljc - math.lgamma(j + 1.0) - math.lgamma(j * shape)


@njit(cache=True)
def _cpg_pois_term(j, ljc, shape, y):
    return (j * ljc - math.lgamma(j + 1.0)
            + math.lgamma(y + j * shape) - math.lgamma(j * shape))


@njit(cache=True)
def _mode(ljc, shape, y, kind):
    # smallest j >= 1 with term(j + 1) <= term(j); terms are log-concave in j
    def diff(j):
        if kind == 0:
            return _cpg_term(j + 1.0, ljc, shape) - _cpg_term(j, ljc, shape)
        return _cpg_pois_term(j + 1.0, ljc, shape, y) - _cpg_pois_term(j, ljc, shape, y)

    lo = 1.0
    if diff(lo) <= 0.0:
        return lo
    hi = 2.0
    while diff(hi) > 0.0:
        lo = hi
        hi *= 2.0
    while hi - lo > 1.0:
        mid = math.floor(0.5 * (lo + hi))
        if diff(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


@njit(cache=True)
def _sum_from_mode(jm, ljc, shape, y, kind, rtol, max_terms):
    if kind == 0:
        top = _cpg_term(jm, ljc, shape)
    else:
        top = _cpg_pois_term(jm, ljc, shape, y)
    acc = 1.0
    n = 1
    ok = True
    j = jm + 1.0
    while True:
        if kind == 0:
            t = _cpg_term(j, ljc, shape)
        else:
            t = _cpg_pois_term(j, ljc, shape, y)
        r = math.exp(t - top)
        acc += r
        n += 1
        if r < rtol * acc:
            break
        if n >= max_terms:
            ok = False
            break
        j += 1.0
    j = jm - 1.0
    while ok and j >= 1.0:
        if kind == 0:
            t = _cpg_term(j, ljc, shape)
        else:
            t = _cpg_pois_term(j, ljc, shape, y)
        r = math.exp(t - top)
        acc += r
        n += 1
        if r < rtol * acc:
            break
        if n >= max_terms:
            ok = False
            break
        j -= 1.0
    return top + math.log(acc), ok


@njit(cache=True)
def cpg_logdensity(z, lam, shape, scale, rtol, max_terms):
    n = z.shape[0]
    out = np.empty(n)
    ok = np.ones(n, dtype=np.bool_)
    for i in range(n):
        lz = math.log(z[i])
        ljc = math.log(lam[i]) + shape[i] * (lz - math.log(scale[i]))
        jm = _mode(ljc, shape[i], 0.0, 0)
        s, good = _sum_from_mode(jm, ljc, shape[i], 0.0, 0, rtol, max_terms)
        out[i] = s - lam[i] - lz - z[i] / scale[i]
        ok[i] = good
    return out, ok


@njit(cache=True)
def cpg_poisson_logpmf(y, lam, shape, s, rtol, max_terms):
    n = y.shape[0]
    out = np.empty(n)
    ok = np.ones(n, dtype=np.bool_)
    for i in range(n):
        yi = float(y[i])
        ljc = math.log(lam[i]) - shape[i] * math.log1p(s[i])
        jm = _mode(ljc, shape[i], yi, 1)
        tot, good = _sum_from_mode(jm, ljc, shape[i], yi, 1, rtol, max_terms)
        tot += -lam[i] - math.lgamma(yi + 1.0) + yi * (math.log(s[i]) - math.log1p(s[i]))
        if y[i] == 0:
            a, b = max(tot, -lam[i]), min(tot, -lam[i])
            tot = a + math.log1p(math.exp(b - a))
        out[i] = tot
        ok[i] = good
    return out, ok


# positive stable density -------------------------------------------------------

@njit(cache=True)
def _stable_env(k, alpha, x):
    return math.lgamma(k * alpha + 1.0) - math.lgamma(k + 1.0) + k * x


@njit(cache=True)
def stable_series_logdensity(z, alpha, logc, rtol, max_terms, max_cancel):
    n = z.shape[0]
    out = np.full(n, np.nan)
    ok = np.zeros(n, dtype=np.bool_)
    log_cancel = math.log(max_cancel)
    for i in range(n):
        lz = math.log(z[i])
        x = logc[i] - alpha * lz
        kstar = math.exp((alpha * math.log(alpha) + x) / (1.0 - alpha))
        # the envelope peaks near exp((1 - alpha) kstar) while z g(z) stays O(1)
        if kstar > max_terms or (1.0 - alpha) * kstar > log_cancel + 2.0:
            continue
        k0 = max(1.0, math.floor(kstar))
        top = max(_stable_env(k0, alpha, x), _stable_env(k0 + 1.0, alpha, x))
        acc = 0.0
        k = 1.0
        done = False
        while k <= max_terms:
            r = math.exp(_stable_env(k, alpha, x) - top)
            sg = math.sin(k * math.pi * alpha)
            if int(k) % 2 == 0:
                sg = -sg
            acc += sg * r
            if k > kstar and r < rtol * max(abs(acc), 1.0 / max_cancel):
                done = True
                break
            k += 1.0
        if not done or acc <= 0.0 or math.log(acc) < -log_cancel:
            continue
        out[i] = math.log(acc) + top - LOG_PI - lz
        ok[i] = True
    return out, ok


@njit(cache=True)
def _zh(u, alpha, ltau):
    la = log_zolotarev(u, alpha)
    return la - math.exp(ltau + la)


@njit(cache=True)
def stable_integral_logdensity(z, alpha, logc, gl_x, gl_w):
    n = z.shape[0]
    out = np.empty(n)
    beta = 1.0 - alpha
    const = math.log(alpha / (math.pi * beta))
    la0 = log_zolotarev(0.0, alpha)
    for i in range(n):
        ls = math.log(z[i]) - logc[i] / alpha
        ltau = -(alpha / beta) * ls
        if la0 >= -ltau:
            ustar = 0.0
        else:
            lo, hi = 0.0, U_MAX
            for _ in range(BISECT_STEPS):
                mid = 0.5 * (lo + hi)
                if log_zolotarev(mid, alpha) < -ltau:
                    lo = mid
                else:
                    hi = mid
            ustar = 0.5 * (lo + hi)
        hs = _zh(ustar, alpha, ltau)
        target = hs - PEAK_DROP
        ulo = 0.0
        if ustar > 0.0 and _zh(0.0, alpha, ltau) < target:
            lo, hi = 0.0, ustar
            for _ in range(BISECT_STEPS):
                mid = 0.5 * (lo + hi)
                if _zh(mid, alpha, ltau) < target:
                    lo = mid
                else:
                    hi = mid
            ulo = lo
        uhi = U_MAX
        if _zh(U_MAX, alpha, ltau) < target:
            lo, hi = ustar, U_MAX
            for _ in range(BISECT_STEPS):
                mid = 0.5 * (lo + hi)
                if _zh(mid, alpha, ltau) >= target:
                    lo = mid
                else:
                    hi = mid
            uhi = hi
        acc = 0.0
        for a, b in ((ulo, ustar), (ustar, uhi)):
            if b > a:
                half = 0.5 * (b - a)
                mid = 0.5 * (a + b)
                for k in range(gl_x.shape[0]):
                    acc += gl_w[k] * half * math.exp(_zh(mid + half * gl_x[k], alpha, ltau) - hs)
        out[i] = const - ls / beta + hs + math.log(acc) - logc[i] / alpha
    return out


# exponentially tilted positive stable sampler ------------------------------

@njit(cache=True)
def _sinc(x):
    ax = abs(x)
    if ax < 2e-4:
        return 1.0 - x * x / 6.0
    if ax < 6e-3:
        x2 = x * x
        return 1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)
    return math.sin(x) / x


@njit(cache=True)
def _dr_zolotarev(u, alpha):
    beta = 1.0 - alpha
    return ((beta * _sinc(beta * u)) ** beta * (alpha * _sinc(alpha * u)) ** alpha
            / _sinc(u))


@njit(cache=True)
def _dr_bdb0(u, alpha):
    beta = 1.0 - alpha
    return _sinc(u) / (_sinc(alpha * u) ** alpha * _sinc(beta * u) ** beta)


@njit(cache=True)
def double_rejection_one(lam_alpha, alpha, rng, max_proposals):
    """One draw with Laplace transform exp(L**alpha - (L + t)**alpha), L**alpha = lam_alpha.

    Double rejection: an auxiliary angle first, then the variate given it.
    Returns (draw, proposals); draw is nan when the budget is exhausted.
    """
    b = (1.0 - alpha) / alpha
    gamma = lam_alpha * alpha * (1.0 - alpha)
    sg = math.sqrt(gamma)
    c1 = math.sqrt(math.pi / 2.0)
    c3 = (2.0 + c1) * sg
    xi = (1.0 + math.sqrt(2.0) * c3) / math.pi
    psi = c3 * math.exp(-gamma * math.pi * math.pi / 8.0) / math.sqrt(math.pi)
    w1 = c1 * xi / sg
    w2 = 2.0 * math.sqrt(math.pi) * psi
    w3 = xi * math.pi
    tries = 0
    while tries < max_proposals:
        # auxiliary angle
        u = 0.0
        zz = 2.0
        zaux = 0.0
        while tries < max_proposals:
            tries += 1
            v = rng.random()
            if gamma >= 1.0:
                if v < w1 / (w1 + w2):
                    u = abs(rng.standard_normal()) / sg
                else:
                    w = rng.random()
                    u = math.pi * (1.0 - w * w)
            else:
                w = rng.random()
                if v < w3 / (w2 + w3):
                    u = math.pi * w
                else:
                    u = math.pi * (1.0 - w * w)
            if u >= math.pi:
                continue
            zeta = math.sqrt(_dr_bdb0(u, alpha))
            zaux = 1.0 / (1.0 - (1.0 + alpha * zeta / sg) ** (-1.0 / alpha))
            rho = math.pi * math.exp(-lam_alpha * (1.0 - 1.0 / (zeta * zeta))) \
                / ((1.0 + c1) * sg / zeta + zaux)
            d = 0.0
            if gamma >= 1.0:
                d += xi * math.exp(-gamma * u * u / 2.0)
            if u > 0.0:
                d += psi / math.sqrt(math.pi - u)
            if gamma < 1.0:
                d += xi
            zz = rng.random() * rho * d
            if zz <= 1.0:
                break
        if zz > 1.0:
            break
        # variate given the angle
        a = _dr_zolotarev(u, alpha) ** (1.0 / (1.0 - alpha))
        m = (b / a) ** alpha * lam_alpha
        delta = math.sqrt(m * alpha / a)
        a1 = delta * c1
        a3 = zaux / a
        s = a1 + delta + a3
        v2 = rng.random()
        nrm = 0.0
        e1 = 0.0
        if v2 < a1 / s:
            nrm = rng.standard_normal()
            x = m - delta * abs(nrm)
        elif v2 < (a1 + delta) / s:
            x = m + delta * rng.random()
        else:
            e1 = rng.standard_exponential()
            x = m + delta + e1 * a3
        if x < 0.0:
            continue
        c = a * (x - m) + math.exp(math.log(lam_alpha) / alpha - b * math.log(m)) \
            * ((m / x) ** b - 1.0)
        if x < m:
            c -= nrm * nrm / 2.0
        elif x > m + delta:
            c -= e1
        if c <= -math.log(zz):
            return x ** (-b), tries
    return np.nan, tries


@njit(cache=True)
def tilted_stable_rvs(lam, omega, alpha, rng, max_proposals, split_max):
    """Return (draws, failed_index, attempts); failed_index is -1 on success.

    Entries with lam <= split_max are summed from ceil(lam) pieces drawn by
    naive rejection; larger ones use double rejection.
    """
    n = lam.shape[0]
    out = np.zeros(n)
    expo = (1.0 - alpha) / alpha
    lomega = math.log(omega)
    for i in range(n):
        if lam[i] <= 0.0:
            continue
        if lam[i] > split_max:
            t, tries = double_rejection_one(lam[i], alpha, rng, max_proposals)
            if math.isnan(t):
                return out, i, tries
            out[i] = t * lam[i] ** (1.0 / alpha) / omega
            continue
        pieces = max(1.0, math.ceil(lam[i]))
        lcp = math.log(lam[i] / pieces) - alpha * lomega
        total = 0.0
        for _ in range(int(pieces)):
            tries = 0
            while True:
                tries += 1
                if tries > max_proposals:
                    return out, i, tries - 1
                u = math.pi * rng.random()
                e = rng.standard_exponential()
                ls = lcp / alpha + expo * (log_zolotarev(u, alpha) - math.log(e))
                s = math.exp(ls)
                if rng.random() < math.exp(-omega * s):
                    total += s
                    break
        out[i] = total
    return out, -1, 0
