"""Vectorised numpy kernels (fallback when numba is disabled).

Loops run over the series index or bisection step; each step is vectorised
across all evaluation points.
"""
import math

import numpy as np
from scipy.special import gammaln

LOG_PI = math.log(math.pi)
U_MAX = math.pi * (1.0 - 1e-12)
BISECT_STEPS = 64
PEAK_DROP = 40.0
CHUNK = 1 << 16


def _log_sinc(x):
    x = np.asarray(x, dtype=float)
    small = x < 1e-4
    safe = np.where(small, 1.0, x)
    with np.errstate(divide="ignore"):
        big = np.log(np.sin(safe) / safe)
    return np.where(small, -x * x / 6.0, big)


def log_zolotarev(u, alpha):
    beta = 1.0 - alpha
    return ((math.log(alpha) + _log_sinc(alpha * u) - _log_sinc(u)) / beta
            + math.log(beta / alpha) + _log_sinc(beta * u) - _log_sinc(alpha * u))


def _cpg_term(j, ljc, shape, y, kind):
    t = j * ljc - gammaln(j + 1.0) - gammaln(j * shape)
    if kind == 1:
        t = t + gammaln(y + j * shape)
    return t


def _mode(ljc, shape, y, kind):
    def diff(j):
        return _cpg_term(j + 1.0, ljc, shape, y, kind) - _cpg_term(j, ljc, shape, y, kind)

    lo = np.ones_like(ljc)
    hi = np.full_like(ljc, 2.0)
    done = diff(lo) <= 0.0
    climbing = ~done & (diff(hi) > 0.0)
    while climbing.any():
        lo = np.where(climbing, hi, lo)
        hi = np.where(climbing, 2.0 * hi, hi)
        climbing = climbing & (diff(hi) > 0.0)
    active = ~done & (hi - lo > 1.0)
    while active.any():
        mid = np.floor(0.5 * (lo + hi))
        up = diff(mid) > 0.0
        lo = np.where(active & up, mid, lo)
        hi = np.where(active & ~up, mid, hi)
        active = ~done & (hi - lo > 1.0)
    return np.where(done, 1.0, hi)


def _sum_from_mode(jm, ljc, shape, y, kind, rtol, max_terms):
    top = _cpg_term(jm, ljc, shape, y, kind)
    acc = np.ones_like(top)
    count = np.ones(top.shape, dtype=np.int64)
    ok = np.ones(top.shape, dtype=bool)
    for direction in (1.0, -1.0):
        j = jm + direction
        live = ok & (j >= 1.0)
        while live.any():
            r = np.exp(_cpg_term(np.where(live, j, jm), ljc, shape, y, kind) - top)
            r = np.where(live, r, 0.0)
            acc += r
            count += live
            stop = live & (r < rtol * acc)
            over = live & ~stop & (count >= max_terms)
            ok &= ~over
            live = live & ~stop & ~over
            j = j + direction
            live &= j >= 1.0
    return top + np.log(acc), ok


def cpg_logdensity(z, lam, shape, scale, rtol, max_terms):
    lz = np.log(z)
    ljc = np.log(lam) + shape * (lz - np.log(scale))
    jm = _mode(ljc, shape, 0.0, 0)
    s, ok = _sum_from_mode(jm, ljc, shape, 0.0, 0, rtol, max_terms)
    return s - lam - lz - z / scale, ok


def cpg_poisson_logpmf(y, lam, shape, s, rtol, max_terms):
    yf = y.astype(float)
    ljc = np.log(lam) - shape * np.log1p(s)
    jm = _mode(ljc, shape, yf, 1)
    tot, ok = _sum_from_mode(jm, ljc, shape, yf, 1, rtol, max_terms)
    tot = tot - lam - gammaln(yf + 1.0) + yf * (np.log(s) - np.log1p(s))
    tot = np.where(y == 0, np.logaddexp(tot, -lam), tot)
    return tot, ok


def stable_series_logdensity(z, alpha, logc, rtol, max_terms, max_cancel):
    lz = np.log(z)
    x = logc - alpha * lz
    kstar = np.exp((alpha * math.log(alpha) + x) / (1.0 - alpha))
    feasible = (kstar <= max_terms) & ((1.0 - alpha) * kstar <= math.log(max_cancel) + 2.0)
    k0 = np.maximum(1.0, np.floor(np.where(feasible, kstar, 1.0)))

    def env(k):
        return gammaln(k * alpha + 1.0) - gammaln(k + 1.0) + k * x

    top = np.maximum(env(k0), env(k0 + 1.0))
    acc = np.zeros_like(z)
    done = np.zeros(z.shape, dtype=bool)
    live = feasible.copy()
    k = 1.0
    while live.any() and k <= max_terms:
        r = np.exp(env(k) - top)
        sg = math.sin(k * math.pi * alpha) * (-1.0 if int(k) % 2 == 0 else 1.0)
        acc = np.where(live, acc + sg * r, acc)
        fin = live & (k > kstar) & (r < rtol * np.maximum(np.abs(acc), 1.0 / max_cancel))
        done |= fin
        live &= ~fin
        k += 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        lacc = np.log(np.where(acc > 0.0, acc, np.nan))
    ok = done & (acc > 0.0) & (lacc >= -math.log(max_cancel))
    out = np.where(ok, lacc + top - LOG_PI - lz, np.nan)
    return out, ok


def _zh(u, alpha, ltau):
    la = log_zolotarev(u, alpha)
    with np.errstate(over="ignore"):
        return la - np.exp(ltau + la)


def _bisect(f, lo, hi, go_right):
    # go_right(value) is True where the root lies above mid
    for _ in range(BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        right = go_right(f(mid))
        lo = np.where(right, mid, lo)
        hi = np.where(right, hi, mid)
    return lo, hi


def stable_integral_logdensity(z, alpha, logc, gl_x, gl_w):
    beta = 1.0 - alpha
    const = math.log(alpha / (math.pi * beta))
    ls = np.log(z) - logc / alpha
    ltau = -(alpha / beta) * ls
    la0 = float(log_zolotarev(0.0, alpha))
    zero = np.zeros_like(z)
    lo, hi = _bisect(lambda u: log_zolotarev(u, alpha), zero, np.full_like(z, U_MAX),
                     lambda v: v < -ltau)
    ustar = np.where(la0 >= -ltau, 0.0, 0.5 * (lo + hi))
    hs = _zh(ustar, alpha, ltau)
    target = hs - PEAK_DROP
    need_lo = (ustar > 0.0) & (_zh(zero, alpha, ltau) < target)
    lo, _ = _bisect(lambda u: _zh(u, alpha, ltau), zero, ustar, lambda v: v < target)
    ulo = np.where(need_lo, lo, 0.0)
    need_hi = _zh(np.full_like(z, U_MAX), alpha, ltau) < target
    _, hi = _bisect(lambda u: _zh(u, alpha, ltau), ustar, np.full_like(z, U_MAX),
                    lambda v: v >= target)
    uhi = np.where(need_hi, hi, U_MAX)
    acc = np.zeros_like(z)
    for a, b in ((ulo, ustar), (ustar, uhi)):
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        u = mid[:, None] + half[:, None] * gl_x[None, :]
        vals = np.exp(_zh(u, alpha, ltau[:, None]) - hs[:, None])
        acc += np.where(b > a, half * (vals @ gl_w), 0.0)
    return const - ls / beta + hs + np.log(acc) - logc / alpha


def _sinc(x):
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    x2 = x * x
    safe = np.where(ax < 6e-3, 1.0, x)
    return np.where(ax < 2e-4, 1.0 - x2 / 6.0,
                    np.where(ax < 6e-3, 1.0 - x2 / 6.0 * (1.0 - x2 / 20.0),
                             np.sin(safe) / safe))


def _dr_zolotarev(u, alpha):
    beta = 1.0 - alpha
    return ((beta * _sinc(beta * u)) ** beta * (alpha * _sinc(alpha * u)) ** alpha
            / _sinc(u))


def _dr_bdb0(u, alpha):
    beta = 1.0 - alpha
    return _sinc(u) / (_sinc(alpha * u) ** alpha * _sinc(beta * u) ** beta)


def double_rejection(lam_alpha, alpha, rng, max_proposals):
    """Vectorised double rejection; see the numba kernel for the scalar version.

    Returns (draws, proposals) with nan draws where the budget ran out.
    """
    n = lam_alpha.shape[0]
    out = np.full(n, np.nan)
    tries = np.zeros(n, dtype=np.int64)
    b = (1.0 - alpha) / alpha
    gamma = lam_alpha * alpha * (1.0 - alpha)
    sg = np.sqrt(gamma)
    c1 = math.sqrt(math.pi / 2.0)
    c3 = (2.0 + c1) * sg
    xi = (1.0 + math.sqrt(2.0) * c3) / math.pi
    psi = c3 * np.exp(-gamma * math.pi ** 2 / 8.0) / math.sqrt(math.pi)
    w1 = c1 * xi / sg
    w2 = 2.0 * math.sqrt(math.pi) * psi
    w3 = xi * math.pi
    pending = np.arange(n)
    while pending.size:
        # auxiliary angle for every pending entry
        u = np.zeros(pending.size)
        zz = np.zeros(pending.size)
        zaux = np.zeros(pending.size)
        need = np.arange(pending.size)
        while need.size:
            idx = pending[need]
            tries[idx] += 1
            k = need.size
            v = rng.random(k)
            w = rng.random(k)
            nrm = np.abs(rng.standard_normal(k))
            g = gamma[idx]
            big = g >= 1.0
            tail = math.pi * (1.0 - w * w)
            uu = np.where(big,
                          np.where(v < w1[idx] / (w1[idx] + w2[idx]), nrm / sg[idx], tail),
                          np.where(v < w3[idx] / (w2[idx] + w3[idx]), math.pi * w, tail))
            inside = uu < math.pi
            uc = np.where(inside, uu, 1.0)
            zeta = np.sqrt(_dr_bdb0(uc, alpha))
            za = 1.0 / (1.0 - (1.0 + alpha * zeta / sg[idx]) ** (-1.0 / alpha))
            with np.errstate(over="ignore"):
                rho = math.pi * np.exp(-lam_alpha[idx] * (1.0 - 1.0 / (zeta * zeta))) \
                    / ((1.0 + c1) * sg[idx] / zeta + za)
            d = np.where(big, xi[idx] * np.exp(-g * uc * uc / 2.0), xi[idx])
            d = d + np.where(uc > 0.0, psi[idx] / np.sqrt(math.pi - uc), 0.0)
            z = rng.random(k) * rho * d
            ok = inside & (z <= 1.0)
            u[need[ok]] = uu[ok]
            zz[need[ok]] = z[ok]
            zaux[need[ok]] = za[ok]
            need = need[~ok]
            need = need[tries[pending[need]] < max_proposals]
        # variate given the angle
        la = lam_alpha[pending]
        a = _dr_zolotarev(u, alpha) ** (1.0 / (1.0 - alpha))
        m = (b / a) ** alpha * la
        delta = np.sqrt(m * alpha / a)
        a1 = delta * c1
        a3 = zaux / a
        s = a1 + delta + a3
        k = pending.size
        v2 = rng.random(k)
        nrm = rng.standard_normal(k)
        un = rng.random(k)
        e1 = rng.standard_exponential(k)
        left = v2 < a1 / s
        mid = ~left & (v2 < (a1 + delta) / s)
        right = ~left & ~mid
        x = np.where(left, m - delta * np.abs(nrm), np.where(mid, m + delta * un,
                                                              m + delta + e1 * a3))
        xs = np.where(x > 0.0, x, 1.0)
        with np.errstate(over="ignore", divide="ignore"):
            c = a * (xs - m) + np.exp(np.log(la) / alpha - b * np.log(m)) * ((m / xs) ** b - 1.0)
            c = c - np.where(left, nrm * nrm / 2.0, 0.0) - np.where(right, e1, 0.0)
            acc = (x >= 0.0) & (zz <= 1.0) & (zz > 0.0) & (c <= -np.log(zz))
        out[pending[acc]] = xs[acc] ** (-b)
        pending = pending[~acc]
        pending = pending[tries[pending] < max_proposals]
    return out, tries


def tilted_stable_rvs(lam, omega, alpha, rng, max_proposals, split_max):
    """Return (draws, failed_index, attempts); failed_index is -1 on success."""
    n = lam.shape[0]
    out = np.zeros(n)
    expo = (1.0 - alpha) / alpha
    lomega = math.log(omega)
    big = np.flatnonzero(lam > split_max)
    if big.size:
        t, tries = double_rejection(lam[big], alpha, rng, max_proposals)
        bad = np.flatnonzero(np.isnan(t))
        if bad.size:
            return out, int(big[bad[0]]), int(tries[bad[0]])
        out[big] = t * lam[big] ** (1.0 / alpha) / omega
    for start in range(0, n, CHUNK):
        lam_c = np.where(lam[start:start + CHUNK] > split_max, 0.0, lam[start:start + CHUNK])
        pieces = np.where(lam_c > 0.0, np.maximum(1.0, np.ceil(lam_c)), 0.0).astype(np.int64)
        owner = np.repeat(np.arange(lam_c.shape[0]), pieces)
        with np.errstate(divide="ignore"):
            lcp = (np.log(lam_c / np.maximum(pieces, 1)) - alpha * lomega)[owner]
        values = np.zeros(owner.shape[0])
        pending = np.arange(owner.shape[0])
        tries = 0
        while pending.size:
            tries += 1
            if tries > max_proposals:
                return out, start + int(owner[pending[0]]), tries - 1
            k = pending.size
            u = math.pi * rng.random(k)
            e = rng.standard_exponential(k)
            with np.errstate(over="ignore", divide="ignore"):
                s = np.exp(lcp[pending] / alpha + expo * (log_zolotarev(u, alpha) - np.log(e)))
                acc = rng.random(k) < np.exp(-omega * s)
            values[pending[acc]] = s[acc]
            pending = pending[~acc]
        small = lam_c > 0.0
        sums = np.bincount(owner, weights=values, minlength=lam_c.shape[0])
        out[start:start + lam_c.shape[0]][small] = sums[small]
    return out, -1, 0
