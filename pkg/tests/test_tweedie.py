import math

import numpy as np
import pytest
from scipy import integrate, stats

from conftest import mean_var_se
from petweedie import TweedieParams, sample_tweedie, tweedie_density, tweedie_logdensity
from petweedie.errors import DomainError, EvaluationError
from petweedie.tweedie import cpg_decomposition


@pytest.mark.parametrize("mu,psi,expected", [
    (1.0, 1.0, (2.0, 1.0, 0.5)),
    (1.0, 2.0, (1.0, 1.0, 1.0)),
])
def test_cpg_decomposition_values(mu, psi, expected):
    assert cpg_decomposition(TweedieParams(1.5, mu, psi)) == pytest.approx(expected, rel=1e-14)


def test_cpg_shape_near_gamma_boundary():
    _, shape, _ = cpg_decomposition(TweedieParams(1.99, 1.0, 1.0))
    assert shape == pytest.approx(0.01 / 0.99, rel=1e-12)


def test_cpg_decomposition_rejects_other_powers():
    with pytest.raises(DomainError):
        cpg_decomposition(TweedieParams(2.5, 1.0, 1.0))


@pytest.mark.parametrize("p,mu,psi", [(0.5, 1, 1), (1.5, 0.0, 1), (1.5, 1, 0.0),
                                      (2.0, 1, -1), (float("nan"), 1, 1)])
def test_params_reject_out_of_domain(p, mu, psi):
    with pytest.raises(DomainError):
        TweedieParams(p, mu, psi)


def test_atom_mass():
    assert tweedie_density(TweedieParams(1.5, 1.0, 1.0), 0.0) == pytest.approx(math.exp(-2), rel=1e-14)


def test_gamma_closed_form():
    assert tweedie_density(TweedieParams(2.0, 1.0, 1.0), 1.0) == pytest.approx(math.exp(-1), rel=1e-13)


def test_inverse_gaussian_matches_scipy():
    z = np.linspace(0.05, 6, 40)
    mu, psi = 1.7, 0.6
    ref = stats.invgauss.pdf(z, mu=mu * psi, scale=1.0 / psi)
    got = tweedie_density(TweedieParams(3.0, mu, psi), z)
    np.testing.assert_allclose(got, ref, rtol=1e-12)


def test_cpg_density_matches_direct_series():
    # direct sum of Poisson(rate) weighted gamma densities
    par = TweedieParams(1.4, 2.0, 0.8)
    rate, shape, scale = cpg_decomposition(par)
    z = np.array([0.01, 0.3, 1.0, 2.5, 7.0])
    j = np.arange(1, 400)[:, None]
    ref = np.sum(stats.poisson.pmf(j, rate) * stats.gamma.pdf(z, j * shape, scale=scale), axis=0)
    np.testing.assert_allclose(tweedie_density(par, z), ref, rtol=1e-10)


def _total_mass(par):
    f = lambda z: tweedie_density(par, z)
    pieces = [0.0, 1e-6, par.mu, 4 * par.mu, 20 * par.mu, np.inf]
    s = sum(integrate.quad(f, a, b, limit=400, epsabs=1e-12, epsrel=1e-10)[0]
            for a, b in zip(pieces[:-1], pieces[1:]))
    if 1 < par.p < 2:
        s += tweedie_density(par, 0.0)
    return s


@pytest.mark.parametrize("p", [1.2, 1.5, 1.8, 2.5, 3.0])
@pytest.mark.parametrize("mu", [0.5, 1.0, 5.0])
@pytest.mark.parametrize("psi", [0.5, 1.0])
def test_density_normalises(p, mu, psi):
    assert abs(_total_mass(TweedieParams(p, mu, psi)) - 1.0) < 1e-6


def test_stable_series_and_integral_agree():
    z = np.linspace(0.2, 8, 25)
    a = tweedie_logdensity(z, 2.5, 1.0, 1.0, method="integral")
    b = tweedie_logdensity(z, 2.5, 1.0, 1.0, method="auto")
    np.testing.assert_allclose(a, b, rtol=1e-8, atol=1e-10)


def test_stable_three_matches_inverse_gaussian_via_integral():
    # the generic p > 2 evaluator at p = 3 against the closed form
    from petweedie.tweedie import _stable_logdensity
    z = np.linspace(0.1, 5, 20)
    got = _stable_logdensity(z, 3.0, 1.3, 0.7, "integral")
    ref = tweedie_logdensity(z, 3.0, 1.3, 0.7)
    np.testing.assert_allclose(got, ref, rtol=1e-8)


def test_series_only_raises_when_it_cannot_converge():
    with pytest.raises(EvaluationError):
        tweedie_logdensity(np.array([1e-3]), 2.05, 1.0, 0.01, method="series")


def test_density_rejects_negative_support():
    with pytest.raises(DomainError):
        tweedie_density(TweedieParams(1.5, 1, 1), -0.1)


@pytest.mark.parametrize("p,mu,psi", [(1.0, 1.5, 0.5), (1.3, 1.0, 1.0), (1.5, 2.0, 0.5),
                                      (2.0, 2.0, 0.5), (2.5, 1.0, 1.0), (3.0, 1.0, 1.0),
                                      (4.0, 0.7, 0.3)])
def test_sampler_moments(p, mu, psi):
    z = sample_tweedie(TweedieParams(p, mu, psi), 100_000, seed=7)
    mean, var, se_m, se_v = mean_var_se(z)
    assert abs(mean - mu) < 3 * se_m
    assert abs(var - psi * mu ** p) < 3 * se_v


def test_zero_fraction_matches_atom():
    z = sample_tweedie(TweedieParams(1.5, 1.0, 1.0), 100_000, seed=3)
    q = math.exp(-2)
    assert abs(np.mean(z == 0) - q) < 3 * math.sqrt(q * (1 - q) / z.size)


@pytest.mark.parametrize("p,mu,psi", [(1.5, 1.0, 1.0), (2.5, 1.0, 1.0), (3.0, 1.0, 0.5)])
def test_sampler_matches_density_ks(p, mu, psi):
    par = TweedieParams(p, mu, psi)
    z = np.sort(sample_tweedie(par, 100_000, seed=11))
    grid = np.quantile(z[z > 0], np.linspace(0.001, 0.999, 300))
    f = lambda t: tweedie_density(par, t)
    cdf = np.empty(grid.size)
    acc = tweedie_density(par, 0.0) if p < 2 else 0.0
    lo = 0.0
    for i, g in enumerate(grid):
        acc += integrate.quad(f, lo, g, limit=200)[0]
        cdf[i] = acc
        lo = g
    emp = np.searchsorted(z, grid, side="right") / z.size
    crit = 1.63 / math.sqrt(z.size)  # 1% level
    assert np.max(np.abs(emp - cdf)) < crit


def test_sampler_deterministic():
    par = TweedieParams(2.5, 1.0, 1.0)
    a = sample_tweedie(par, 1000, seed=99)
    b = sample_tweedie(par, 1000, seed=99)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_tweedie(par, 1000, seed=100))
