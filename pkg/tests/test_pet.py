import math
import warnings

import numpy as np
import pytest
from scipy import stats

from conftest import mean_var_se
from petweedie import PetParams, pet_mean, pet_variance, sample_pet
from petweedie.errors import DomainError, TailUnderflowError
from petweedie.seeding import substream
from petweedie.pet import (QuadratureWarning, ht_index, logpmf, logpmf_quadrature,
                           negative_binomial_distance, pet_log_likelihood, pmf_mc,
                           pmf_mc_table, pmf_pgf, pmf_quadrature, support_max, zero_rate)

SWISS = PetParams(1.95, 0.155, 0.05)


def test_mean_and_variance():
    assert pet_mean(SWISS) == 0.155
    assert pet_mean(PetParams(3, 7, 0.5)) == 7
    assert pet_variance(PetParams(2, 1, 1)) == pytest.approx(3.0)
    for p in (1.0, 1.5, 3.0):
        assert pet_variance(PetParams(p, 2, 0)) == pytest.approx(6.0)


def test_variance_at_swiss_parameters():
    expected = 0.155 + 0.155 ** 2 + 0.05 * 0.155 ** 1.95
    assert pet_variance(SWISS) == pytest.approx(expected, abs=1e-15)
    assert abs(pet_variance(SWISS) - 0.180345) < 2e-6


def test_negative_phi_moments_allowed_law_refused():
    par = PetParams(1.5, 1.0, -0.1)
    assert pet_variance(par) == pytest.approx(1.9)
    with pytest.raises(DomainError):
        sample_pet(par, 10)
    with pytest.raises(DomainError):
        logpmf(par, [0])
    with pytest.raises(DomainError):
        PetParams(1.5, 1.0, -2.0)  # bound is phi > -2 at m = 1


def test_zero_rate_p2_closed_form():
    # P(0) = 1 / (1 + c0) with c0 = log(1 + phi m) / phi at p = 2
    par = PetParams(2.0, 1.3, 0.7)
    c0 = math.log1p(0.7 * 1.3) / 0.7
    assert zero_rate(par) == pytest.approx(c0, rel=1e-13)
    assert pmf_pgf(par, 0)[0] == pytest.approx(1 / (1 + c0), rel=1e-13)


def test_pgf_p1_is_poisson_geometric():
    # p = 1: Z | X = phi * Poisson(X m / phi); pgf(0) = 1/(1 + m (1 - e^{-phi}) / phi)
    par = PetParams(1.0, 2.0, 0.5)
    assert pmf_pgf(par, 0)[0] == pytest.approx(1 / (1 + 2.0 * (1 - math.exp(-0.5)) / 0.5),
                                               rel=1e-13)


def test_pgf_matches_brute_force_mixture():
    # p = 2: Y | X ~ NB, integrate X numerically
    from scipy import integrate
    par = PetParams(2.0, 1.2, 0.8)
    def cond(x, y):
        k = x / 0.8
        q = 1.0 / (1.0 + 0.8 * 1.2)
        return stats.nbinom.pmf(y, k, q) * math.exp(-x)
    ref = [integrate.quad(cond, 0, np.inf, args=(y,), epsabs=1e-14)[0] for y in range(8)]
    np.testing.assert_allclose(pmf_pgf(par, 7), ref, rtol=1e-9)


GRID = [(p, m, phi) for p in (1.2, 1.5, 1.95, 2.0, 2.5, 3.0, 4.0)
        for m in (0.155, 1.0, 5.0) for phi in (0.05, 0.5, 1.0)]


@pytest.mark.parametrize("p,m,phi", GRID)
def test_quadrature_matches_pgf(p, m, phi):
    par = PetParams(p, m, phi)
    ys = np.arange(21)
    ref = pmf_pgf(par, 20)
    got = np.exp(logpmf_quadrature(par, ys))
    np.testing.assert_allclose(got, ref, rtol=1e-9, atol=1e-300)


@pytest.mark.parametrize("p,m,phi", [(2.5, 1.0, 1.0), (3.0, 0.155, 0.5), (2.2, 5.0, 0.05)])
def test_density_inner_rule_matches_pgf(p, m, phi):
    par = PetParams(p, m, phi)
    ys = np.arange(6)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", QuadratureWarning)
        got = np.exp(logpmf_quadrature(par, ys, inner="density"))
    np.testing.assert_allclose(got, pmf_pgf(par, 5), rtol=1e-4)


def test_quadrature_values_are_probabilities():
    v = np.exp(logpmf_quadrature(PetParams(1.5, 1, 1), np.arange(21)))
    assert np.all((v > 0) & (v <= 1))


def test_quadrature_normalises():
    par = PetParams(2.5, 1.0, 1.0)
    ymax = support_max(par)
    assert np.exp(logpmf_quadrature(par, np.arange(ymax + 1))).sum() >= 0.999


def test_quadrature_refuses_p1_and_small_rules():
    with pytest.raises(DomainError):
        logpmf_quadrature(PetParams(1.0, 1, 1), [0])
    with pytest.raises(DomainError):
        logpmf_quadrature(PetParams(1.5, 1, 1), [0], x_nodes=4)


def test_quad_dispatch_reroutes_p1():
    par = PetParams(1.0, 2.0, 0.5)
    lp, se = logpmf(par, [0, 1, 2])
    np.testing.assert_allclose(np.exp(lp), pmf_pgf(par, 2))
    assert np.all(se == 0)


def test_mc_matches_pgf_swiss():
    est, se = pmf_mc_table(SWISS, np.arange(6), draws=10**6, seed=1)
    ref = pmf_pgf(SWISS, 5)
    assert np.all(np.abs(est - ref) < 3 * se)


def test_mc_low_cells_match_exact():
    est0, se0 = pmf_mc(SWISS, 0, draws=10**6, seed=2)
    est1, se1 = pmf_mc(SWISS, 1, draws=10**6, seed=2)
    assert se0 > 0 and se1 > 0
    assert abs(est0 - pmf_pgf(SWISS, 0)[0]) < 3 * se0
    assert abs(est1 - pmf_pgf(SWISS, 1)[1]) < 3 * se1


def test_mc_normalisation():
    par = PetParams(2.5, 1.0, 1.0)
    ymax = support_max(par)
    est, _ = pmf_mc_table(par, np.arange(ymax + 1), draws=10**6, seed=3)
    assert 0.999 <= est.sum() <= 1.001


def test_mc_deterministic_and_worker_independent():
    par = PetParams(1.5, 1.0, 1.0)
    a = pmf_mc_table(par, [0, 1, 2], draws=300_000, seed=4)
    b = pmf_mc_table(par, [0, 1, 2], draws=300_000, seed=4, workers=3)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_mc_covariance_diagonal_matches_se():
    est, se = pmf_mc_table(SWISS, [0, 1], draws=300_000, seed=5)
    _, cov = pmf_mc_table(SWISS, [0, 1], draws=300_000, seed=5, return_cov=True)
    np.testing.assert_allclose(np.sqrt(np.diag(cov)), se, rtol=1e-10)
    assert cov[0, 1] < 0  # P(0) and P(1) compete for mass


@pytest.mark.parametrize("case,p,m,phi", [(0, 2.0, 1.0, 1.0), (1, 1.5, 1.0, 1.0),
                                          (2, 3.0, 1.0, 0.5)])
def test_sample_moments(case, p, m, phi):
    par = PetParams(p, m, phi)
    y = sample_pet(par, 100_000, seed=substream(None, "test_sample_moments", case))
    mean, var, se_m, se_v = mean_var_se(y)
    assert abs(mean - m) < 3 * se_m
    assert abs(var - pet_variance(par)) < 3 * se_v


def test_sample_zero_fraction_swiss():
    y = sample_pet(SWISS, 10**6, seed=8)
    q = pmf_pgf(SWISS, 0)[0]
    assert abs(np.mean(y == 0) - q) < 3 * math.sqrt(q * (1 - q) / y.size)


@pytest.mark.parametrize("p,m,phi", [(1.5, 1.0, 1.0), (2.5, 1.0, 1.0), (3.0, 0.155, 0.5)])
def test_sample_frequencies_chi_square(p, m, phi):
    par = PetParams(p, m, phi)
    y = sample_pet(par, 100_000, seed=13)
    probs = pmf_pgf(par, 400)
    exp = y.size * probs
    k = int(np.flatnonzero(exp >= 5)[-1]) + 1
    obs = np.bincount(np.minimum(y, k), minlength=k + 1)
    e = np.concatenate([exp[:k], [y.size - exp[:k].sum()]])
    if e[-1] < 5:
        obs = np.concatenate([obs[:k - 1], [obs[k - 1:].sum()]])
        e = np.concatenate([e[:k - 1], [e[k - 1:].sum()]])
    chi2 = np.sum((obs - e) ** 2 / e)
    assert stats.chi2.sf(chi2, e.size - 1) > 0.01


def test_log_likelihood_basics():
    assert pet_log_likelihood([], 1.5, 1.0, 1.0) == 0.0
    ll = pet_log_likelihood([0], 1.95, 0.155, 0.05)
    assert ll == pytest.approx(math.log(pmf_pgf(SWISS, 0)[0]), rel=1e-10)
    ll_mc, se = pet_log_likelihood([0], 1.95, 0.155, 0.05, method="mc", seed=3,
                                   return_se=True)
    assert abs(ll_mc - ll) < 3 * se


def test_log_likelihood_per_observation_means():
    y = np.array([0, 2, 1, 5])
    m = np.array([0.5, 1.0, 0.5, 3.0])
    ll = pet_log_likelihood(y, 2.5, m, 0.7)
    ref = sum(math.log(pmf_pgf(PetParams(2.5, mi, 0.7), yi)[yi]) for yi, mi in zip(y, m))
    assert ll == pytest.approx(ref, rel=1e-10)


def test_log_likelihood_reproducible_across_seeds():
    from petweedie.study import swiss_accidents
    ys, f = swiss_accidents().arrays()
    y = np.repeat(ys, f.astype(int))
    a, sa = pet_log_likelihood(y, 1.95, 0.155, 0.05, method="mc", seed=1, return_se=True)
    b, sb = pet_log_likelihood(y, 1.95, 0.155, 0.05, method="mc", seed=2, return_se=True)
    assert np.isfinite(a) and a < 0
    assert abs(a - b) < 3 * math.hypot(sa, sb)


def test_ht_index_p2_converges_in_unit_interval():
    par = PetParams(2.0, 1.0, 1.0)
    r = np.array([ht_index(par, y) for y in range(50, 101, 10)])
    assert np.all((r > 0) & (r < 1))
    assert np.all(np.diff(r) > 0)
    assert abs(r[-1] - r[-2]) < abs(r[1] - r[0])


def test_ht_index_heavier_than_poisson():
    assert ht_index(PetParams(3.0, 1.0, 1.0), 100) > 1.0 / 101


def test_ht_index_underflow():
    with pytest.raises(TailUnderflowError):
        ht_index(PetParams(1.2, 0.01, 0.05), 2000)


def test_negative_binomial_comparison_is_reported():
    tv, size, prob = negative_binomial_distance(PetParams(2.0, 1.0, 1.0))
    assert 0.0 <= tv < 1.0 and size > 0 and 0 < prob < 1
