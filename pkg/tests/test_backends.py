import os
import subprocess
import sys

import numpy as np
import pytest

from petweedie import kernels

pytestmark = pytest.mark.skipif(kernels.BACKEND != "numba", reason="numba not active")


@pytest.fixture(scope="module")
def inputs():
    rng = np.random.default_rng(8)
    return {"y": rng.integers(0, 40, 500), "z": rng.gamma(2.0, 1.5, 500),
            "lam": rng.uniform(0.01, 30, 500)}


def both(fn):
    return fn("numba"), fn("numpy")


def test_cpg_density(inputs):
    a, b = both(lambda be: kernels.cpg_logdensity(inputs["z"], inputs["lam"], 0.7, 0.9,
                                                  backend=be))
    np.testing.assert_allclose(a[0], b[0], rtol=1e-12)
    np.testing.assert_array_equal(a[1], b[1])


def test_cpg_poisson(inputs):
    a, b = both(lambda be: kernels.cpg_poisson_logpmf(inputs["y"], inputs["lam"], 1.5, 0.4,
                                                      backend=be))
    np.testing.assert_allclose(a[0], b[0], rtol=1e-12)


def test_stable_series(inputs):
    a, b = both(lambda be: kernels.stable_series_logdensity(inputs["z"], 0.4, -0.3,
                                                            backend=be))
    np.testing.assert_array_equal(a[1], b[1])
    ok = a[1]
    np.testing.assert_allclose(a[0][ok], b[0][ok], rtol=1e-11)


def test_stable_integral(inputs):
    a, b = both(lambda be: kernels.stable_integral_logdensity(inputs["z"], 0.6, 0.2,
                                                              backend=be))
    np.testing.assert_allclose(a, b, rtol=1e-10)


@pytest.mark.parametrize("scale", [0.5, 25.0])
def test_tilted_stable_moments_agree(scale):
    # different draw orders, same law: compare means against the exact value
    alpha, omega = 0.5, 1.0
    lam = np.full(200_000, scale)
    exact = lam[0] * alpha * omega ** (alpha - 1.0)
    for be in ("numba", "numpy"):
        out, failed, _ = kernels.tilted_stable_rvs(lam, omega, alpha,
                                                   np.random.default_rng(1), 10**6, backend=be)
        assert failed == -1
        se = out.std() / np.sqrt(out.size)
        assert abs(out.mean() - exact) < 3 * se


def test_env_flag_selects_numpy():
    code = ("import numpy as np;from petweedie import kernels;"
            "from petweedie.pet import PetParams, logpmf_quadrature;"
            "print(kernels.BACKEND);"
            "print(repr(float(logpmf_quadrature(PetParams(1.5, 1.0, 1.0), [3])[0])))")
    env = dict(os.environ, PETWEEDIE_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env)
    backend, value = out.stdout.split()
    assert backend == "numpy"
    from petweedie.pet import PetParams, logpmf_quadrature
    here = float(logpmf_quadrature(PetParams(1.5, 1.0, 1.0), [3])[0])
    assert float(value) == pytest.approx(here, rel=1e-12)
