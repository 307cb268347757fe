"""The compiled and pure-numpy kernels must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest

from rkhs_wco import _kernels
from rkhs_wco.mpseries import basis

pytestmark = pytest.mark.skipif(_kernels.NUMBA is None, reason="numba unavailable")


def _cplx(rng, n):
    return rng.normal(size=n) + 1j * rng.normal(size=n)


@pytest.mark.parametrize("dim,n", [(1, 12), (2, 8), (3, 6)])
def test_cauchy_product_backends_agree(rng, dim, n):
    b = basis(dim, n)
    x, y = _cplx(rng, b.size), _cplx(rng, b.size)
    r1 = _kernels.NUMPY.cauchy_product(x, y, b.ii, b.jj, b.kk, b.size)
    r2 = _kernels.NUMBA.cauchy_product(x, y, b.ii, b.jj, b.kk, b.size)
    np.testing.assert_allclose(r1, r2, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("weights", [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (0.5, 0.25, -0.75)])
@pytest.mark.parametrize("dim,n", [(1, 10), (2, 7), (3, 5)])
def test_triangular_solve_backends_agree(rng, dim, n, weights):
    b = basis(dim, n)
    c, p, q = _cplx(rng, b.size) * 0.3, _cplx(rng, b.size), _cplx(rng, b.size) * 0.3
    args = (c, p, q, b.nz_ii, b.nz_jj, b.nz_kk, b.deg, *weights)
    np.testing.assert_allclose(_kernels.NUMPY.triangular_solve(*args), _kernels.NUMBA.triangular_solve(*args),
                               rtol=1e-12, atol=1e-12)


def test_partial_sums_backends_agree(rng):
    coef = 1.0 / (np.arange(4000) + 1.0) ** 2
    coef[5] = 0.0  # gaps must be skipped by the stopping rule
    t = 0.9 * (rng.random(200) * np.exp(2j * np.pi * rng.random(200)))
    s1, u1, d1 = _kernels.NUMPY.partial_sums(coef, t, 1e-16)
    s2, u2, d2 = _kernels.NUMBA.partial_sums(coef, t, 1e-16)
    np.testing.assert_allclose(s1, s2, rtol=1e-14)
    np.testing.assert_array_equal(u1, u2)
    np.testing.assert_array_equal(d1, d2)


def test_partial_sums_flags_unconverged():
    coef = np.ones(50)
    s, used, done = _kernels.partial_sums(coef, np.array([0.1 + 0j, 0.99 + 0j]), 1e-16)
    assert done[0] and not done[1]
    assert used[1] == 50


@pytest.mark.parametrize("flag,expected", [("1", "numpy"), ("0", "numba")])
def test_env_flag_selects_backend(flag, expected):
    env = dict(os.environ, RKHS_WCO_DISABLE_JIT=flag)
    out = subprocess.run([sys.executable, "-c", "import rkhs_wco; print(rkhs_wco.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected
