import math
import threading

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rkhs_wco.errors import DomainError
from rkhs_wco.mpseries import TruncatedSeries, basis, pow_real
from rkhs_wco.sampling import random_unitary, sample_ball
from rkhs_wco.spaces import (
    custom_space,
    detect_hgamma,
    dirichlet_type_space,
    exponential_space,
    gram_from_kernel_expansion,
    hgamma_space,
    kernel_eval,
    monomial_norm_sq,
    norm_sq,
    pointwise_bound_check,
    power_space,
    sup_kernel_diagonal,
)


def test_hgamma_coefficients():
    np.testing.assert_allclose(hgamma_space(1, 2).coeffs.get(30), np.ones(30))
    ref = pow_real(1 - TruncatedSeries.variable(0, 1, 15), -2).array.real
    np.testing.assert_allclose(hgamma_space(2, 1).coeffs.get(16), ref, rtol=1e-13)
    np.testing.assert_allclose(ref, np.arange(16) + 1, rtol=1e-13)


def test_hardy_space_of_b2_is_gamma_equal_dimension():
    hardy = hgamma_space(2, 2)
    assert hardy.coeffs.tag == "HGamma(2)"
    z = np.array([0.3, 0.4j])
    assert kernel_eval(hardy, z, z)[0] == pytest.approx(1 / (1 - 0.25) ** 2)


@pytest.mark.parametrize("gamma", [0, -1.5])
def test_hgamma_rejects_nonpositive_gamma(gamma):
    with pytest.raises(DomainError):
        hgamma_space(gamma, 1)


@pytest.mark.parametrize("make", [lambda d: hgamma_space(0.7, d), dirichlet_type_space, exponential_space,
                                  lambda d: power_space(2, d)])
def test_kernel_at_origin_is_one(make, rng):
    sp = make(2)
    z = sample_ball(rng, 5, 2, 0.9)
    val, ok = sp.kernel(z, np.zeros(2))
    np.testing.assert_allclose(val, 1.0)
    assert ok.all()


def test_kernel_h1_value():
    sp = hgamma_space(1, 1)
    val, ok = kernel_eval(sp, [0.5], [0.5])
    assert ok and val == pytest.approx(4 / 3, rel=1e-15)
    ps, ok = sp.h_partial_sum(np.array([0.25]))
    assert ok[0] and ps[0] == pytest.approx(4 / 3, rel=1e-14)


def test_bounded_family_near_boundary():
    sp = power_space(2, 1)
    val, ok = kernel_eval(sp, [math.sqrt(0.95)], [math.sqrt(0.95)])
    assert ok and val.real < math.pi**2 / 6
    sup = sup_kernel_diagonal(sp)
    assert sup.kind == "finite" and sup.value == pytest.approx(math.pi**2 / 6, abs=1e-6)


def test_kernel_outside_ball():
    with pytest.raises(DomainError):
        hgamma_space(1, 2).kernel(np.array([0.8, 0.8]), np.zeros(2))


def test_kernel_flags_boundary_arguments():
    sp = dirichlet_type_space(1)
    _, ok = sp.kernel(np.array([0.99]), np.array([0.99]))
    assert not ok


def test_monomial_norm_examples():
    assert monomial_norm_sq(hgamma_space(1, 2), (0, 0)) == 1
    assert monomial_norm_sq(hgamma_space(1, 2), (1, 1)) == pytest.approx(0.5)
    assert monomial_norm_sq(dirichlet_type_space(1), (3,)) == pytest.approx(4.0)
    with pytest.raises(DomainError):
        monomial_norm_sq(custom_space([1, 1, 0, 1], 1), (2,))


def test_sup_examples():
    assert sup_kernel_diagonal(hgamma_space(1.5, 1)).kind == "infinite"
    assert sup_kernel_diagonal(dirichlet_type_space(1)).kind == "infinite"
    assert sup_kernel_diagonal(exponential_space(1)).value == pytest.approx(math.e, abs=1e-12)
    assert sup_kernel_diagonal(custom_space([1, 0.5, 0.25], 1)).value == pytest.approx(1.75)
    assert sup_kernel_diagonal(custom_space(lambda n: 1 / (np.arange(n) + 1.0), 1)).kind == "unknown"


def test_detect_examples():
    assert str(detect_hgamma(custom_space(lambda n: np.ones(n), 1))) == "IsHGamma(1)"
    det = detect_hgamma(exponential_space(1))
    assert not det.is_hgamma and det.witness == 2
    det = detect_hgamma(custom_space(lambda n: np.arange(n) + 1.0, 1))
    assert det.is_hgamma and det.gamma == 2
    with pytest.raises(DomainError):
        detect_hgamma(hgamma_space(1, 1), n_check=1)


def test_detect_random_gammas():
    rng = np.random.default_rng(3)
    for gamma in rng.uniform(1e-3, 5, 20):
        det = detect_hgamma(hgamma_space(gamma, 2), tol=1e-10)
        assert det.is_hgamma and det.gamma == pytest.approx(gamma, rel=1e-14)


def test_pointwise_bound_examples(rng):
    sp = hgamma_space(1, 2)
    assert pointwise_bound_check(sp, TruncatedSeries.constant(1.0, 2, 3), np.zeros((1, 2))) == pytest.approx(0.0)
    assert pointwise_bound_check(sp, TruncatedSeries.constant(1.0, 2, 3), sample_ball(rng, 30, 2, 0.9)) <= 0
    z1 = TruncatedSeries.variable(0, 2, 3)
    assert norm_sq(sp, z1) == 1.0
    r = np.linspace(0, 0.95, 20)
    pts = np.stack([r, np.zeros_like(r)], axis=1).astype(complex)
    assert pointwise_bound_check(sp, z1, pts) <= 1e-15


def test_pointwise_bound_random_polynomial(rng):
    sp = hgamma_space(2, 2)
    b = basis(2, 4)
    f = TruncatedSeries.from_array(2, 4, rng.normal(size=b.size) + 1j * rng.normal(size=b.size))
    assert pointwise_bound_check(sp, f, sample_ball(rng, 100, 2, 0.9)) <= 1e-10


@pytest.mark.parametrize("gamma", [0.5, 1, 2, 3])
def test_closed_form_matches_partial_sums(gamma, rng):
    sp = hgamma_space(gamma, 3)
    z, w = sample_ball(rng, 500, 3, 0.7), sample_ball(rng, 500, 3, 0.7)
    closed, _ = sp.kernel(z, w)
    t = np.einsum("nd,nd->n", z, w.conj())
    partial, _ = sp.h_partial_sum(t, n_terms=200)
    np.testing.assert_allclose(closed, partial, rtol=1e-10)


@pytest.mark.parametrize("make", [lambda: hgamma_space(1, 2), lambda: hgamma_space(2, 2), lambda: dirichlet_type_space(2)])
def test_gram_matrix_is_diagonal_monomial_norms(make):
    sp = make()
    G = gram_from_kernel_expansion(sp, 6)
    expected = [monomial_norm_sq(sp, a) for a in basis(2, 6).exps]
    np.testing.assert_allclose(G, np.diag(expected), atol=1e-12)


@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3]))
def test_unitary_invariance(seed, dim):
    rng = np.random.default_rng(seed)
    u = random_unitary(rng, dim)
    z, w = sample_ball(rng, 10, dim, 0.8), sample_ball(rng, 10, dim, 0.8)
    for sp in (hgamma_space(1.3, dim), dirichlet_type_space(dim), power_space(2.5, dim)):
        a, _ = sp.kernel(z @ u.T, w @ u.T)
        b, _ = sp.kernel(z, w)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_coefficient_cache_concurrent_readers():
    sp = dirichlet_type_space(1)
    out = []
    threads = [threading.Thread(target=lambda n=n: out.append(sp.coeffs.get(50 + 37 * n)[:50].copy())) for n in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for v in out:
        np.testing.assert_array_equal(v, 1 / (np.arange(50) + 1.0))


def test_invalid_custom_sequences():
    with pytest.raises(DomainError):
        custom_space([2, 1], 1)
    with pytest.raises(DomainError):
        custom_space([1, 0, 1], 1)
    with pytest.raises(DomainError):
        custom_space([1, 1, -0.5], 1)
