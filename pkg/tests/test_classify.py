import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rkhs_wco.ballgeom import Automorphism, LinearMap, MobiusInvolution
from rkhs_wco.classify import (
    SamplingConfig,
    Status,
    bounded_kernel_maxmod_check,
    classify,
    recover_parameters,
    rigidity_report,
    theorem_suite,
)
from rkhs_wco.errors import DomainError, UnsupportedError
from rkhs_wco.sampling import random_unimodular, random_unitary, sample_ball
from rkhs_wco.spaces import dirichlet_type_space, exponential_space, hgamma_space, power_space
from rkhs_wco.wco import (
    automorphism_symbol,
    canonical_hgamma_symbol,
    forced_symbol,
    perturb_delta,
    unitary_const_symbol,
)

CFG = SamplingConfig(seed=7)


def test_sampling_config_validation():
    with pytest.raises(DomainError):
        SamplingConfig(radius=1.0)
    with pytest.raises(DomainError):
        SamplingConfig(n_pairs=0)
    with pytest.raises(DomainError):
        SamplingConfig(pass_tol=1e-2, refute_tol=1e-3)


def test_classify_canonical_h1():
    a, mu = np.array([0.3, 0.0]), 1j
    v = classify(hgamma_space(1, 2), canonical_hgamma_symbol(1, a, mu), CFG)
    assert v.status is Status.UNITARY
    assert v.theorem_path["hgamma"]
    np.testing.assert_allclose(v.witnesses["a"], a, atol=1e-8)
    assert abs(v.witnesses["mu"] - mu) < 1e-8
    np.testing.assert_allclose(v.witnesses["V"], np.eye(2), atol=1e-8)


def test_classify_unitary_constant_off_hgamma(rng):
    u = random_unitary(rng, 2)
    v = classify(dirichlet_type_space(2), unitary_const_symbol(1, u), CFG)
    assert v.status is Status.UNITARY and not v.theorem_path["hgamma"]
    np.testing.assert_allclose(v.witnesses["U"], u, atol=1e-10)


def test_classify_forced_weight_off_hgamma():
    sp = dirichlet_type_space(1)
    v = classify(sp, forced_symbol(sp, MobiusInvolution(np.array([0.5]))), CFG)
    assert v.status is Status.NOT_COISOMETRIC
    assert v.refutation["residual"] > 1e-3
    assert v.refutation["residual"] == pytest.approx(v.residual_max)


def test_classify_dimension_mismatch():
    with pytest.raises(DomainError):
        classify(hgamma_space(1, 2), unitary_const_symbol(1, np.eye(3)), CFG)


def test_classify_inconclusive_band(rng):
    sp = hgamma_space(1, 2)
    w = perturb_delta(canonical_hgamma_symbol(1, np.array([0.2, 0.1j]), 1), 1e-7)
    v = classify(sp, w, CFG)
    assert v.status is Status.INCONCLUSIVE and 1e-9 <= v.residual_max <= 1e-3


def test_classify_all_pairs_flagged():
    sp = dirichlet_type_space(1)
    z = np.full((5, 1), 0.99 + 0j)
    v = classify(sp, unitary_const_symbol(1, np.eye(1)), CFG, pairs=(z, z))
    assert v.status is Status.INCONCLUSIVE and v.n_flagged == 5


def test_recover_at_origin_needs_no_sign_fix():
    # phi_0 = -id, so a symbol with a = 0 has phi = -V and recovery returns V itself
    v = np.array([[0, 1], [1, 0]], dtype=complex)
    par = recover_parameters(hgamma_space(2, 2), canonical_hgamma_symbol(2, np.zeros(2), -1, v))
    np.testing.assert_allclose(par.v, v, atol=1e-15)
    np.testing.assert_allclose(par.a, 0)
    assert par.mu == pytest.approx(-1)


def test_recover_random_parameters():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        a = sample_ball(rng, 1, 3, 0.9)[0]
        mu, v = random_unimodular(rng), random_unitary(rng, 3)
        w = canonical_hgamma_symbol(2, a, mu, v)
        par = recover_parameters(hgamma_space(2, 3), w)
        err = max(np.abs(par.a - a).max(), abs(par.mu - mu), np.abs(par.v - v).max())
        assert err < 1e-8
        # |delta(0)|^2 K(a, a) = 1 for a co-isometry
        assert par.mu_modulus_defect < 1e-12
        z = sample_ball(rng, 20, 3)
        rebuilt = par.symbol()
        np.testing.assert_allclose(rebuilt.delta_eval(z), w.delta_eval(z), rtol=1e-8)
        np.testing.assert_allclose(rebuilt.phi_eval(z), w.phi_eval(z), atol=1e-8)


def test_recover_refuses_other_spaces():
    with pytest.raises(UnsupportedError):
        recover_parameters(dirichlet_type_space(1), unitary_const_symbol(1, np.eye(1)))


def test_rigidity_examples():
    r = rigidity_report(dirichlet_type_space(1), np.array([0.5]), CFG)
    assert r.certificate and r.coisometry_residual_max > 1e-3 and r.ratio_residual_max > 1e-3
    r = rigidity_report(power_space(2, 2), np.array([0.3, 0]), CFG)
    assert r.certificate and "bounded kernel" in r.note
    with pytest.raises(UnsupportedError):
        rigidity_report(hgamma_space(1, 1), np.array([0.5]), CFG)
    with pytest.raises(DomainError):
        rigidity_report(dirichlet_type_space(1), np.array([0.0]), CFG)


def test_maxmod_unitary_constant(rng):
    sp = power_space(2, 2)
    rep = bounded_kernel_maxmod_check(sp, unitary_const_symbol(1j, random_unitary(rng, 2)), cfg=CFG)
    assert rep.consistent_with_constant and rep.bound_violations == 0 and not rep.tension
    assert rep.identity_residual_max < 1e-12
    assert rep.sup_kernel == pytest.approx(math.pi**2 / 6, abs=1e-6)


def test_maxmod_wrong_space_weight_shows_tension():
    sp = power_space(2, 1)
    # the H_1 weight has |delta(0)| < 1 but exceeds 1 along the ray through a
    w = canonical_hgamma_symbol(1, np.array([0.5]), 1)
    rep = bounded_kernel_maxmod_check(sp, w, cfg=CFG, rays=np.array([[1.0 + 0j]]))
    assert rep.delta_at_zero < 1 and rep.tension and not rep.consistent_with_constant


def test_maxmod_needs_bounded_kernel():
    with pytest.raises(UnsupportedError):
        bounded_kernel_maxmod_check(hgamma_space(1, 1), unitary_const_symbol(1, np.eye(1)))


@given(st.integers(0, 2**32 - 1), st.sampled_from(["dirichlet", "exp", "h1"]), st.floats(0.0, 0.1))
def test_classify_is_sound(seed, which, eps):
    rng = np.random.default_rng(seed)
    d = 2
    sp = {"dirichlet": dirichlet_type_space(d), "exp": exponential_space(d), "h1": hgamma_space(1, d)}[which]
    phi = Automorphism(random_unitary(rng, d), sample_ball(rng, 1, d, 0.7)[0])
    w = perturb_delta(automorphism_symbol(sp, phi, random_unimodular(rng)), eps)
    v = classify(sp, w, SamplingConfig(seed=seed, n_pairs=20))
    if v.residual_max > 1e-3:
        assert v.status is Status.NOT_COISOMETRIC
    if v.passes:
        assert v.residual_max < 1e-9


def test_dichotomy_consistency(rng):
    for d in (1, 2):
        phi = Automorphism(random_unitary(rng, d), sample_ball(rng, 1, d, 0.7)[0])
        for sp in (hgamma_space(1.5, d), dirichlet_type_space(d), exponential_space(d)):
            v = classify(sp, forced_symbol(sp, phi), CFG)
            assert v.passes == v.theorem_path["hgamma"]


def test_suite_unknown_name():
    with pytest.raises(DomainError):
        theorem_suite("T9_9")


def test_suite_is_independent_of_workers():
    a = theorem_suite("T1_1", SamplingConfig(seed=3, workers=1)).to_record()
    b = theorem_suite("T1_1", SamplingConfig(seed=3, workers=4)).to_record()
    assert [i["residual_max"] for i in a["instances"]] == [i["residual_max"] for i in b["instances"]]


def test_c42_suite_notes_square_isometries():
    rep = theorem_suite("C4_2", SamplingConfig(seed=2))
    assert rep.ok and any("isometry" in n for n in rep.notes)
    assert max(i["a_matches_inverse_at_0"] for i in rep.instances) < 1e-12


@pytest.mark.parametrize("name", ["T1_1", "T1_2", "P5_3"])
def test_suites_meet_expectations(name):
    rep = theorem_suite(name, SamplingConfig(seed=11))
    assert rep.ok, rep.contradictions[:2] + rep.inconclusive[:2]
    if name == "T1_2":
        assert not [i for i in rep.instances if i["kind"] == "automorphic" and i["outcome"] == "pass"]
