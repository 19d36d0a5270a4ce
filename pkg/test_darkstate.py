#!/usr/bin/env python3
"""
Tests for recurrence-built dark states and their boson statistics
"""

import numpy as np
from scipy.special import iv

from darkstate import (EXPONENTIALLY_GOOD, TRUE_DARK, BosonDistribution, auto_cutoff, classify_states,
                       cmb_class_distribution, cmb_moments_direct, cmb_params_from_scheme, cmb_pdf, cmb_x_moments,
                       cmp_pdf, cmp_reciprocal_pdf,
                       confinement_rate_from_moments, dark_state_rows, manifold_distribution,
                       poisson_distribution, poisson_parity_projection, predicted_confinement_rate, relative_entropy, shifted_fock_basis,
                       solve_recurrence, standard_cat_entropy_sweep, CMBParams)
from errors import CertificationError, TruncationError
from fock_core import FockSpace
from rabi_profiles import linear_scheme, standard_cat_scheme


def test_standard_cat_recovery():
    """K = a^d − α^d gives parity-projected Poisson(α²) in every residue class."""
    print("🧪 Testing standard-cat recovery...")
    space = FockSpace(120)
    for d in (2, 3, 4, 6):
        for alpha in (2.0, 3.5, 5.0):
            states = solve_recurrence(standard_cat_scheme(alpha, d), space)
            assert len(states) == d
            for state in states:
                assert state.truth == TRUE_DARK
                reference = BosonDistribution(poisson_parity_projection(alpha ** 2, 120, d, state.mu))
                assert state.distribution.total_variation(reference) < 1e-9, (d, alpha, state.mu)


def test_rotation_phase():
    """Class μ picks up e^{i2πμ/d} under the discrete rotation."""
    d = 3
    space = FockSpace(60)
    P = np.exp(2j * np.pi * np.arange(60) / d)
    for state in solve_recurrence(standard_cat_scheme(2.0, d), space):
        rotated = P * state.xi
        assert np.allclose(rotated, np.exp(2j * np.pi * state.mu / d) * state.xi, atol=1e-12)


def test_true_and_exponentially_good_split():
    """(r, l) = (3, 2): two true dark states, three exponentially good ones."""
    print("🧪 Testing dark-state classification...")
    scheme = linear_scheme(3, 2, k_star=14.0, h_star=8.0, slope_f=1.0, slope_g=1.0)
    states = solve_recurrence(scheme, FockSpace(36))
    assert [s.mu for s in states] == [0, 1, 2, 3, 4]
    assert sum(s.truth == TRUE_DARK for s in states) == 2
    assert sum(s.truth == EXPONENTIALLY_GOOD for s in states) == 3
    for state in states:
        assert abs(np.linalg.norm(state.xi) - 1.0) < 1e-12
        assert state.norm_defect == 0.0
    classified = classify_states(scheme, states)
    assert [s.truth for s in classified] == [s.truth for s in states]
    assert [s.leakage_proxy for s in classified] == [s.leakage_proxy for s in states]


def test_truncation_is_certified():
    scheme = standard_cat_scheme(3.5, 2)
    try:
        solve_recurrence(scheme, FockSpace(33))
        raise AssertionError("heavy tail not reported")
    except TruncationError as exc:
        assert exc.details['norm_defect'] > 1e-8
    states = solve_recurrence(scheme, FockSpace(auto_cutoff(scheme)))
    assert max(s.norm_defect for s in states) < 1e-8
    try:
        solve_recurrence(scheme, FockSpace(12))
        raise AssertionError("cutoff below the crossing accepted")
    except CertificationError:
        pass


def test_auto_cutoff_leaves_room_for_the_ladder():
    """k* + w·max(σ, 1) + d + 10: d levels above the support for a^d, σ floored at one."""
    scheme = linear_scheme(0, 2, 20.0, 10.0, slope_f=1.0, slope_g=1.0)
    assert auto_cutoff(scheme, width_factor=8.0) == 58
    assert auto_cutoff(scheme) == 70
    narrow = linear_scheme(0, 2, 20.0, 1.0, slope_f=50.0, slope_g=50.0)
    assert auto_cutoff(narrow, width_factor=8.0) == 40


def test_cmb_matches_recurrence():
    """Linear crossings produce the Conway–Maxwell–Binomial law per residue class."""
    print("🧪 Testing CMB equivalence...")
    scheme = linear_scheme(0, 2, k_star=10.0, h_star=20.0, slope_f=1.0, slope_g=2.0)
    params = cmb_params_from_scheme(scheme)
    assert np.isclose(params.m, 14.0) and np.isclose(params.theta, 0.25) and abs(params.a) < 1e-6
    for state in solve_recurrence(scheme, FockSpace(40)):
        reference = cmb_class_distribution(params, state.mu, cutoff=40)
        tv = 0.5 * np.abs(reference - np.abs(state.xi) ** 2).sum()
        assert tv < 1e-9, (state.mu, tv)
    for k in (0, 5, 14):
        assert cmb_pdf(params, k) == cmb_class_distribution(params, k % 2)[k]
    try:
        cmb_pdf(params, -1)
        raise AssertionError("negative Fock index accepted")
    except ValueError:
        pass


def test_cmp_pdf():
    """P(0) = 1/I₀(2√λ) for the Conway–Maxwell–Poisson law with ν = 2."""
    for lam in (0.5, 4.0, 30.0):
        assert abs(cmp_pdf(lam, 0) - 1.0 / iv(0, 2 * np.sqrt(lam))) < 1e-12
    assert abs(cmp_pdf(4.0, 3) / cmp_pdf(4.0, 2) - 4.0 / 9.0) < 1e-12
    assert cmp_pdf(4.0, -1) == 0.0


def test_cmb_moments():
    """₂F₁ moments agree with direct summation for integer and non-integer m."""
    for params in (CMBParams(m=14.0, theta=0.25, d=2), CMBParams(m=13.5, theta=0.25, d=2),
                   CMBParams(m=20.0, theta=2.0, d=3)):
        mean_h, var_h = cmb_x_moments(params)
        mean_d, var_d = cmb_moments_direct(params)
        assert abs(mean_h - mean_d) < 1e-8 * abs(mean_d)
        assert abs(var_h - var_d) < 1e-8 * abs(var_d)
    try:
        cmb_x_moments(CMBParams(m=13.5, theta=2.0, d=2))
        raise AssertionError("divergent series accepted")
    except ValueError:
        pass


def test_distribution_statistics():
    poisson = BosonDistribution(poisson_distribution(9.0, 80) / poisson_distribution(9.0, 80).sum())
    assert abs(poisson.mean - 9.0) < 1e-9
    assert abs(poisson.mandel_q) < 1e-8
    assert abs(poisson.skewness - 1.0 / 3.0) < 1e-8
    try:
        BosonDistribution(np.array([0.5, 0.4]))
        raise AssertionError("unnormalized distribution accepted")
    except ValueError:
        pass
    states = solve_recurrence(standard_cat_scheme(2.0, 2), FockSpace(40))
    mixture = manifold_distribution(states)
    average = 0.5 * (np.abs(states[0].xi) ** 2 + np.abs(states[1].xi) ** 2)
    assert np.allclose(mixture.probabilities, average, atol=1e-14)
    reference = poisson_distribution(4.0, 40)
    assert mixture.total_variation(BosonDistribution(reference / reference.sum())) < 1e-3
    assert len(dark_state_rows(states[0])) == 40


def test_relative_entropy():
    print("🧪 Testing relative entropy...")
    p = poisson_distribution(4.0, 40)
    p = p / p.sum()
    assert relative_entropy(p, p) == 0.0
    q = np.zeros(40)
    q[:10] = 0.1
    try:
        relative_entropy(p, q)
        raise AssertionError("support violation not reported")
    except ValueError:
        pass
    rho = np.diag([0.7, 0.3]).astype(complex)
    assert abs(relative_entropy(rho, rho)) < 1e-10
    sigma = np.diag([0.5, 0.5]).astype(complex)
    expected = 0.7 * np.log(1.4) + 0.3 * np.log(0.6)
    assert abs(relative_entropy(rho, sigma) - expected) < 1e-10


def test_standard_cat_entropy_trend():
    values = standard_cat_entropy_sweep(2, [2.0, 3.5, 5.0])
    assert all(v < 0.1 for v in values)
    assert values[0] > values[1] > values[2]


def test_reciprocal_cmp_needs_support():
    try:
        cmp_reciprocal_pdf(4.0, 3)
        raise AssertionError("unbounded reciprocal CMP accepted")
    except ValueError:
        pass
    total = sum(cmp_reciprocal_pdf(4.0, y, (0, 6)) for y in range(7))
    assert abs(total - 1.0) < 1e-12


def test_shifted_fock_basis():
    """With R ≡ 1 the k = 0 states are the even and odd cats."""
    space = FockSpace(40)
    basis = shifted_fock_basis(None, 2.0, 3, space)
    even, odd = basis.states[(0, '+')], basis.states[(0, '-')]
    assert np.allclose(even[1::2], 0.0, atol=1e-12)
    assert np.allclose(odd[0::2], 0.0, atol=1e-12)
    assert abs(np.linalg.norm(even) - 1.0) < 1e-12


def test_confinement_rate_formula():
    plain = confinement_rate_from_moments(1.0, 3.0, 4.0)
    assert np.isclose(plain, 9.0)
    assert np.isclose(confinement_rate_from_moments(1.0, 3.0, 4.0, skew=0.19), 9.0 * 0.9)
    scheme = linear_scheme(0, 2, k_star=10.0, h_star=20.0, slope_f=1.0, slope_g=2.0)
    space = FockSpace(60)
    dist = solve_recurrence(scheme, space)[0].distribution
    f_mean = float(scheme.f(dist.mean))
    plain = confinement_rate_from_moments(1.0, f_mean, dist.variance)
    assert np.isclose(predicted_confinement_rate(scheme, space, skew_correction=False), plain)
    assert np.isclose(predicted_confinement_rate(scheme, space),
                      confinement_rate_from_moments(1.0, f_mean, dist.variance, dist.skewness))
    symmetric = linear_scheme(0, 2, k_star=10.0, h_star=20.0, slope_f=2.0, slope_g=1.0)
    sym_dist = solve_recurrence(symmetric, space)[0].distribution
    assert np.isclose(predicted_confinement_rate(symmetric, space),
                      confinement_rate_from_moments(1.0, float(symmetric.f(sym_dist.mean)), sym_dist.variance))
    assert np.isclose(confinement_rate_from_moments(1.0, 3.0, 4.0, skew=1.5), 9.0)


def main():
    """Run all tests."""
    print("🚀 Running dark-state tests")
    print("=" * 60)

    tests = [
        test_standard_cat_recovery,
        test_rotation_phase,
        test_true_and_exponentially_good_split,
        test_truncation_is_certified,
        test_auto_cutoff_leaves_room_for_the_ladder,
        test_cmb_matches_recurrence,
        test_cmp_pdf,
        test_cmb_moments,
        test_distribution_statistics,
        test_relative_entropy,
        test_standard_cat_entropy_trend,
        test_reciprocal_cmp_needs_support,
        test_shifted_fock_basis,
        test_confinement_rate_formula,
    ]

    passed = 0
    for test in tests:
        try:
            test()
            passed += 1
            print(f"✅ {test.__name__}")
        except Exception as e:
            print(f"❌ {test.__name__}: {e}")

    print("\n" + "=" * 60)
    print(f"📊 Test Results: {passed}/{len(tests)} tests passed")


if __name__ == "__main__":
    main()
