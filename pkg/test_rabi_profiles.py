#!/usr/bin/env python3
"""
Tests for Rabi-frequency profiles and crossing points
"""

import numpy as np

from rabi_profiles import (Constant, Ladder, LinearCrossing, NLREScheme, Tabulated, check_convergence, eval_profile,
                           find_crossing, linear_profile_from_angles, linear_scheme, nonlinear_coherent_parameter,
                           profile_from_dict, profile_to_dict, stabilizing_crossing, standard_cat_scheme)


def test_basic_profiles():
    print("🧪 Testing profile evaluation...")
    assert Constant(2.5).evaluate(7) == 2.5
    assert np.isclose(Ladder(2).evaluate(3), np.sqrt(20.0))
    assert np.allclose(Ladder(3, scale=2.0).evaluate(np.array([0.0, 1.0])), [2 * np.sqrt(6.0), 2 * np.sqrt(24.0)])
    falling = LinearCrossing(k_star=10, h_star=5, slope=1.0, direction='falling')
    assert falling.evaluate(10) == 5.0
    assert falling.evaluate(40) == 0.0
    assert falling.derivative(40) == 0.0
    assert falling.derivative(12) == -1.0
    assert np.isclose(eval_profile(Ladder(2), 3), np.sqrt(20.0))
    try:
        eval_profile(Constant(1.0), -1)
        raise AssertionError("negative Fock index accepted")
    except ValueError:
        pass
    table = Tabulated((0.0, 2.0, -4.0))
    assert np.isclose(table.evaluate(1.5), 3.0)
    try:
        table.evaluate(5)
        raise AssertionError("evaluation past the table accepted")
    except ValueError:
        pass


def test_scheme_validation():
    for r, l, kappa in ((0, 0, 1.0), (-1, 2, 1.0), (0, 2, 0.0)):
        try:
            NLREScheme(r=r, l=l, f_profile=Constant(1.0), g_profile=Ladder(2), kappa_eff=kappa)
        except ValueError:
            continue
        raise AssertionError(f"scheme ({r}, {l}, κ={kappa}) accepted")
    try:
        LinearCrossing(k_star=1, h_star=-1, slope=1, direction='rising')
        raise AssertionError("negative height accepted")
    except ValueError:
        pass


def test_standard_cat_crossing():
    """√((k+1)(k+2)) = α² for α = 2 has its root at (−3+√65)/2."""
    print("🧪 Testing crossing search...")
    scheme = standard_cat_scheme(2.0, 2)
    crossing = stabilizing_crossing(scheme, (0, 60))
    assert crossing is not None and crossing.gain_switch
    assert abs(crossing.k_star - (-3 + np.sqrt(65)) / 2) < 1e-6
    assert np.isclose(crossing.h_star, 4.0)
    assert crossing.slope_f == 0.0 and crossing.slope_g > 0


def test_linear_crossing_geometry():
    scheme = linear_scheme(0, 2, k_star=10.0, h_star=20.0, slope_f=1.0, slope_g=1.0)
    crossings = find_crossing(scheme, (0, 100))
    assert len(crossings) == 1
    c = crossings[0]
    assert abs(c.k_star - 10.0) < 1e-6 and np.isclose(c.h_star, 20.0)
    assert c.slope_f == -1.0 and c.slope_g == 1.0

    shifted = linear_scheme(1, 1, k_star=8.0, h_star=3.0, slope_f=0.5, slope_g=0.25)
    c = stabilizing_crossing(shifted, (0, 40))
    assert abs(c.k_star - 8.0) < 1e-6
    assert np.isclose(shifted.g(9.0), 3.0)


def test_angle_convention():
    """Slope is the cotangent of the angle from the vertical."""
    prof = linear_profile_from_angles(5.0, 2.0, np.pi / 4, 'rising')
    assert np.isclose(prof.slope, 1.0)
    steep = linear_profile_from_angles(5.0, 2.0, 0.1, 'falling', shift=2)
    assert steep.k_star == 7.0 and steep.slope > 9.9
    try:
        linear_profile_from_angles(5.0, 2.0, np.pi / 2, 'rising')
        raise AssertionError("flat angle accepted")
    except ValueError:
        pass


def test_convergence_classification():
    print("🧪 Testing convergence test...")
    assert check_convergence(standard_cat_scheme(2.0, 2), 60) == 'converges'
    assert check_convergence(linear_scheme(0, 2, 10.0, 20.0, slope_f=1.0, slope_g=1.0), 60) == 'converges'
    runaway = NLREScheme(r=0, l=2, f_profile=Ladder(2), g_profile=Constant(4.0))
    assert check_convergence(runaway, 50) == 'diverges'


def test_nonlinear_coherent_parameter():
    scheme = standard_cat_scheme(1.5, 3)
    beta = nonlinear_coherent_parameter(scheme, np.arange(20))
    assert np.allclose(beta, 1.5 ** 3)


def test_profile_serialization():
    scheme = linear_scheme(1, 3, 12.0, 4.0, theta_f=0.6, theta_g=0.9, kappa_eff=2.0)
    assert NLREScheme.from_dict(scheme.to_dict()) == scheme
    data = profile_to_dict(Tabulated((1.0, 2.0)))
    assert data['values'] == [1.0, 2.0]
    assert profile_from_dict(data) == Tabulated((1.0, 2.0))
    try:
        profile_from_dict({'kind': 'sawtooth'})
        raise AssertionError("unknown kind accepted")
    except ValueError:
        pass


def main():
    """Run all tests."""
    print("🚀 Running Rabi-profile tests")
    print("=" * 60)

    tests = [
        test_basic_profiles,
        test_scheme_validation,
        test_standard_cat_crossing,
        test_linear_crossing_geometry,
        test_angle_convention,
        test_convergence_classification,
        test_nonlinear_coherent_parameter,
        test_profile_serialization,
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
