#!/usr/bin/env python3
"""
Tests for the truncated Fock-space algebra
"""

import numpy as np
from scipy.linalg import expm

from fock_core import (DensityOperator, FockSpace, apply_dissipator, coherent_state, displacement_element,
                       displacement_operator, make_ladder, partial_trace_spin, position_transform,
                       rotation_operator, spin_operators, squeeze_element, squeeze_matrix, tensor, unvec, vec,
                       vectorize_dissipator, vectorize_hamiltonian)


def _random_density(dim: int, seed: int = 7) -> np.ndarray:
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


def test_ladder_commutator():
    """[a, a†] is the identity below the truncation edge."""
    print("🧪 Testing ladder operators...")
    space = FockSpace(12)
    a, ad = make_ladder(space)
    comm = a @ ad - ad @ a
    assert np.allclose(comm[:-1, :-1], np.eye(11))
    assert np.isclose(comm[-1, -1], -11)


def test_space_validation():
    print("🧪 Testing space and density validation...")
    for bad in (0, -3, 2.5):
        try:
            FockSpace(bad)
        except ValueError:
            continue
        raise AssertionError(f"cutoff {bad} accepted")
    try:
        DensityOperator(np.diag([0.5, 0.4]))
        raise AssertionError("trace 0.9 accepted")
    except ValueError:
        pass
    rho = DensityOperator.from_state(np.array([1.0, 1.0j, 0.0]))
    assert rho.dim == 3
    assert np.isclose(np.trace(rho.matrix).real, 1.0)


def test_coherent_state_norm():
    space = FockSpace(40)
    psi = coherent_state(space, 2.0 * np.exp(0.7j))
    assert abs(np.linalg.norm(psi) - 1.0) < 1e-12
    a, _ = make_ladder(space)
    assert np.allclose(a[:-1] @ psi, (2.0 * np.exp(0.7j) * psi)[:-1], atol=1e-10)


def test_displacement_element_matches_matrix():
    """⟨k+r|D(λ)|k⟩ from the log-domain Laguerre form vs expm."""
    print("🧪 Testing displacement matrix elements...")
    lam = 0.3
    D = displacement_operator(FockSpace(60), lam)
    for k in range(10):
        for r in range(4):
            assert abs(displacement_element(k, r, lam) - D[k + r, k].real) < 1e-10
            assert abs(D[k + r, k].imag) < 1e-12
    values = displacement_element(np.arange(5), 2, lam)
    assert values.shape == (5,)
    assert displacement_element(3, 0, 0.0) == 1.0


def test_squeeze_elements():
    """Recurrence-built S(ζ) matches the truncated exponential and the parity rule."""
    print("🧪 Testing squeezing matrix elements...")
    zeta = 0.4 * np.exp(0.3j)
    big = FockSpace(90)
    a, ad = make_ladder(big)
    S_ref = expm(0.5 * (np.conj(zeta) * a @ a - zeta * ad @ ad))
    S = squeeze_matrix(FockSpace(12), zeta)
    assert np.allclose(S[:10, :10], S_ref[:10, :10], atol=1e-8)
    for k in range(8):
        for kp in range(8):
            assert abs(squeeze_element(k, kp, zeta) - S[k, kp]) < 1e-12
            if (k + kp) % 2:
                assert squeeze_element(k, kp, zeta) == 0
    assert np.allclose(squeeze_matrix(FockSpace(5), 0.0), np.eye(5))


def test_vectorized_dissipator():
    """Column-stacked D[L] and −i[H,·] agree with direct operator products."""
    print("🧪 Testing superoperator vectorization...")
    space = FockSpace(6)
    a, ad = make_ladder(space)
    rho = _random_density(6)
    L = a @ a - 0.5 * np.eye(6)
    out = unvec(vectorize_dissipator(L) @ vec(rho), 6)
    assert np.allclose(out, apply_dissipator(L, rho), atol=1e-12)
    H = ad @ a + 0.3 * (a + ad)
    out = unvec(vectorize_hamiltonian(H) @ vec(rho), 6)
    assert np.allclose(out, -1j * (H @ rho - rho @ H), atol=1e-12)
    assert abs(np.trace(apply_dissipator(L, rho))) < 1e-12


def test_spin_mode_helpers():
    space = FockSpace(5)
    rho = _random_density(5, seed=3)
    joint = tensor(spin_operators()['proj_g'], rho)
    assert np.allclose(partial_trace_spin(joint, 5), rho)
    P = rotation_operator(FockSpace(9), 3)
    assert np.allclose(np.linalg.matrix_power(P, 3), np.eye(9))
    assert space.basis(4)[4] == 1


def test_position_transform_orthonormal():
    grid = np.linspace(-10, 10, 2001)
    T = position_transform(FockSpace(10), grid)
    overlap = T.T @ T * (grid[1] - grid[0])
    assert np.allclose(overlap, np.eye(10), atol=1e-8)


def main():
    """Run all tests."""
    print("🚀 Running Fock-space algebra tests")
    print("=" * 60)

    tests = [
        test_ladder_commutator,
        test_space_validation,
        test_coherent_state_norm,
        test_displacement_element_matches_matrix,
        test_squeeze_elements,
        test_vectorized_dissipator,
        test_spin_mode_helpers,
        test_position_transform_orthonormal,
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
