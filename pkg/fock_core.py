#!/usr/bin/env python3
"""
Truncated Fock-Space Algebra
States, ladder operators, special matrix elements and column-stacked superoperators
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.linalg import expm
from scipy.special import eval_genlaguerre, gammaln

logger = logging.getLogger(__name__)

# Vectorized dimension above which superoperators are kept sparse.
SPARSE_VEC_DIM = 2500

SPACE_TAGS = ('single-mode', 'spin⊗mode', 'mode⊗mode', 'vectorized')

Matrix = Union[np.ndarray, sparse.spmatrix]


@dataclass(frozen=True)
class FockSpace:
    """Oscillator space truncated to |0⟩…|cutoff−1⟩."""
    cutoff: int

    def __post_init__(self):
        if int(self.cutoff) != self.cutoff or self.cutoff < 1:
            raise ValueError(f"cutoff must be an integer ≥ 1, got {self.cutoff}")

    @property
    def dim(self) -> int:
        return int(self.cutoff)

    def basis(self, k: int) -> np.ndarray:
        if not 0 <= k < self.cutoff:
            raise ValueError(f"Fock index {k} outside cutoff {self.cutoff}")
        vec = np.zeros(self.cutoff, dtype=complex)
        vec[k] = 1.0
        return vec

    def identity(self) -> np.ndarray:
        return np.eye(self.cutoff, dtype=complex)


@dataclass(frozen=True)
class ComplexOperator:
    """Operator matrix tagged with the space it acts on."""
    matrix: Matrix
    tag: str = 'single-mode'
    hermitian: bool = False

    def __post_init__(self):
        if self.tag not in SPACE_TAGS:
            raise ValueError(f"unknown space tag '{self.tag}'")
        rows, cols = self.matrix.shape
        if self.tag != 'vectorized' and rows != cols:
            raise ValueError(f"{self.tag} operator must be square, got {self.matrix.shape}")
        if self.tag == 'spin⊗mode' and rows % 2:
            raise ValueError("spin⊗mode operator needs an even dimension")
        if self.hermitian:
            dense = to_dense(self.matrix)
            defect = np.max(np.abs(dense - dense.conj().T)) if dense.size else 0.0
            if defect > 1e-12:
                raise ValueError(f"operator flagged Hermitian has defect {defect:.2e}")

    @property
    def dims(self) -> Tuple[int, int]:
        return self.matrix.shape


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, unit-trace, positive semidefinite matrix."""
    matrix: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.matrix)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError("density operator must be a square matrix")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-9:
            raise ValueError("density operator is not Hermitian")
        trace = np.trace(rho).real
        if abs(trace - 1.0) >= 1e-9:
            raise ValueError(f"density operator trace {trace:.12f} differs from 1")
        min_eig = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
        if min_eig <= -1e-9:
            raise ValueError(f"density operator has negative eigenvalue {min_eig:.2e}")

    @classmethod
    def from_state(cls, psi: np.ndarray) -> 'DensityOperator':
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def to_dense(matrix: Matrix) -> np.ndarray:
    if sparse.issparse(matrix):
        return matrix.toarray()
    return np.asarray(matrix)


def as_matrix(op) -> Matrix:
    """Unwrap ComplexOperator / DensityOperator, pass raw matrices through."""
    if isinstance(op, (ComplexOperator, DensityOperator)):
        return op.matrix
    return op


def make_ladder(space: FockSpace) -> Tuple[np.ndarray, np.ndarray]:
    """Return (â, â†) on the truncated space."""
    lower = np.diag(np.sqrt(np.arange(1, space.cutoff, dtype=float)), k=1).astype(complex)
    return lower, lower.conj().T.copy()


def number_operator(space: FockSpace) -> np.ndarray:
    return np.diag(np.arange(space.cutoff, dtype=float)).astype(complex)


def quadratures(space: FockSpace) -> Tuple[np.ndarray, np.ndarray]:
    """q = (a+a†)/√2, p = i(a†−a)/√2."""
    a, ad = make_ladder(space)
    return (a + ad) / np.sqrt(2.0), 1j * (ad - a) / np.sqrt(2.0)


def rotation_operator(space: FockSpace, d: int) -> np.ndarray:
    """P = exp(i2πn/d)."""
    return np.diag(np.exp(2j * np.pi * np.arange(space.cutoff) / d))


def spin_operators() -> dict:
    """Two-level operators in the basis (|g⟩, |e⟩)."""
    sm = np.array([[0, 1], [0, 0]], dtype=complex)
    return {
        'sigma_minus': sm,
        'sigma_plus': sm.T.copy(),
        'sigma_z': np.diag([-1.0, 1.0]).astype(complex),
        'proj_g': np.diag([1.0, 0.0]).astype(complex),
        'proj_e': np.diag([0.0, 1.0]).astype(complex),
    }


def tensor(a: Matrix, b: Matrix) -> Matrix:
    """Kronecker product, left factor = spin or first mode."""
    a, b = as_matrix(a), as_matrix(b)
    if sparse.issparse(a) or sparse.issparse(b):
        return sparse.kron(a, b, format='csr')
    return np.kron(a, b)


def partial_trace_spin(rho: np.ndarray, mode_dim: int) -> np.ndarray:
    """Trace out the left two-level factor of a spin⊗mode density matrix."""
    blocks = rho.reshape(2, mode_dim, 2, mode_dim)
    return np.einsum('iaib->ab', blocks)


def coherent_state(space: FockSpace, alpha: complex) -> np.ndarray:
    """Untruncated coherent amplitudes restricted to the space (not renormalized)."""
    k = np.arange(space.cutoff)
    alpha = complex(alpha)
    if alpha == 0:
        return space.basis(0)
    log_mag = -0.5 * abs(alpha) ** 2 + k * np.log(abs(alpha)) - 0.5 * gammaln(k + 1)
    return np.exp(log_mag) * np.exp(1j * k * np.angle(alpha))


def displacement_operator(space: FockSpace, alpha: complex) -> np.ndarray:
    """exp(α a† − α* a) by dense matrix exponential at the working cutoff."""
    a, ad = make_ladder(space)
    return expm(alpha * ad - np.conj(alpha) * a)


def displacement_element(k, r: int, lam: float):
    """√(k!/(k+r)!) e^{−λ²/2} λ^r L_k^{(r)}(λ²), evaluated in the log domain.

    Accepts scalar or array k. Negative r is rejected; callers use the
    symmetry ⟨k|D|k+r⟩ = ⟨k+r|D|k⟩ of the real-argument kernel.
    """
    if r < 0:
        raise ValueError(f"sideband order must be non-negative, got {r}")
    k_arr = np.asarray(k, dtype=float)
    if np.any(k_arr < 0):
        raise ValueError("Fock index must be non-negative")
    if lam == 0:
        out = np.full(k_arr.shape, 1.0 if r == 0 else 0.0)
        return float(out) if out.ndim == 0 else out
    lam2 = lam * lam
    log_pref = 0.5 * (gammaln(k_arr + 1) - gammaln(k_arr + r + 1)) - 0.5 * lam2 + r * np.log(abs(lam))
    sign = np.sign(lam) ** r
    degree = k_arr.astype(int) if np.all(k_arr == np.floor(k_arr)) else k_arr
    out = sign * np.exp(log_pref) * eval_genlaguerre(degree, r, lam2)
    return float(out) if np.ndim(out) == 0 else out


def _squeeze_diagonal_start(m: int, t: float) -> float:
    """X_m^m = (−1)^m √((2m)!)/(2^m m!) t^m."""
    if m == 0:
        return 1.0
    if t == 0:
        return 0.0
    log_val = 0.5 * gammaln(2 * m + 1) - m * np.log(2.0) - gammaln(m + 1) + m * np.log(t)
    return (-1) ** m * np.exp(log_val)


def _squeeze_column(m: int, n_max: int, x: float, t: float) -> np.ndarray:
    """X_n^m for n = m … n_max by the upward three-term recurrence."""
    values = np.zeros(max(n_max - m + 1, 0))
    if values.size == 0:
        return values
    values[0] = _squeeze_diagonal_start(m, t)
    if values.size > 1:
        values[1] = np.sqrt(2 * m + 1) * x * values[0]
    for idx in range(2, values.size):
        n = m + idx
        values[idx] = ((2 * n - 1) * x * values[idx - 1]
                       - np.sqrt((n - 1) ** 2 - m ** 2) * values[idx - 2]) / np.sqrt(n * n - m * m)
    return values


def squeeze_element(k: int, kp: int, zeta: complex) -> complex:
    """⟨k|S(ζ)|kp⟩ with S(ζ) = exp((ζ* a² − ζ a†²)/2); exactly 0 for opposite parity."""
    if k < 0 or kp < 0:
        raise ValueError("Fock indices must be non-negative")
    if (k + kp) % 2:
        return 0j
    zeta = complex(zeta)
    if zeta == 0:
        return 1.0 + 0j if k == kp else 0j
    r, phi = abs(zeta), np.angle(zeta)
    x, t = 1.0 / np.cosh(r), np.tanh(r)
    n, m = (k + kp) // 2, (k - kp) // 2
    column = _squeeze_column(abs(m), n, x, t)
    value = column[-1] * (-1) ** (abs(m) if m < 0 else 0)
    return np.sqrt(x) * value * np.exp(1j * m * phi)


def squeeze_matrix(space: FockSpace, zeta: complex) -> np.ndarray:
    """Full truncated S(ζ) assembled column-of-m by column-of-m."""
    N = space.cutoff
    zeta = complex(zeta)
    S = np.zeros((N, N), dtype=complex)
    if zeta == 0:
        return space.identity()
    r, phi = abs(zeta), np.angle(zeta)
    x, t = 1.0 / np.cosh(r), np.tanh(r)
    pref = np.sqrt(x)
    for m in range(0, (N - 1) // 2 + 1):
        n_max = N - 1 - m
        column = _squeeze_column(m, n_max, x, t)
        for idx, val in enumerate(column):
            n = m + idx
            S[n + m, n - m] = pref * val * np.exp(1j * m * phi)
            if m:
                S[n - m, n + m] = pref * (-1) ** m * val * np.exp(-1j * m * phi)
    return S


def position_transform(space: FockSpace, grid: Sequence[float]) -> np.ndarray:
    """Hermite functions ψ_k(q) on the grid, shape (len(grid), cutoff)."""
    q = np.asarray(grid, dtype=float)
    if q.ndim != 1 or np.any(np.diff(q) <= 0):
        raise ValueError("position grid must be strictly increasing")
    T = np.zeros((q.size, space.cutoff))
    T[:, 0] = np.pi ** -0.25 * np.exp(-0.5 * q * q)
    if space.cutoff > 1:
        T[:, 1] = np.sqrt(2.0) * q * T[:, 0]
    for k in range(1, space.cutoff - 1):
        T[:, k + 1] = np.sqrt(2.0 / (k + 1)) * q * T[:, k] - np.sqrt(k / (k + 1)) * T[:, k - 1]
    return T


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(rho).reshape(-1, order='F')


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape((dim, dim), order='F')


def _finish(superop: sparse.spmatrix) -> Matrix:
    if superop.shape[0] > SPARSE_VEC_DIM:
        return superop.tocsr()
    return superop.toarray()


def superop_left(a: Matrix) -> sparse.spmatrix:
    """vec(A X) = (I ⊗ A) vec(X)."""
    a = sparse.csr_matrix(as_matrix(a))
    return sparse.kron(sparse.identity(a.shape[0], format='csr'), a, format='csr')


def superop_right(b: Matrix) -> sparse.spmatrix:
    """vec(X B) = (Bᵀ ⊗ I) vec(X)."""
    b = sparse.csr_matrix(as_matrix(b))
    return sparse.kron(b.T, sparse.identity(b.shape[0], format='csr'), format='csr')


def sandwich(a: Matrix, b: Matrix) -> sparse.spmatrix:
    """vec(A X B) = (Bᵀ ⊗ A) vec(X)."""
    return sparse.kron(sparse.csr_matrix(as_matrix(b)).T, sparse.csr_matrix(as_matrix(a)), format='csr')


def vectorize_dissipator(L: Matrix, sparse_output: bool = False) -> Matrix:
    """Superoperator of D[L]ρ = LρL† − ½{L†L, ρ} in column-stacking form."""
    L = sparse.csr_matrix(as_matrix(L))
    if L.shape[0] != L.shape[1]:
        raise ValueError(f"jump operator must be square, got {L.shape}")
    LdL = (L.conj().T @ L).tocsr()
    superop = (sparse.kron(L.conj(), L, format='csr')
               - 0.5 * superop_left(LdL) - 0.5 * superop_right(LdL))
    return superop.tocsr() if sparse_output else _finish(superop)


def vectorize_hamiltonian(H: Matrix, sparse_output: bool = False) -> Matrix:
    """Superoperator of −i[H, ρ]."""
    H = sparse.csr_matrix(as_matrix(H))
    superop = -1j * (superop_left(H) - superop_right(H))
    return superop.tocsr() if sparse_output else _finish(superop)


def apply_dissipator(L: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Direct operator-product D[L]ρ (reference for the vectorized form)."""
    LdL = L.conj().T @ L
    return L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)
