#!/usr/bin/env python3
"""
Jump Operators and Liouvillians
K̂ = â†ʳ f(n̂) − g(n̂) âˡ, Lindblad superoperators and their slowest modes
"""

import json
import logging
from dataclasses import dataclass, field
from math import isqrt
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigs

from errors import EigensolverError
from fock_core import (SPARSE_VEC_DIM, ComplexOperator, FockSpace, Matrix, as_matrix, to_dense,
                       vectorize_dissipator, vectorize_hamiltonian)
from rabi_profiles import NLREScheme

logger = logging.getLogger(__name__)

DENSE_EIG_LIMIT = 4096
MAX_SPECTRUM_COUNT = 30


@dataclass
class LindbladModel:
    """dρ/dt = −i[H, ρ] + Σ rate·D[L]ρ + extra superoperators."""
    dim: int
    hamiltonian: Optional[Matrix] = None
    jumps: List[Tuple[Matrix, float]] = field(default_factory=list)
    extra_superops: List[Matrix] = field(default_factory=list)
    tag: str = 'single-mode'

    def __post_init__(self):
        if self.hamiltonian is not None:
            self._check(as_matrix(self.hamiltonian), 'hamiltonian')
        for op, rate in self.jumps:
            if rate < 0:
                raise ValueError(f"jump rate must be non-negative, got {rate}")
            self._check(as_matrix(op), 'jump')
        for sop in self.extra_superops:
            if as_matrix(sop).shape != (self.dim ** 2, self.dim ** 2):
                raise ValueError(f"extra superoperator has shape {as_matrix(sop).shape}, "
                                 f"expected {(self.dim ** 2, self.dim ** 2)}")

    def _check(self, matrix, label: str):
        if matrix.shape != (self.dim, self.dim):
            raise ValueError(f"{label} has shape {matrix.shape}, model dimension is {self.dim}")

    def with_jump(self, op: Matrix, rate: float) -> 'LindbladModel':
        return LindbladModel(self.dim, self.hamiltonian, self.jumps + [(op, rate)],
                             list(self.extra_superops), self.tag)


def build_K(scheme: NLREScheme, space: FockSpace) -> ComplexOperator:
    """Banded K̂: f̃(k)e^{iφ_f} at (k+r, k) and −g̃(k)e^{iφ_g} at (k, k+l)."""
    N = space.cutoff
    K = np.zeros((N, N), dtype=complex)
    ks = np.arange(N)
    up = ks[ks + scheme.r < N]
    if up.size:
        K[up + scheme.r, up] += np.asarray(scheme.f(up), dtype=float) * np.exp(1j * scheme.phase_f)
    down = ks[ks + scheme.l < N]
    if down.size:
        K[down, down + scheme.l] -= np.asarray(scheme.g(down), dtype=float) * np.exp(1j * scheme.phase_g)
    return ComplexOperator(K, tag='single-mode')


def hamiltonian_superop(H: Matrix, sparse_output: bool = False) -> Matrix:
    return vectorize_hamiltonian(as_matrix(H), sparse_output=sparse_output)


def lindblad_model_from_scheme(scheme: NLREScheme, space: FockSpace,
                               noise: Sequence[Tuple[Matrix, float]] = ()) -> LindbladModel:
    """Single-mode model with the jump √κ_eff K̂ plus optional noise jumps."""
    K = build_K(scheme, space)
    return LindbladModel(dim=space.cutoff, jumps=[(K.matrix, scheme.kappa_eff)] + list(noise))


def build_liouvillian(model: LindbladModel, sparse_output: Optional[bool] = None) -> ComplexOperator:
    """Column-stacked generator of the model."""
    dim2 = model.dim ** 2
    if sparse_output is None:
        sparse_output = dim2 > SPARSE_VEC_DIM
    total = sparse.csr_matrix((dim2, dim2), dtype=complex)
    if model.hamiltonian is not None:
        total = total + hamiltonian_superop(model.hamiltonian, sparse_output=True)
    for op, rate in model.jumps:
        if rate:
            total = total + rate * vectorize_dissipator(as_matrix(op), sparse_output=True)
    for sop in model.extra_superops:
        total = total + sparse.csr_matrix(as_matrix(sop))
    matrix = total.tocsr() if sparse_output else total.toarray()
    return ComplexOperator(matrix, tag='vectorized')


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    n_exact_zero: int
    n_near_zero: int
    leakage_rates: np.ndarray
    zero_threshold: float
    near_threshold: float
    residuals: Optional[np.ndarray] = None

    @property
    def dark_state_count(self) -> Optional[int]:
        """l when the exact-zero modes form the l² coherences of an l-state manifold."""
        root = isqrt(self.n_exact_zero)
        return root if root * root == self.n_exact_zero else None

    def clusters(self, tol: float = 1e-6) -> List[Tuple[complex, int]]:
        """Eigenvalue clusters (centre, multiplicity) in sorted order."""
        groups: List[List[complex]] = []
        for value in self.eigenvalues:
            if groups and abs(value - np.mean(groups[-1])) <= tol * max(1.0, abs(value)):
                groups[-1].append(value)
            else:
                groups.append([value])
        return [(complex(np.mean(g)), len(g)) for g in groups]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'eigenvalues': [[float(v.real), float(v.imag)] for v in self.eigenvalues],
            'n_exact_zero': self.n_exact_zero,
            'n_near_zero': self.n_near_zero,
            'dark_state_count': self.dark_state_count,
            'leakage_rates': [float(r) for r in self.leakage_rates],
            'zero_threshold': self.zero_threshold,
            'near_threshold': self.near_threshold,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _sorted(values: np.ndarray) -> np.ndarray:
    order = np.lexsort((values.imag, np.abs(values.real)))
    return values[order]


def spectrum_near_zero(L: Matrix, count: int = 10, kappa_eff: float = 1.0,
                       zero_tol: float = 1e-9, near_tol: float = 1e-2,
                       dense_limit: int = DENSE_EIG_LIMIT) -> SpectrumReport:
    """The `count` eigenvalues of smallest |Re Λ|, dense below `dense_limit`, shift-invert above."""
    matrix = as_matrix(L)
    if not 1 <= count <= MAX_SPECTRUM_COUNT:
        raise ValueError(f"count must lie in [1, {MAX_SPECTRUM_COUNT}], got {count}")
    dim = matrix.shape[0]
    residuals = None
    if dim < dense_limit:
        values = _sorted(np.linalg.eigvals(to_dense(matrix)))[:count]
    else:
        shift = -1e-6 * kappa_eff
        try:
            values, vectors = eigs(sparse.csc_matrix(matrix), k=count, sigma=shift, which='LM',
                                   tol=1e-12, maxiter=20 * dim)
        except ArpackNoConvergence as exc:
            res = [float(np.linalg.norm(matrix @ v - lam * v))
                   for lam, v in zip(exc.eigenvalues, exc.eigenvectors.T)]
            raise EigensolverError("shift-invert eigensolver did not converge",
                                   {'converged': len(exc.eigenvalues), 'residuals': res}) from exc
        residuals = np.array([np.linalg.norm(matrix @ v - lam * v) / max(np.linalg.norm(v), 1e-300)
                              for lam, v in zip(values, vectors.T)])
        order = np.lexsort((values.imag, np.abs(values.real)))
        values, residuals = values[order], residuals[order]

    zero_threshold = zero_tol * kappa_eff
    near_threshold = near_tol * kappa_eff
    exact = np.abs(values.real) < zero_threshold
    near = (np.abs(values.real) < near_threshold) & ~exact
    growth = values.real.max() if values.size else 0.0
    if growth > zero_threshold:
        logger.warning(f"spectrum has an eigenvalue with Re Λ = {growth:.2e} > 0")
    report = SpectrumReport(eigenvalues=values, n_exact_zero=int(exact.sum()), n_near_zero=int(near.sum()),
                            leakage_rates=-values.real[near], zero_threshold=zero_threshold,
                            near_threshold=near_threshold, residuals=residuals)
    logger.info(f"spectrum: {report.n_exact_zero} exact-zero, {report.n_near_zero} near-zero of {count}")
    return report


def dark_residual(K, state: np.ndarray) -> float:
    """‖K|ψ⟩‖ / ‖ψ‖."""
    psi = np.asarray(getattr(state, 'xi', state), dtype=complex)
    return float(np.linalg.norm(as_matrix(K) @ psi) / np.linalg.norm(psi))
