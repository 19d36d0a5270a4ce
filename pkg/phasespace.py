#!/usr/bin/env python3
"""
Phase-Space Pictures
Wigner and Husimi quasiprobabilities, the coherent-state mean-field vector
field of a jump operator and its critical points
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from errors import GridError, TruncationError
from fock_core import DensityOperator, FockSpace, as_matrix, make_ladder
from liouvillian import build_K
from rabi_profiles import Constant, Ladder, NLREScheme

logger = logging.getLogger(__name__)

POPULATION_FLOOR = 1e-12
NORMALIZATION_TOL = 1e-3
COHERENT_TAIL_TOL = 1e-12
CHUNK_ROWS = 16
CRITICAL_CLASSES = ('stable', 'saddle', 'unstable', 'unclassified')


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform grid over (q, p); for fields the axes are (Re α, Im α)."""
    q_range: Tuple[float, float]
    p_range: Tuple[float, float]
    resolution: int = 121

    def __post_init__(self):
        if self.resolution < 3:
            raise GridError(f"grid resolution must be at least 3, got {self.resolution}")
        for lo, hi in (self.q_range, self.p_range):
            if not hi > lo:
                raise GridError(f"empty grid range ({lo}, {hi})")

    @classmethod
    def for_cutoff(cls, cutoff: int, resolution: int = 121) -> 'PhaseGrid':
        half = np.sqrt(2.0 * cutoff) + 2.0
        return cls((-half, half), (-half, half), resolution)

    @classmethod
    def square(cls, half_width: float, resolution: int = 121) -> 'PhaseGrid':
        return cls((-half_width, half_width), (-half_width, half_width), resolution)

    @property
    def q(self) -> np.ndarray:
        return np.linspace(self.q_range[0], self.q_range[1], self.resolution)

    @property
    def p(self) -> np.ndarray:
        return np.linspace(self.p_range[0], self.p_range[1], self.resolution)

    @property
    def spacing(self) -> float:
        return float(max(np.diff(self.q_range)[0], np.diff(self.p_range)[0]) / (self.resolution - 1))

    @property
    def cell_area(self) -> float:
        return float(np.diff(self.q_range)[0] * np.diff(self.p_range)[0] / (self.resolution - 1) ** 2)

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """(Q, P) with Q[i, j] = q[j], P[i, j] = p[i]."""
        return np.meshgrid(self.q, self.p)

    def half_extent(self) -> float:
        return float(min(-self.q_range[0], self.q_range[1], -self.p_range[0], self.p_range[1]))

    def covers(self, cutoff: int) -> bool:
        return self.half_extent() >= np.sqrt(2.0 * cutoff + 1.0) + 2.0 - 1e-12

    def to_dict(self) -> Dict[str, Any]:
        return {'q_range': list(self.q_range), 'p_range': list(self.p_range),
                'resolution': self.resolution, 'spacing': self.spacing}


def _density_matrix(rho) -> np.ndarray:
    matrix = np.asarray(as_matrix(rho), dtype=complex)
    if matrix.ndim == 1:
        matrix = DensityOperator.from_state(matrix).matrix
    return matrix


def _support(rho: np.ndarray) -> int:
    """Highest occupied Fock level plus one."""
    occupied = np.nonzero(np.real(np.diag(rho)) > POPULATION_FLOOR)[0]
    return int(occupied[-1]) + 1 if occupied.size else 1


# ---------------------------------------------------------------------------
# Quasiprobabilities
# ---------------------------------------------------------------------------

def _parity_kernel(m: int, n: int, alpha: np.ndarray) -> np.ndarray:
    """(2/π)·Tr[|m⟩⟨n| D(α) Π D(α)†] for m ≥ n, prefactor kept in log form."""
    delta = m - n
    x = 4.0 * np.abs(alpha) ** 2
    lag = eval_genlaguerre(n, delta, x)
    with np.errstate(divide='ignore'):
        log_pref = 0.5 * (gammaln(n + 1) - gammaln(m + 1)) - 0.5 * x
        if delta:
            log_pref = log_pref + delta * np.log(2.0 * np.abs(alpha))
        log_mag = log_pref + np.log(np.abs(lag))
    value = np.sign(lag) * np.exp(log_mag)
    if delta:
        value = value * np.exp(-1j * delta * np.angle(alpha))
    return (2.0 / np.pi) * (-1.0) ** n * value


def _wigner_alpha(rho: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Wigner function over d²α at the given amplitudes."""
    dim = _support(rho)
    total = np.zeros(alpha.shape, dtype=float)
    for delta in range(dim):
        for n in range(dim - delta):
            m = n + delta
            coeff = rho[m, n]
            if abs(coeff) < POPULATION_FLOOR ** 2:
                continue
            term = coeff * _parity_kernel(m, n, alpha)
            total += term.real if delta == 0 else 2.0 * term.real
    return total


def _evaluate_rows(fn: Callable[[np.ndarray], np.ndarray], values: np.ndarray, jobs: int) -> np.ndarray:
    """Row chunks evaluated on a thread pool, reassembled in grid order."""
    chunks = [values[i:i + CHUNK_ROWS] for i in range(0, values.shape[0], CHUNK_ROWS)]
    if jobs <= 1 or len(chunks) == 1:
        return np.concatenate([fn(c) for c in chunks])
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return np.concatenate(list(pool.map(fn, chunks)))


def wigner(rho, grid: PhaseGrid, jobs: int = 1, check_normalization: bool = True) -> np.ndarray:
    """W(q, p) on the grid, normalized over dq dp (vacuum peak 1/π).

    Raises GridError when the grid does not reach past the occupied Fock levels
    or the grid integral misses 1 by more than 1e−3.
    """
    rho = _density_matrix(rho)
    support = _support(rho)
    if not grid.covers(support - 1):
        raise GridError(f"grid half-extent {grid.half_extent():.2f} does not cover Fock level {support - 1}",
                        {'required': float(np.sqrt(2.0 * support - 1.0) + 2.0)})
    Q, P = grid.mesh()
    alpha = (Q + 1j * P) / np.sqrt(2.0)
    W = 0.5 * _evaluate_rows(lambda block: _wigner_alpha(rho, block), alpha, jobs)
    if check_normalization:
        norm = float(W.sum() * grid.cell_area)
        if abs(norm - 1.0) > NORMALIZATION_TOL:
            raise GridError(f"Wigner function integrates to {norm:.6f} over the grid",
                            {'normalization': norm, 'spacing': grid.spacing})
    return W


def wigner_at(rho, q: float, p: float) -> float:
    rho = _density_matrix(rho)
    alpha = np.asarray([(q + 1j * p) / np.sqrt(2.0)])
    return float(0.5 * _wigner_alpha(rho, alpha)[0])


def coherent_vectors(alphas: np.ndarray, cutoff: int) -> np.ndarray:
    """Columns ⟨k|α⟩ for k < cutoff, untruncated amplitudes."""
    alphas = np.asarray(alphas, dtype=complex).ravel()
    k = np.arange(cutoff)[:, None]
    mag = np.abs(alphas)[None, :]
    with np.errstate(divide='ignore', invalid='ignore'):
        log_pow = np.where(k == 0, 0.0, k * np.log(mag))
    log_amp = -0.5 * mag ** 2 + log_pow - 0.5 * gammaln(k + 1)
    return np.exp(log_amp) * np.exp(1j * k * np.angle(alphas)[None, :])


def coherent_vector(space: FockSpace, q: float, p: float) -> np.ndarray:
    """|α⟩ with α = (q + ip)/√2."""
    return coherent_vectors(np.asarray([(q + 1j * p) / np.sqrt(2.0)]), space.cutoff)[:, 0]


def husimi(rho, grid: PhaseGrid, jobs: int = 1) -> np.ndarray:
    """Q(q, p) = ⟨α|ρ|α⟩/(2π), normalized over dq dp."""
    rho = _density_matrix(rho)
    cutoff = rho.shape[0]
    Q, P = grid.mesh()
    alpha = (Q + 1j * P) / np.sqrt(2.0)

    def block(values: np.ndarray) -> np.ndarray:
        vecs = coherent_vectors(values, cutoff)
        expect = np.einsum('ki,kl,li->i', vecs.conj(), rho, vecs).real
        return expect.reshape(values.shape) / (2.0 * np.pi)

    return _evaluate_rows(block, alpha, jobs)


# ---------------------------------------------------------------------------
# Mean-field vector field
# ---------------------------------------------------------------------------

@dataclass
class VectorField:
    """(Q̇, Ṗ) = (Re F, Im F) with F(α) = κ_eff ⟨α|D†[K](a)|α⟩ / π."""
    grid: PhaseGrid
    u: np.ndarray
    v: np.ndarray
    evaluate: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    method: str = 'numeric'
    working_cutoff: Optional[int] = None

    @property
    def scale(self) -> float:
        return float(np.max(np.hypot(self.u, self.v)))

    def rows(self) -> List[Dict[str, float]]:
        Q, P = self.grid.mesh()
        return [{'q': float(q), 'p': float(p), 'u': float(u), 'v': float(v)}
                for q, p, u, v in zip(Q.ravel(), P.ravel(), self.u.ravel(), self.v.ravel())]

    def metadata(self) -> Dict[str, Any]:
        return {'grid': self.grid.to_dict(), 'method': self.method,
                'working_cutoff': self.working_cutoff, 'scale': self.scale}


def _is_polynomial(scheme: NLREScheme) -> bool:
    return scheme.r == 0 and isinstance(scheme.f_profile, Constant) and isinstance(scheme.g_profile, Ladder)


def _analytic_field(scheme: NLREScheme) -> Callable[[np.ndarray], np.ndarray]:
    """K = c₀ − c₁aᵈ gives D†[K](a) = (d/2) c₁* a†ᵈ⁻¹ (c₀ − c₁aᵈ), normal ordered."""
    c0 = scheme.f_profile.value * np.exp(1j * scheme.phase_f)
    c1 = scheme.g_profile.scale * np.exp(1j * scheme.phase_g)
    d = scheme.d
    pref = scheme.kappa_eff / np.pi * 0.5 * d * np.conj(c1)

    def evaluate(alpha: np.ndarray) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=complex)
        return pref * np.conj(alpha) ** (d - 1) * (c0 - c1 * alpha ** d)

    return evaluate


def working_cutoff(max_amplitude: float, d: int) -> int:
    """Fock levels needed for coherent states up to |α| = max_amplitude."""
    return int(np.ceil(max_amplitude ** 2 + 10.0 * max_amplitude + 20.0)) + d + 10


def _numeric_field(scheme: NLREScheme, max_amplitude: float) -> Tuple[Callable[[np.ndarray], np.ndarray], int]:
    cutoff = working_cutoff(max_amplitude, scheme.d)
    big = FockSpace(cutoff + 2 * scheme.d + 2)
    K = np.asarray(build_K(scheme, big).matrix)
    a, _ = make_ladder(big)
    KdK = K.conj().T @ K
    adjoint = (K.conj().T @ a @ K - 0.5 * (KdK @ a + a @ KdK))[:cutoff, :cutoff]
    pref = scheme.kappa_eff / np.pi

    def evaluate(alpha: np.ndarray) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=complex)
        vecs = coherent_vectors(alpha, cutoff)
        mass = np.sum(np.abs(vecs) ** 2, axis=0)
        tail = float(np.max(1.0 - mass))
        if tail > COHERENT_TAIL_TOL:
            raise TruncationError(f"coherent-state tail {tail:.2e} beyond working cutoff {cutoff}",
                                  {'tail': tail, 'cutoff': cutoff})
        expect = np.einsum('ki,kl,li->i', vecs.conj(), adjoint, vecs) / mass
        return (pref * expect).reshape(alpha.shape)

    return evaluate, cutoff


def classical_field(scheme: NLREScheme, grid: PhaseGrid, analytic: Optional[bool] = None,
                    jobs: int = 1) -> VectorField:
    """Mean-field flow of the single-mode model on the (Re α, Im α) grid."""
    if analytic is None:
        analytic = _is_polynomial(scheme)
    if analytic and not _is_polynomial(scheme):
        raise ValueError("analytic field needs r = 0 with constant f and ladder g profiles")
    max_amp = float(np.hypot(max(np.abs(grid.q_range)), max(np.abs(grid.p_range))))
    if analytic:
        evaluate, cutoff, method = _analytic_field(scheme), None, 'analytic'
    else:
        evaluate, cutoff = _numeric_field(scheme, max_amp)
        method = 'numeric'
    Q, P = grid.mesh()
    F = _evaluate_rows(evaluate, Q + 1j * P, jobs)
    logger.info(f"classical field ({method}) on {grid.resolution}² grid, scale {np.max(np.abs(F)):.3e}")
    return VectorField(grid=grid, u=F.real, v=F.imag, evaluate=evaluate, method=method,
                       working_cutoff=cutoff)


# ---------------------------------------------------------------------------
# Critical points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CriticalPoint:
    location: complex
    kind: str
    eigenvalues: Tuple[complex, complex]

    def to_dict(self) -> Dict[str, Any]:
        return {'q': self.location.real, 'p': self.location.imag, 'class': self.kind,
                'eigenvalues': [[e.real, e.imag] for e in self.eigenvalues]}


@dataclass
class CriticalPointReport:
    points: List[CriticalPoint]
    seeds: int
    dropped: int

    def count(self, kind: str) -> int:
        return sum(1 for p in self.points if p.kind == kind)

    def of_kind(self, kind: str) -> List[CriticalPoint]:
        return [p for p in self.points if p.kind == kind]

    def rows(self) -> List[Dict[str, Any]]:
        return [p.to_dict() for p in self.points]


def _jacobian(evaluate: Callable, z: complex, step: float) -> np.ndarray:
    J = np.empty((2, 2))
    for col, dz in enumerate((step, 1j * step)):
        fp, fm = evaluate(np.asarray([z + dz]))[0], evaluate(np.asarray([z - dz]))[0]
        diff = (fp - fm) / (2.0 * step)
        J[:, col] = (diff.real, diff.imag)
    return J


def _seed_cells(field_: VectorField) -> List[complex]:
    """Centres of cells where both components change sign."""
    u, v = field_.u, field_.v
    q, p = field_.grid.q, field_.grid.p

    def straddles(x):
        corners = np.stack([x[:-1, :-1], x[1:, :-1], x[:-1, 1:], x[1:, 1:]])
        return (corners.min(axis=0) <= 0) & (corners.max(axis=0) >= 0)

    rows, cols = np.nonzero(straddles(u) & straddles(v))
    return [complex(0.5 * (q[c] + q[c + 1]), 0.5 * (p[r] + p[r + 1])) for r, c in zip(rows, cols)]


def _classify(eigenvalues: np.ndarray, zero_tol: float, floor: float) -> str:
    re = eigenvalues.real
    bound = max(floor, zero_tol * float(np.max(np.abs(eigenvalues))))
    if np.any(np.abs(re) <= bound):
        return 'unclassified'
    if np.all(re < 0):
        return 'stable'
    if np.all(re > 0):
        return 'unstable'
    return 'saddle'


def find_critical_points(field_: VectorField, max_iter: int = 60, tol: float = 1e-10,
                         zero_tol: float = 1e-6) -> CriticalPointReport:
    """Newton zeros of the field seeded from sign-change cells, classified by the
    real parts of the finite-difference Jacobian (step = spacing/10).

    Seeds that fail to converge or leave the grid are dropped and counted.
    Points closer than two grid spacings to an earlier point are merged.
    """
    grid = field_.grid
    step = grid.spacing / 10.0
    scale = field_.scale or 1.0
    floor = 1e-8 * scale / max(grid.half_extent(), 1.0)
    radius = 2.0 * grid.spacing
    seeds = _seed_cells(field_)
    points: List[CriticalPoint] = []
    dropped = 0

    def inside(z: complex) -> bool:
        return (grid.q_range[0] <= z.real <= grid.q_range[1]
                and grid.p_range[0] <= z.imag <= grid.p_range[1])

    for seed in seeds:
        z = seed
        converged = False
        for _ in range(max_iter):
            F = field_.evaluate(np.asarray([z]))[0]
            if abs(F) <= tol * scale:
                converged = True
                break
            J = _jacobian(field_.evaluate, z, step)
            delta = np.linalg.lstsq(J, -np.array([F.real, F.imag]), rcond=None)[0]
            z = z + complex(delta[0], delta[1])
            if not inside(z):
                break
        if not converged:
            dropped += 1
            continue
        if any(abs(z - pt.location) < radius for pt in points):
            continue
        eig = np.linalg.eigvals(_jacobian(field_.evaluate, z, step))
        points.append(CriticalPoint(location=z, kind=_classify(eig, zero_tol, floor),
                                    eigenvalues=(complex(eig[0]), complex(eig[1]))))

    if dropped:
        logger.warning(f"{dropped} of {len(seeds)} Newton seeds did not converge")
    points.sort(key=lambda pt: (CRITICAL_CLASSES.index(pt.kind), np.angle(pt.location), abs(pt.location)))
    return CriticalPointReport(points=points, seeds=len(seeds), dropped=dropped)


def scalar_field_rows(grid: PhaseGrid, values: np.ndarray) -> List[Dict[str, float]]:
    """(q, p, value) rows for CSV export."""
    Q, P = grid.mesh()
    return [{'q': float(q), 'p': float(p), 'value': float(w)}
            for q, p, w in zip(Q.ravel(), P.ravel(), np.asarray(values).ravel())]


def rotational_defect(rho, d: int, points: Sequence[Tuple[float, float]]) -> float:
    """Largest |W(R·x) − W(x)| for rotation by 2π/d over the sample points."""
    rho = _density_matrix(rho)
    c, s = np.cos(2 * np.pi / d), np.sin(2 * np.pi / d)
    worst = 0.0
    for q, p in points:
        rotated = wigner_at(rho, c * q - s * p, s * q + c * p)
        worst = max(worst, abs(rotated - wigner_at(rho, q, p)))
    return worst
