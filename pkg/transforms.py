#!/usr/bin/env python3
"""
Squeezing Transformations
Jump operators conjugated by S(ζ), generalized Rabi frequencies, transformed
noise and the squeezed (1,1)-equivalent construction
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from darkstate import solve_recurrence
from dynamics import evolve, fidelity, fit_exponential
from errors import NoCrossingError, TruncationError
from fock_core import ComplexOperator, FockSpace, make_ladder, squeeze_matrix
from liouvillian import LindbladModel, build_K
from rabi_profiles import NLREScheme, Tabulated, stabilizing_crossing, standard_cat_scheme

logger = logging.getLogger(__name__)

MAX_ZETA = 3.0
MAX_PADDING = 400
EDGE_LEVELS = 10


@dataclass(frozen=True)
class SqueezedScheme:
    """K = S(ζ) K_base S(ζ)†."""
    base: NLREScheme
    zeta: complex = 0.0

    def __post_init__(self):
        if abs(self.zeta) >= MAX_ZETA:
            raise ValueError(f"|ζ| must stay below {MAX_ZETA}, got {abs(self.zeta):.3f}")


def bogoliubov_coefficients(zeta: complex) -> Tuple[float, complex]:
    """(u, v) with b = S a S† = u a + v a†, |u|² − |v|² = 1."""
    r, phi = abs(zeta), np.angle(zeta)
    return float(np.cosh(r)), complex(np.exp(1j * phi) * np.sinh(r))


def padding(zeta: complex, digits: float = 35.0) -> int:
    """Extra Fock levels so that squeeze couplings past the padding fall below e^{−digits}."""
    r = abs(zeta)
    if r == 0:
        return 0
    decay = -np.log(np.tanh(r))
    return int(min(MAX_PADDING, np.ceil(2.0 * digits / decay) + 8))


def squeeze_operator(space: FockSpace, zeta: complex, pad: Optional[int] = None) -> np.ndarray:
    """S(ζ) on a space padded by `pad` levels; unitary on the interior block."""
    pad = padding(zeta) if pad is None else pad
    return squeeze_matrix(FockSpace(space.cutoff + pad), zeta)


def _certify(S: np.ndarray, n: int, tol: float = 1e-8) -> None:
    block = S[:, :n]
    defect = float(np.max(np.abs(block.conj().T @ block - np.eye(n))))
    if defect > tol:
        raise TruncationError(f"squeeze operator not unitary on the first {n} levels (defect {defect:.2e})",
                              {'defect': defect, 'levels': n})


def transform_K(sq: SqueezedScheme, space: FockSpace) -> ComplexOperator:
    """S K_base S† built on a padded space and restricted to `space`."""
    if sq.zeta == 0:
        return build_K(sq.base, space)
    N = space.cutoff
    S = squeeze_operator(space, sq.zeta)
    _certify(S, N)
    K = build_K(sq.base, FockSpace(S.shape[0])).matrix
    return ComplexOperator((S @ K @ S.conj().T)[:N, :N], tag='single-mode')


def squeezed_dark_states(sq: SqueezedScheme, space: FockSpace, tail_tol: float = 1e-8) -> List[np.ndarray]:
    """S(ζ)|Ξ_μ⟩ for every residue class, truncated to `space`."""
    N = space.cutoff
    S = squeeze_operator(space, sq.zeta)
    out = []
    for state in solve_recurrence(sq.base, FockSpace(S.shape[0])):
        full = S @ state.xi
        lost = 1.0 - float(np.linalg.norm(full[:N]) ** 2)
        if lost > tail_tol:
            raise TruncationError(f"squeezed dark state μ={state.mu} loses {lost:.2e} above cutoff {N}",
                                  {'mu': state.mu, 'lost': lost})
        out.append(full[:N] / np.linalg.norm(full[:N]))
    return out


def generalized_rabi(sq: SqueezedScheme, j: int, k: int) -> Tuple[complex, complex]:
    """(f̃_j(k), g̃_j(k)) = (⟨k+j|K|k⟩, ⟨k|K|k+j⟩) summed over the base processes."""
    if j < 0 or k < 0:
        raise ValueError("j and k must be non-negative")
    base = sq.base
    inner = FockSpace(k + j + base.d + 2)
    S = squeeze_operator(inner, sq.zeta)
    M = S.shape[0]
    kp_f = np.arange(M - base.r)
    kp_g = np.arange(M - base.l)
    f_vals = np.asarray(base.f(kp_f), dtype=float) * np.exp(1j * base.phase_f)
    g_vals = np.asarray(base.g(kp_g), dtype=float) * np.exp(1j * base.phase_g)

    def element(row: int, col: int) -> complex:
        # ⟨row|S K S†|col⟩ with K = Σ f|k'+r⟩⟨k'| − g|k'⟩⟨k'+l|
        raising = np.sum(S[row, kp_f + base.r] * np.conj(S[col, kp_f]) * f_vals)
        lowering = np.sum(S[row, kp_g] * np.conj(S[col, kp_g + base.l]) * g_vals)
        return complex(raising - lowering)

    return element(k + j, k), element(k, k + j)


# ---------------------------------------------------------------------------
# Noise in the transformed frame
# ---------------------------------------------------------------------------

@dataclass
class NoiseExpansion:
    kind: str
    zeta: float
    operator: np.ndarray
    expansion: np.ndarray
    weights: Dict[str, float]
    dominant_ratio: float


def frame_quadratures(space: FockSpace) -> Tuple[np.ndarray, np.ndarray]:
    """q = (a+a†)/2, p = i(a†−a)/2, so that a = q + ip."""
    a, ad = make_ladder(space)
    return (a + ad) / 2.0, 1j * (ad - a) / 2.0


def transform_noise(kind: str, zeta: float, space: FockSpace) -> NoiseExpansion:
    """S†XS for X ∈ {a, n} next to its quadrature expansion.

    a ↦ e^{−ζ} q + i e^{ζ} p, n ↦ e^{2ζ} p² + e^{−2ζ} q² − ½ for real ζ.
    """
    if kind not in ('loss', 'dephasing'):
        raise ValueError(f"kind must be 'loss' or 'dephasing', got '{kind}'")
    if np.iscomplexobj(zeta) and np.imag(zeta) != 0:
        raise ValueError("the quadrature expansion is defined for real ζ")
    zeta = float(np.real(zeta))
    N = space.cutoff
    S = squeeze_operator(space, zeta)
    big = FockSpace(S.shape[0])
    a, ad = make_ladder(big)
    q, p = frame_quadratures(space)
    if kind == 'loss':
        op = (S.conj().T @ a @ S)[:N, :N]
        weights = {'q': float(np.exp(-zeta)), 'p': float(np.exp(zeta))}
        expansion = weights['q'] * q + 1j * weights['p'] * p
        ratio = weights['p'] / weights['q']
    else:
        op = (S.conj().T @ (ad @ a) @ S)[:N, :N]
        weights = {'q2': float(np.exp(-2 * zeta)), 'p2': float(np.exp(2 * zeta)), 'constant': -0.5}
        qb, pb = frame_quadratures(big)
        expansion = (weights['p2'] * pb @ pb + weights['q2'] * qb @ qb)[:N, :N] - 0.5 * np.eye(N)
        ratio = weights['p2'] / weights['q2']
    return NoiseExpansion(kind=kind, zeta=zeta, operator=op, expansion=expansion,
                          weights=weights, dominant_ratio=float(ratio))


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

def certified_kernel(K, tol: float = 1e-9, edge: int = EDGE_LEVELS, edge_tol: float = 1e-6) -> np.ndarray:
    """Columns spanning the near-null space of K with negligible weight in the top `edge` levels.

    Truncation creates null vectors piled against the cutoff; within the
    near-null subspace those are separated by diagonalizing the edge weight.
    """
    K = np.asarray(getattr(K, 'matrix', K))
    _, s, vh = np.linalg.svd(K)
    scale = max(1.0, float(s[0])) if s.size else 1.0
    null = vh[s < tol * scale].conj().T
    if null.shape[1] == 0:
        return null
    edge_rows = null[-edge:, :]
    weight, rotation = np.linalg.eigh(edge_rows.conj().T @ edge_rows)
    return null @ rotation[:, weight < edge_tol]


def kernel_dimension(K, tol: float = 1e-9) -> int:
    return int(certified_kernel(K, tol).shape[1])


# ---------------------------------------------------------------------------
# Squeezed (1,1)-equivalent construction
# ---------------------------------------------------------------------------

@dataclass
class XuStyleScheme:
    """K = (c₁a† + c₂a) S(ζ)(a² − α²) S(ζ)†, i.e. (A b† + B b)(b² − α²) in the b frame."""
    alpha: float
    zeta: float
    c1: complex
    c2: complex
    operator: ComplexOperator
    frame_operator: np.ndarray
    A: complex
    B: complex
    dark_states: List[np.ndarray]
    frame_profiles: Dict[str, np.ndarray] = field(default_factory=dict)

    def frame_rabi(self, j: int) -> Tuple[np.ndarray, np.ndarray]:
        """⟨k+j|K_b|k⟩ and ⟨k|K_b|k+j⟩ over k."""
        K = self.frame_operator
        n = K.shape[0] - j
        idx = np.arange(max(n, 0))
        return K[idx + j, idx], K[idx, idx + j]


def _cat_pair(space: FockSpace, alpha: float) -> List[np.ndarray]:
    return [s.xi for s in solve_recurrence(standard_cat_scheme(alpha, 2), space)]


def xu_style_scheme(alpha: float, zeta: float, c1: complex, c2: complex, space: FockSpace) -> XuStyleScheme:
    """Builds the operator and gates it on a gain-switch crossing of its j=1 frame profiles."""
    N = space.cutoff
    S = squeeze_operator(space, zeta)
    big = FockSpace(S.shape[0])
    a, ad = make_ladder(big)
    core = a @ a - alpha ** 2 * np.eye(big.cutoff)
    K = ((c1 * ad + c2 * a) @ S @ core @ S.conj().T)[:N, :N]

    u, v = np.cosh(zeta), np.sinh(zeta)
    A, B = c1 * u - c2 * v, c2 * u - c1 * v
    a_n, ad_n = make_ladder(space)
    frame = (A * ad_n + B * a_n) @ (a_n @ a_n - alpha ** 2 * space.identity())

    ks = np.arange(N - 2)
    raising = np.abs(frame[ks + 1, ks])
    lowering = np.abs(frame[ks, ks + 1])
    gate = NLREScheme(r=1, l=1, f_profile=Tabulated(tuple(raising)), g_profile=Tabulated(tuple(lowering)))
    crossing = stabilizing_crossing(gate, (0, N - 4))
    if crossing is None:
        raise NoCrossingError(f"no gain-switch crossing of the frame profiles for c1={c1}, c2={c2}",
                              {'A': complex(A), 'B': complex(B)})
    if abs(B) >= abs(A):
        logger.warning("|B| ≥ |A|: the prefactor has a normalizable kernel and the manifold may grow")

    cats = [(S @ c)[:N] for c in _cat_pair(big, alpha)]
    cats = [c / np.linalg.norm(c) for c in cats]
    logger.info(f"xu-style scheme: frame crossing k*={crossing.k_star:.2f}, A={A:.3f}, B={B:.3f}")
    return XuStyleScheme(alpha=alpha, zeta=zeta, c1=c1, c2=c2,
                         operator=ComplexOperator(K, tag='single-mode'), frame_operator=frame,
                         A=complex(A), B=complex(B), dark_states=cats,
                         frame_profiles={'raising': raising, 'lowering': lowering})


def squeezed_cat_operator(alpha: float, zeta: float, space: FockSpace) -> ComplexOperator:
    """S(ζ)(a² − α²)S(ζ)†, the squeezed (0,2) reference."""
    return transform_K(SqueezedScheme(standard_cat_scheme(alpha, 2), zeta), space)


def loss_protection_rate(K, dark: np.ndarray, loss_rate: float, space: FockSpace,
                         horizon: float = 20.0, samples: int = 80, method: str = 'expm') -> Dict[str, Any]:
    """Logical decay of |dark⟩ under √1·K plus single-boson loss, fidelity floor ½."""
    a, _ = make_ladder(space)
    model = LindbladModel(dim=space.cutoff, jumps=[(np.asarray(getattr(K, 'matrix', K)), 1.0), (a, loss_rate)])
    times = np.linspace(0.0, horizon, samples)
    traj = evolve(model, np.outer(dark, dark.conj()), times,
                  observables={'fidelity': lambda r: fidelity(r, dark)},
                  method=method)
    fit = fit_exponential(times, traj.observables['fidelity'], window=(0.1 * horizon, horizon), floor=0.5)
    return {'rate': fit.rate, 'final_fidelity': float(traj.observables['fidelity'][-1]), 'fit': fit.to_dict()}


def zeta_sweep(zetas: Sequence[float], figure: Callable[[float], float]) -> List[Dict[str, float]]:
    """Evaluates a scalar figure of merit at each ζ."""
    rows = []
    for zeta in zetas:
        value = float(figure(float(zeta)))
        rows.append({'zeta': float(zeta), 'value': value})
        logger.info(f"zeta_sweep: ζ={zeta:.3f} → {value:.4g}")
    return rows
