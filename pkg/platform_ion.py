#!/usr/bin/env python3
"""
Trapped-Ion Platform
Sideband Rabi frequencies, the photon-recoil superoperator and the spin⊗motion stabilization scenario
"""

import logging
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.special import jv

from darkstate import solve_recurrence
from dynamics import RateFit, Trajectory, evolve, fidelity, fit_exponential
from errors import CertificationError, ConfigValidationError, GridError, NoCrossingError
from fock_core import (FockSpace, coherent_state, displacement_element, make_ladder, number_operator,
                       partial_trace_spin, position_transform, sandwich, spin_operators, superop_left,
                       superop_right, tensor)
from liouvillian import LindbladModel, build_K, lindblad_model_from_scheme
from rabi_profiles import IonBessel, IonLaguerre, NLREScheme, find_crossing, stabilizing_crossing

logger = logging.getLogger(__name__)

RABI_MODES = ('exact', 'bessel')
INITIAL_KINDS = ('four_cat_matched', 'dark', 'fock')
MIN_POINTS_PER_UNIT = 8


@dataclass
class IonConfig:
    """Single ⁹Be⁺ ion in a Penning micro-trap; frequencies in rad/s, times in s."""
    omega_m: float = 2 * np.pi * 2.5e6
    eta_r: float = 0.3
    eta_l: float = 0.3
    r: int = 0
    l: int = 4
    omega_l: float = 2 * np.pi * 50e3
    ratio: float = 0.2
    gamma: float = 1.0 / 7e-6
    kappa_phi: float = 1.0 / 66e-3
    kappa_h: float = 1.0 / 10.0
    kappa_s: float = 1.0 / 1.12e-3
    recoil: bool = True
    eta_recoil: Optional[float] = None
    cutoff: int = 48
    rabi_mode: str = 'exact'
    horizon: float = 5e-3
    samples: int = 200
    points_per_unit: int = 16
    method: str = 'DOP853'
    time_budget: Optional[float] = None

    def __post_init__(self):
        for name in ('omega_m', 'omega_l', 'gamma', 'kappa_phi', 'kappa_h', 'kappa_s', 'ratio', 'horizon'):
            if getattr(self, name) < 0:
                raise ConfigValidationError(f"{name} must be non-negative, got {getattr(self, name)}")
        for name in ('eta_r', 'eta_l'):
            if not 0 < getattr(self, name) < 1:
                raise ConfigValidationError(f"{name} must lie in (0, 1), got {getattr(self, name)}")
        if self.r < 0 or self.l < 0 or self.r + self.l < 1:
            raise ConfigValidationError(f"bad sideband orders ({self.r}, {self.l})")
        if self.rabi_mode not in RABI_MODES:
            raise ConfigValidationError(f"rabi_mode must be one of {RABI_MODES}")
        if self.cutoff < self.r + self.l + 6:
            raise ConfigValidationError(f"cutoff {self.cutoff} too small for d={self.r + self.l}")
        if self.omega_l >= 0.1 * self.omega_m:
            logger.warning("sideband drive is not well resolved (Ω_l ≥ 0.1 ω_m)")

    @property
    def recoil_eta(self) -> float:
        return self.eta_l if self.eta_recoil is None else self.eta_recoil

    @property
    def kappa_eff(self) -> float:
        return self.omega_l ** 2 / self.gamma

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'IonConfig':
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigValidationError(f"unknown ion config keys: {sorted(unknown)}")
        return cls(**data)


def ion_rabi(k, k_sb: int, eta: float, mode: str = 'exact'):
    """Sideband Rabi frequency of |k⟩ → |k+k_SB⟩: Laguerre form or Bessel approximation."""
    if np.any(np.asarray(k) < 0):
        raise ValueError("Fock index must be non-negative")
    order = abs(k_sb)
    if mode == 'exact':
        return displacement_element(k, order, eta)
    if mode == 'bessel':
        out = jv(order, 2.0 * abs(eta) * np.sqrt(np.asarray(k, dtype=float) + (order + 1) / 2.0))
        return float(out) if np.ndim(out) == 0 else out
    raise ValueError(f"mode must be one of {RABI_MODES}, got '{mode}'")


def _profile(order: int, eta: float, strength: float, mode: str):
    if mode == 'bessel':
        return IonBessel(order=order, eta=eta, strength=strength)
    return IonLaguerre(order=order, eta=eta, strength=strength)


def build_ion_scheme(config: IonConfig, require_crossing: bool = True) -> NLREScheme:
    """f̃ = R·f(k, r, η_r), g̃ = f(k, l, η_l), κ_eff = Ω_l²/γ, phases i^{k_SB}."""
    scheme = NLREScheme(r=config.r, l=config.l,
                        f_profile=_profile(config.r, config.eta_r, config.ratio, config.rabi_mode),
                        g_profile=_profile(config.l, config.eta_l, 1.0, config.rabi_mode),
                        kappa_eff=config.kappa_eff,
                        phase_f=config.r * np.pi / 2, phase_g=config.l * np.pi / 2)
    if require_crossing and stabilizing_crossing(scheme, (0, config.cutoff - 1)) is None:
        raise NoCrossingError(f"no stabilizing crossing below cutoff {config.cutoff} for R={config.ratio}",
                              {'ratio': config.ratio, 'eta_r': config.eta_r, 'eta_l': config.eta_l})
    return scheme


def crossing_scan(config: IonConfig, ratios: Sequence[float]) -> List[Dict[str, Any]]:
    """Stabilizing crossing (k*, h*) for each drive ratio R."""
    rows = []
    for ratio in ratios:
        trial = IonConfig(**{**config.to_dict(), 'ratio': float(ratio)})
        scheme = build_ion_scheme(trial, require_crossing=False)
        crossing = stabilizing_crossing(scheme, (0, config.cutoff - 1))
        rows.append({'ratio': float(ratio),
                     'k_star': crossing.k_star if crossing else None,
                     'h_star': crossing.h_star if crossing else None,
                     'crossings': len(find_crossing(scheme, (0, config.cutoff - 1)))})
    return rows


# ---------------------------------------------------------------------------
# Photon recoil
# ---------------------------------------------------------------------------

def _dipole_integral(u: np.ndarray) -> np.ndarray:
    """∫_{−1}^{1} ¾(1+x²) e^{iux} dx = 3 sin u/u + 3 cos u/u² − 3 sin u/u³."""
    u = np.abs(np.asarray(u, dtype=float))
    out = np.empty(u.shape)
    small = u < 0.5
    us = u[small]
    series = np.zeros(us.shape)
    term = np.ones(us.shape)
    for n in range(12):
        if n:
            term = term * -(us * us) / ((2 * n - 1) * (2 * n))
        series += term * 1.5 * (1.0 / (2 * n + 1) + 1.0 / (2 * n + 3))
    out[small] = series
    ub = u[~small]
    out[~small] = 3 * np.sin(ub) / ub + 3 * np.cos(ub) / ub ** 2 - 3 * np.sin(ub) / ub ** 3
    return out


def recoil_kernel(delta, eta: float):
    """Position-basis weight ½∫W(x)e^{iη√2 Δ x}dx of a coherence at separation Δ; 1 at Δ = 0."""
    out = 0.5 * _dipole_integral(np.sqrt(2.0) * eta * np.asarray(delta, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def recoil_grid(space: FockSpace, points_per_unit: int = 16) -> np.ndarray:
    q_max = np.sqrt(2.0 * space.cutoff) + 4.0
    step = 1.0 / points_per_unit
    n_half = int(np.ceil(q_max / step))
    return step * np.arange(-n_half, n_half + 1)


def _certify_grid(space: FockSpace, grid: np.ndarray) -> Tuple[np.ndarray, float]:
    if grid.size < 2:
        raise GridError("position grid needs at least two points")
    step = float(grid[1] - grid[0])
    if not np.allclose(np.diff(grid), step, rtol=1e-9, atol=1e-12):
        raise GridError("position grid must be uniform")
    q_need = np.sqrt(2.0 * space.cutoff) + 4.0
    if grid[0] > -q_need + 1e-9 or grid[-1] < q_need - 1e-9:
        raise GridError(f"grid [{grid[0]:.2f}, {grid[-1]:.2f}] does not span ±{q_need:.2f}",
                        {'required': q_need})
    if step > 1.0 / MIN_POINTS_PER_UNIT + 1e-12:
        raise GridError(f"grid spacing {step:.3f} coarser than 1/{MIN_POINTS_PER_UNIT}", {'step': step})
    T = position_transform(space, grid)
    overlap = step * (T.T @ T)
    defect = float(np.max(np.abs(overlap - np.eye(space.cutoff))))
    if defect > 1e-8:
        raise GridError(f"Hermite functions not orthonormal on the grid (defect {defect:.2e})",
                        {'defect': defect})
    return T, step


def recoil_motion_map(eta: float, space: FockSpace, grid: Optional[np.ndarray] = None,
                      drop_tol: float = 1e-14) -> sparse.csr_matrix:
    """Column-stacked map ρ → ½∫W(x)e^{iηqx}ρe^{−iηqx}dx on the motion, q = a + a†."""
    N = space.cutoff
    grid = recoil_grid(space) if grid is None else np.asarray(grid, dtype=float)
    T, step = _certify_grid(space, grid)
    kernel = recoil_kernel(grid[:, None] - grid[None, :], eta)
    A = np.einsum('ic,ia->cai', T, T).reshape(N * N, grid.size)
    B = (A * step) @ kernel @ (A * step).T
    W = B.reshape(N, N, N, N).transpose(0, 2, 1, 3).reshape(N * N, N * N, order='F')
    W[np.abs(W) < drop_tol] = 0.0
    return sparse.csr_matrix(W.astype(complex))


def recoil_superoperator(eta: float, gamma: float, space: FockSpace,
                         grid: Optional[np.ndarray] = None) -> sparse.csr_matrix:
    """γ[σ₋ W(ρ_ee) σ₊ − ½{|e⟩⟨e|, ρ}] on spin⊗motion, spin as the left factor."""
    N = space.cutoff
    spin = spin_operators()
    ident = sparse.identity(N, format='csr', dtype=complex)
    E = sparse.kron(sparse.csr_matrix([[0.0], [1.0]]), ident, format='csr')
    G = sparse.kron(sparse.csr_matrix([[1.0], [0.0]]), ident, format='csr')
    W = recoil_motion_map(eta, space, grid)
    jump = sandwich(G, G.conj().T) @ W @ sandwich(E.conj().T, E)
    excited = tensor(spin['proj_e'], ident)
    return (gamma * (jump - 0.5 * superop_left(excited) - 0.5 * superop_right(excited))).tocsr()


# ---------------------------------------------------------------------------
# Models and scenario
# ---------------------------------------------------------------------------

def ion_noise(config: IonConfig, space: FockSpace, spin: bool) -> List[Tuple[Any, float]]:
    """Motional dephasing, heating, cooling and (spin path only) spin dephasing."""
    a, ad = make_ladder(space)
    mode_ops = [(number_operator(space), config.kappa_phi), (ad, config.kappa_h), (a, config.kappa_h)]
    if not spin:
        return [(op, rate) for op, rate in mode_ops if rate > 0]
    ident2 = np.eye(2)
    jumps = [(tensor(ident2, op), rate) for op, rate in mode_ops if rate > 0]
    if config.kappa_s > 0:
        jumps.append((tensor(spin_operators()['sigma_z'], space.identity()), config.kappa_s))
    return jumps


def effective_ion_model(config: IonConfig, scheme: Optional[NLREScheme] = None,
                        with_noise: bool = True) -> LindbladModel:
    """Single-mode path: √κ_eff K̂ plus motional noise, recoil ignored."""
    scheme = scheme or build_ion_scheme(config)
    space = FockSpace(config.cutoff)
    return lindblad_model_from_scheme(scheme, space, ion_noise(config, space, spin=False) if with_noise else ())


def ion_spin_model(scheme: NLREScheme, space: FockSpace, omega: float, gamma: float,
                   noise: Sequence[Tuple[Any, float]] = (), recoil_eta: Optional[float] = None,
                   grid: Optional[np.ndarray] = None) -> LindbladModel:
    """H = (Ω/2)(σ₊⊗K + σ₋⊗K†) with engineered decay √γ σ₋, recoil-dressed when recoil_eta is set."""
    spin = spin_operators()
    K = build_K(scheme, space).matrix
    H = 0.5 * omega * (np.kron(spin['sigma_plus'], K) + np.kron(spin['sigma_minus'], K.conj().T))
    model = LindbladModel(dim=2 * space.cutoff, hamiltonian=H, jumps=list(noise), tag='spin⊗mode')
    if recoil_eta:
        model.extra_superops.append(recoil_superoperator(recoil_eta, gamma, space, grid))
    else:
        model.jumps.append((np.kron(spin['sigma_minus'], space.identity()), gamma))
    return model


def four_cat_matched(target: np.ndarray, d: int, mu: int = 0) -> np.ndarray:
    """d-component cat with the target's residue class and α² = ⟨n⟩ of the target."""
    target = np.asarray(target, dtype=complex)
    space = FockSpace(target.size)
    mean_n = float(np.abs(target) ** 2 @ np.arange(target.size))
    amps = coherent_state(space, np.sqrt(mean_n))
    amps[(np.arange(target.size) % d) != mu] = 0.0
    return amps / np.linalg.norm(amps)


def _initial_motion(initial: str, target: np.ndarray, d: int, space: FockSpace) -> np.ndarray:
    kind, _, arg = initial.partition(':')
    if kind == 'four_cat_matched':
        return four_cat_matched(target, d)
    if kind == 'dark':
        return target
    if kind == 'fock':
        return space.basis(int(arg or 0))
    raise ConfigValidationError(f"initial state must be one of {INITIAL_KINDS}, got '{initial}'")


def _logical_fit(times: np.ndarray, fid: np.ndarray, d: int) -> RateFit:
    """Decay of F − 1/d after the fidelity peak; a peak at the horizon leaves nothing to fit."""
    start = int(np.argmax(fid >= fid.max() - 1e-9))
    if times.size - start < 3:
        raise CertificationError(f"fidelity still rising at the horizon (peak at t={times[start]:.4g})",
                                 {'t_peak': float(times[start]), 'peak_fidelity': float(fid[start])})
    return fit_exponential(times, fid, window=(times[start], times[-1]), floor=1.0 / d)


def run_ion_scenario(config: IonConfig, initial: str = 'four_cat_matched', path: str = 'full',
                     horizon: Optional[float] = None, with_noise: bool = True) -> Tuple[Trajectory, RateFit]:
    """Stabilize the motion into |Ξ₀⟩ and report fidelity, its peak and the logical decay rate."""
    if path not in ('full', 'effective'):
        raise ConfigValidationError(f"path must be 'full' or 'effective', got '{path}'")
    scheme = build_ion_scheme(config)
    space = FockSpace(config.cutoff)
    target = solve_recurrence(scheme, space)[0].xi
    motion = _initial_motion(initial, target, scheme.d, space)
    times = np.linspace(0.0, horizon or config.horizon, config.samples)
    N = space.cutoff

    if path == 'full':
        noise = ion_noise(config, space, spin=True) if with_noise else []
        model = ion_spin_model(scheme, space, config.omega_l, config.gamma, noise,
                               recoil_eta=config.recoil_eta if config.recoil else None,
                               grid=recoil_grid(space, config.points_per_unit))
        rho0 = np.kron(spin_operators()['proj_g'], np.outer(motion, motion.conj()))
        observables = {
            'fidelity': lambda r: fidelity(partial_trace_spin(r, N), target),
            'n': lambda r: float(np.real(np.diag(partial_trace_spin(r, N))) @ np.arange(N)),
            'spin_e': lambda r: float(np.real(np.trace(r[N:, N:]))),
        }
    else:
        model = effective_ion_model(config, scheme, with_noise)
        rho0 = np.outer(motion, motion.conj())
        observables = {'fidelity': lambda r: fidelity(r, target)}

    traj = evolve(model, rho0, times, observables=observables, method=config.method,
                  time_budget=config.time_budget)
    fid = traj.observables['fidelity']
    fit = _logical_fit(times, fid, scheme.d)
    traj.summary = {'peak_fidelity': float(fid.max()), 't_peak': float(times[int(np.argmax(fid))]),
                    'target_mean_n': float(np.abs(target) ** 2 @ np.arange(N)),
                    'logical_rate': fit.rate, 'path': path}
    logger.info(f"ion scenario ({path}): peak fidelity {fid.max():.4f}, logical rate {fit.rate:.4g}/s")
    return traj, fit


def unstabilized_decay_rate(config: IonConfig, horizon: Optional[float] = None) -> RateFit:
    """Logical decay of the matched cat under the motional noise alone."""
    scheme = build_ion_scheme(config)
    space = FockSpace(config.cutoff)
    target = solve_recurrence(scheme, space)[0].xi
    cat = four_cat_matched(target, scheme.d)
    model = LindbladModel(dim=space.cutoff, jumps=ion_noise(config, space, spin=False))
    times = np.linspace(0.0, horizon or config.horizon, config.samples)
    traj = evolve(model, np.outer(cat, cat.conj()), times, observables={'fidelity': lambda r: fidelity(r, cat)},
                  method=config.method, time_budget=config.time_budget)
    return fit_exponential(times, traj.observables['fidelity'], floor=1.0 / scheme.d)
