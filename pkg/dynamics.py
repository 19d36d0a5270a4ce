#!/usr/bin/env python3
"""
Master-Equation Dynamics
Lindblad evolution, confinement-rate measurement and error-correction runs
"""

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from darkstate import DarkState, auto_cutoff, predicted_confinement_rate, solve_recurrence
from errors import CertificationError, TruncationError
from fock_core import (DensityOperator, FockSpace, Matrix, as_matrix, make_ladder, number_operator,
                       partial_trace_spin, quadratures, spin_operators, tensor, unvec, vec)
from liouvillian import LindbladModel, build_liouvillian, lindblad_model_from_scheme
from rabi_profiles import NLREScheme

logger = logging.getLogger(__name__)

METHODS = ('DOP853', 'RK45', 'BDF', 'expm')
NOISE_KINDS = ('dephasing', 'loss', 'gain', 'momentum', 'spin_dephasing')

TOP_LEVELS = 5
TRACE_TOL = 1e-7

Observable = Callable[[np.ndarray], float]


@dataclass
class Trajectory:
    times: np.ndarray
    observables: Dict[str, np.ndarray]
    checkpoints: Dict[float, np.ndarray] = field(default_factory=dict)
    final_state: Optional[np.ndarray] = None
    summary: Dict[str, Any] = field(default_factory=dict)

    def rows(self) -> List[Dict[str, float]]:
        names = list(self.observables)
        return [{'t': float(t), **{name: float(self.observables[name][i]) for name in names}}
                for i, t in enumerate(self.times)]

    def to_csv(self, path: str) -> None:
        rows = self.rows()
        with open(path, 'w', newline='') as handle:
            writer = csv.DictWriter(handle, fieldnames=list(rows[0]) if rows else ['t'])
            writer.writeheader()
            writer.writerows(rows)


@dataclass
class RateFit:
    rate: float
    intercept: float
    fit_window: Tuple[float, float]
    residual_rms: float
    points: int = 0

    @property
    def accepted(self) -> bool:
        return self.points >= 3 and self.residual_rms < 0.05

    def to_dict(self) -> Dict[str, Any]:
        return {'rate': self.rate, 'intercept': self.intercept, 'fit_window': list(self.fit_window),
                'residual_rms': self.residual_rms, 'points': self.points, 'accepted': self.accepted}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def fidelity(rho: np.ndarray, psi: np.ndarray) -> float:
    """⟨ψ|ρ|ψ⟩ for a pure target (Uhlmann fidelity, squared form)."""
    psi = np.asarray(psi, dtype=complex)
    return float(np.real(np.vdot(psi, np.asarray(rho) @ psi)) / np.real(np.vdot(psi, psi)))


def manifold_projector(states: Sequence) -> np.ndarray:
    """Π onto the span of the given states (orthonormalized)."""
    columns = np.column_stack([np.asarray(getattr(s, 'xi', s), dtype=complex) for s in states])
    q, _ = np.linalg.qr(columns)
    return q @ q.conj().T


def manifold_projection(rho: np.ndarray, states: Sequence) -> float:
    """tr(Π ρ)."""
    return float(np.real(np.trace(manifold_projector(states) @ np.asarray(rho))))


def displace_state(psi: np.ndarray, space: FockSpace, alpha: complex) -> np.ndarray:
    """exp(α a† − α* a)|ψ⟩ by the dense matrix exponential at the working cutoff."""
    a, ad = make_ladder(space)
    out = expm(alpha * ad - np.conj(alpha) * a) @ np.asarray(psi, dtype=complex)
    return out / np.linalg.norm(out)


def noise_channel(kind: str, rate: float, space: FockSpace, spin: bool = False) -> Tuple[np.ndarray, float]:
    """(jump, rate) for dephasing n̂, loss â, gain â†, momentum p̂ = i(â†−â)/√2 or spin dephasing σ̂_z."""
    if kind not in NOISE_KINDS:
        raise ValueError(f"noise kind must be one of {NOISE_KINDS}, got '{kind}'")
    if rate < 0:
        raise ValueError(f"noise rate must be non-negative, got {rate}")
    a, ad = make_ladder(space)
    mode_ops = {
        'dephasing': number_operator(space),
        'loss': a,
        'gain': ad,
        'momentum': quadratures(space)[1],
    }
    if kind == 'spin_dephasing':
        if not spin:
            raise ValueError("spin dephasing needs a spin⊗mode model")
        return tensor(spin_operators()['sigma_z'], space.identity()), rate
    op = mode_ops[kind]
    return (tensor(np.eye(2), op) if spin else op), rate


def _mode_populations(rho: np.ndarray, model: LindbladModel) -> Optional[np.ndarray]:
    if model.tag == 'single-mode':
        return np.real(np.diag(rho))
    if model.tag == 'spin⊗mode':
        return np.real(np.diag(partial_trace_spin(rho, model.dim // 2)))
    return None


def _step(generator: Matrix, y: np.ndarray, t0: float, t1: float, method: str,
          rtol: float, atol: float) -> np.ndarray:
    if method == 'expm':
        return expm_multiply(generator * (t1 - t0), y)
    kwargs = {'jac': generator} if method == 'BDF' else {}
    sol = solve_ivp(lambda _t, v: generator @ v, (t0, t1), y, method=method,
                    rtol=rtol, atol=atol, **kwargs)
    if sol.status < 0:
        raise CertificationError(f"integrator failed on [{t0}, {t1}]: {sol.message}",
                                 {'method': method, 't0': t0, 't1': t1})
    return sol.y[:, -1]


def evolve(model: LindbladModel, rho0, times: Sequence[float],
           observables: Optional[Dict[str, Observable]] = None,
           method: str = 'DOP853', rtol: float = 1e-8, atol: float = 1e-10,
           checkpoints: Sequence[float] = (), on_truncation: str = 'raise',
           truncation_threshold: float = 1e-6, time_budget: Optional[float] = None) -> Trajectory:
    """Integrate dρ/dt = 𝓛ρ sample to sample; Hermiticity is restored at every sample."""
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got '{method}'")
    if on_truncation not in ('raise', 'warn'):
        raise ValueError("on_truncation must be 'raise' or 'warn'")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be non-negative and strictly increasing")
    rho = np.asarray(as_matrix(rho0), dtype=complex)
    if rho.shape != (model.dim, model.dim):
        raise ValueError(f"initial state has shape {rho.shape}, model dimension is {model.dim}")

    generator = build_liouvillian(model).matrix
    if method != 'expm' and sparse.issparse(generator):
        generator = generator.tocsr()
    observables = dict(observables or {})
    if model.tag == 'single-mode':
        n_op = np.arange(model.dim)
        observables.setdefault('n', lambda r: float(np.real(np.diag(r)) @ n_op))
        observables.setdefault('parity', lambda r: float(np.real(np.diag(r)) @ (-1.0) ** n_op))

    deadline = time.monotonic() + time_budget if time_budget else None
    records: Dict[str, List[float]] = {name: [] for name in observables}
    records['trace_defect'] = []
    records['top_population'] = []
    stored: Dict[float, np.ndarray] = {}
    check_times = set(float(t) for t in checkpoints)

    y = vec(rho)
    current = 0.0 if times[0] > 0 else times[0]
    for t in times:
        if t > current:
            y = _step(generator, y, current, t, method, rtol, atol)
            current = t
        rho = unvec(y, model.dim)
        rho = 0.5 * (rho + rho.conj().T)
        y = vec(rho)

        trace_defect = abs(np.real(np.trace(rho)) - 1.0)
        if trace_defect > TRACE_TOL:
            logger.warning(f"trace defect {trace_defect:.2e} at t={t:.4g}")
        populations = _mode_populations(rho, model)
        top = float(populations[-TOP_LEVELS:].sum()) if populations is not None else 0.0
        if top > truncation_threshold:
            message = f"top-{TOP_LEVELS} population {top:.2e} at t={t:.4g} exceeds {truncation_threshold:.0e}"
            if on_truncation == 'raise':
                raise TruncationError(message, {'t': float(t), 'top_population': top})
            logger.warning(message)
        records['trace_defect'].append(trace_defect)
        records['top_population'].append(top)
        for name, func in observables.items():
            records[name].append(func(rho))
        if float(t) in check_times:
            stored[float(t)] = rho.copy()
        if deadline is not None and time.monotonic() > deadline:
            raise CertificationError(f"time budget of {time_budget}s exceeded at t={t:.4g}",
                                     {'t': float(t), 'time_budget': time_budget})

    logger.info(f"evolve: {times.size} samples to t={times[-1]:.4g} with {method}")
    return Trajectory(times=times, observables={k: np.asarray(v) for k, v in records.items()},
                      checkpoints=stored, final_state=rho)


def fit_exponential(times: Sequence[float], values: Sequence[float],
                    window: Optional[Tuple[float, float]] = None, floor: float = 0.0) -> RateFit:
    """Least-squares line through log(values − floor) inside the window."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float) - floor
    lo, hi = window if window is not None else (t[0], t[-1])
    mask = (t >= lo) & (t <= hi) & (v > 0)
    if mask.sum() < 2:
        raise CertificationError(f"fewer than two positive points in fit window [{lo}, {hi}]",
                                 {'window': [lo, hi]})
    slope, intercept = np.polyfit(t[mask], np.log(v[mask]), 1)
    residual = np.log(v[mask]) - (slope * t[mask] + intercept)
    fit = RateFit(rate=float(-slope), intercept=float(intercept), fit_window=(float(lo), float(hi)),
                  residual_rms=float(np.sqrt(np.mean(residual ** 2))), points=int(mask.sum()))
    if not fit.accepted:
        logger.warning(f"exponential fit residual {fit.residual_rms:.3f} over {fit.points} points")
    return fit


def _manifold_seed(states: Sequence[DarkState]) -> np.ndarray:
    psi = sum(s.xi for s in states[:2])
    return psi / np.linalg.norm(psi)


def measure_confinement(scheme: NLREScheme, delta_x: float = 1e-3, space: Optional[FockSpace] = None,
                        method: str = 'DOP853', samples: int = 60) -> RateFit:
    """Rate at which |Ξ₀⟩+|Ξ₁⟩ displaced by δx along q̂ returns to the manifold."""
    if not 0 < delta_x <= 0.01:
        raise ValueError(f"δx must lie in (0, 0.01], got {delta_x}")
    space = space or FockSpace(auto_cutoff(scheme))
    states = solve_recurrence(scheme, space)
    predicted = predicted_confinement_rate(scheme, space)
    psi = displace_state(_manifold_seed(states), space, delta_x / np.sqrt(2.0))
    projector = manifold_projector(states)

    t0 = max(1.0 / predicted, 0.5 / scheme.kappa_eff)
    t1 = t0 + 4.0 / predicted
    times = np.linspace(0.0, t1, samples)
    model = lindblad_model_from_scheme(scheme, space)
    leaked = lambda r: 1.0 - float(np.real(np.trace(projector @ r)))
    traj = evolve(model, DensityOperator.from_state(psi), times, observables={'leaked': leaked},
                  method=method, rtol=1e-10, atol=1e-13)
    fit = fit_exponential(times, traj.observables['leaked'], window=(t0, t1))
    logger.info(f"measured confinement {fit.rate:.4g} vs predicted {predicted:.4g}")
    return fit


def run_qec_experiment(scheme: NLREScheme, noise: Sequence[Tuple[str, float]],
                       rho0=None, horizon: float = 10.0, samples: int = 200,
                       space: Optional[FockSpace] = None, method: str = 'DOP853',
                       fit_from: float = 0.1, truncation_threshold: float = 1e-6) -> Tuple[Trajectory, RateFit]:
    """Evolve a dark state under the scheme plus noise (kind, rate in units of κ_eff).

    Reports the final infidelity and the logical decay rate from log(F − 1/d). A fidelity that
    falls to the mixed floor leaves no rate to measure and is a certification failure.
    """
    space = space or FockSpace(auto_cutoff(scheme))
    states = solve_recurrence(scheme, space)
    target = states[0].xi
    jumps = [noise_channel(kind, rate * scheme.kappa_eff, space) for kind, rate in noise]
    model = lindblad_model_from_scheme(scheme, space, noise=jumps)
    if rho0 is None:
        rho0 = DensityOperator.from_state(target)
    projector = manifold_projector(states)
    times = np.linspace(0.0, horizon / scheme.kappa_eff, samples)
    traj = evolve(model, rho0, times, method=method,
                  observables={'fidelity': lambda r: fidelity(r, target),
                               'manifold': lambda r: float(np.real(np.trace(projector @ r)))},
                  truncation_threshold=truncation_threshold)
    floor = 1.0 / scheme.d
    traj.summary = {'final_infidelity': float(1.0 - traj.observables['fidelity'][-1]),
                    'min_fidelity': float(traj.observables['fidelity'].min()),
                    'mixed_floor': floor}
    try:
        fit = fit_exponential(times, traj.observables['fidelity'], window=(fit_from * times[-1], times[-1]),
                              floor=floor)
    except CertificationError as exc:
        raise CertificationError(
            f"logical rate not measurable: fidelity reached the mixed floor {floor:.3g} "
            f"(final infidelity {traj.summary['final_infidelity']:.3g})",
            {**exc.details, 'floor': floor, 'final_infidelity': traj.summary['final_infidelity'],
             'min_fidelity': traj.summary['min_fidelity']}) from exc
    traj.summary['logical_rate'] = fit.rate
    traj.summary['fit_accepted'] = fit.accepted
    return traj, fit
