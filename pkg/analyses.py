#!/usr/bin/env python3
"""
Analysis Registry
One runner per scenario analysis kind; each writes its tables through an ArtifactWriter
and returns a flat summary for the manifest and sweep tables
"""

import logging
from dataclasses import replace
from typing import Any, Callable, Dict, List, Tuple

import numpy as np

from artifacts import ArtifactWriter
from darkstate import (TRUE_DARK, cmb_class_distribution, cmb_params_from_scheme, dark_state_rows,
                       distribution_rows, manifold_distribution, predicted_confinement_rate,
                       solve_recurrence, standard_cat_entropy_sweep)
from dynamics import (evolve, manifold_projection, measure_confinement, noise_channel,
                      run_qec_experiment)
from errors import ConfigValidationError
from fock_core import DensityOperator, FockSpace, coherent_state
from liouvillian import build_K, build_liouvillian, dark_residual, lindblad_model_from_scheme, spectrum_near_zero
from phasespace import (PhaseGrid, classical_field, find_critical_points, husimi, scalar_field_rows, wigner)
from platform_cqed import ats_scheme, run_cqed_scenario, rwa_validate
from platform_ion import build_ion_scheme, run_ion_scenario, unstabilized_decay_rate
from rabi_profiles import NLREScheme, stabilizing_crossing, standard_cat_scheme
from scenario_config import ScenarioConfig
from transforms import (SqueezedScheme, generalized_rabi, kernel_dimension, loss_protection_rate,
                        squeezed_cat_operator, transform_K, transform_noise, xu_style_scheme)

logger = logging.getLogger(__name__)

Runner = Callable[[ScenarioConfig, Dict[str, Any], ArtifactWriter], Dict[str, Any]]


def _profile_rows(scheme: NLREScheme, cutoff: int) -> List[Dict[str, float]]:
    ks = np.arange(cutoff)
    f = np.asarray(scheme.f(ks), dtype=float)
    g = np.asarray(scheme.g(ks + scheme.r), dtype=float)
    return [{'k': int(k), 'f': float(fv), 'g_shifted': float(gv)} for k, fv, gv in zip(ks, f, g)]


def _crossing_summary(scheme: NLREScheme, cutoff: int) -> Dict[str, Any]:
    crossing = stabilizing_crossing(scheme, (0, cutoff - 1))
    if crossing is None:
        return {'k_star': None, 'h_star': None}
    return {'k_star': crossing.k_star, 'h_star': crossing.h_star}


def _certified_states(scheme: NLREScheme, space: FockSpace, writer: ArtifactWriter):
    states = solve_recurrence(scheme, space)
    writer.certify('truncation', cutoff=space.cutoff,
                   max_norm_defect=max(s.norm_defect for s in states))
    return states


def _certify_closure(writer: ArtifactWriter, traj, threshold: float) -> None:
    writer.certify('top_population', max=float(np.max(traj.observables['top_population'])), threshold=threshold)
    writer.certify('trace', max_defect=float(np.max(traj.observables['trace_defect'])))


def _samples(settings: Dict[str, Any], requested: int) -> int:
    return max(3, int(round(requested * settings.get('sample_scale', 1.0))))


def _noise_jumps(entries: List[Dict[str, Any]], scheme: NLREScheme, space: FockSpace):
    return [noise_channel(entry['kind'], float(entry['rate']) * scheme.kappa_eff, space) for entry in entries]


def _initial_state(spec: str, states, space: FockSpace) -> np.ndarray:
    """'dark:μ', 'fock:k', 'coherent:x' or 'manifold' (equal superposition of the first two classes)."""
    kind, _, arg = spec.partition(':')
    if kind == 'dark':
        mu = int(arg or 0)
        match = [s for s in states if s.mu == mu]
        if not match:
            raise ConfigValidationError(f"no dark state in class μ={mu}")
        return match[0].xi
    if kind == 'fock':
        return space.basis(int(arg or 0))
    if kind == 'coherent':
        psi = coherent_state(space, float(arg or 0.0))
        return psi / np.linalg.norm(psi)
    if kind == 'manifold':
        psi = sum(s.xi for s in states[:2])
        return psi / np.linalg.norm(psi)
    raise ConfigValidationError(f"initial state must be dark:μ, fock:k, coherent:x or manifold, got '{spec}'")


# ---------------------------------------------------------------------------
# Scheme-level analyses
# ---------------------------------------------------------------------------

def run_darkstate(config: ScenarioConfig, settings: Dict[str, Any], writer: ArtifactWriter) -> Dict[str, Any]:
    options = config.section('darkstate')
    scheme = config.build_scheme()
    space = config.space_for(scheme)
    states = _certified_states(scheme, space, writer)
    K = build_K(scheme, space)
    residuals = {s.mu: dark_residual(K, s.xi) for s in states}
    writer.certify('dark_residual', max_true_dark=max(
        [residuals[s.mu] for s in states if s.truth == TRUE_DARK], default=0.0))

    writer.csv('profiles.csv', _profile_rows(scheme, space.cutoff),
               metadata={'r': scheme.r, 'l': scheme.l, 'cutoff': space.cutoff})
    dist = manifold_distribution(states)
    writer.csv('distribution.csv', distribution_rows(dist), metadata={'classes': len(states)})
    writer.csv('dark_states.csv', [row for s in states for row in dark_state_rows(s)])

    summary = {'cutoff': space.cutoff, 'states': len(states),
               'true_dark': sum(s.truth == TRUE_DARK for s in states),
               'mean_n': dist.mean, 'variance_n': dist.variance, 'mandel_q': dist.mandel_q,
               'max_residual': max(residuals.values()), **_crossing_summary(scheme, space.cutoff)}

    if options.get('cmb'):
        crossing = stabilizing_crossing(scheme, (0, space.cutoff - 1))
        if crossing is None or crossing.slope_f == 0 or crossing.slope_g == 0:
            logger.warning("CMB comparison needs two sloped linear profiles; skipped")
        else:
            params = cmb_params_from_scheme(scheme)
            rows, worst = [], 0.0
            for state in states:
                reference = cmb_class_distribution(params, state.mu, space.cutoff)
                recurrence = np.abs(state.xi) ** 2
                worst = max(worst, 0.5 * float(np.abs(reference - recurrence).sum()))
                rows.extend({'mu': state.mu, 'k': k, 'recurrence': float(p), 'cmb': float(c)}
                            for k, (p, c) in enumerate(zip(recurrence, reference)))
            writer.csv('cmb_comparison.csv', rows, metadata={'m': params.m, 'theta': params.theta})
            summary['cmb_total_variation'] = worst
    alphas = options.get('entropy_alphas')
    if alphas:
        entropy = standard_cat_entropy_sweep(scheme.d, alphas)
        writer.csv('entropy_sweep.csv', [{'alpha': float(a), 'relative_entropy': s}
                                         for a, s in zip(alphas, entropy)], metadata={'d': scheme.d})
        summary['entropy_last'] = entropy[-1]
    return summary


def run_spectrum(config: ScenarioConfig, settings: Dict[str, Any], writer: ArtifactWriter) -> Dict[str, Any]:
    options = config.section('spectrum')
    scheme = config.build_scheme()
    space = config.space_for(scheme)
    states = _certified_states(scheme, space, writer)
    L = build_liouvillian(lindblad_model_from_scheme(scheme, space))
    report = spectrum_near_zero(L, count=int(options.get('count', 5)), kappa_eff=scheme.kappa_eff,
                                zero_tol=float(options.get('zero_tol', settings['zero_tol'])),
                                near_tol=float(options.get('near_tol', 1e-2)),
                                dense_limit=settings['dense_eig_limit'])
    rows = [{'index': i, 're': float(v.real), 'im': float(v.imag)} for i, v in enumerate(report.eigenvalues)]
    writer.csv('eigenvalues.csv', rows, metadata={'cutoff': space.cutoff, 'kappa_eff': scheme.kappa_eff})
    writer.json('spectrum.json', report.to_dict())
    if report.residuals is not None:
        writer.certify('eigen_residual', max=float(np.max(report.residuals)))
    leak = sorted(report.leakage_rates)
    return {'cutoff': space.cutoff, 'n_exact_zero': report.n_exact_zero, 'n_near_zero': report.n_near_zero,
            'dark_state_count': report.dark_state_count, 'variance_n': states[0].distribution.variance,
            **{f'leakage_{i}': float(rate) for i, rate in enumerate(leak)}}


def run_evolve(config: ScenarioConfig, settings: Dict[str, Any], writer: ArtifactWriter) -> Dict[str, Any]:
    options = config.section('evolve')
    scheme = config.build_scheme()
    space = config.space_for(scheme)
    states = _certified_states(scheme, space, writer)
    psi = _initial_state(options.get('initial', 'fock:0'), states, space)
    model = lindblad_model_from_scheme(scheme, space, noise=_noise_jumps(options.get('noise', []), scheme, space))
    times = np.linspace(0.0, float(options.get('horizon', 10.0)) / scheme.kappa_eff,
                        _samples(settings, int(options.get('samples', 101))))
    traj = evolve(model, DensityOperator.from_state(psi), times,
                  observables={'manifold': lambda r: manifold_projection(r, states)},
                  method=options.get('method', 'DOP853'), rtol=settings['rtol'], atol=settings['atol'],
                  truncation_threshold=settings['truncation_threshold'])
    writer.csv('trajectory.csv', traj.rows(), metadata={'cutoff': space.cutoff, 'kappa_eff': scheme.kappa_eff})
    _certify_closure(writer, traj, settings['truncation_threshold'])
    return {'cutoff': space.cutoff, 'final_manifold': float(traj.observables['manifold'][-1]),
            'final_n': float(traj.observables['n'][-1]),
            'max_top_population': float(np.max(traj.observables['top_population']))}


def run_confinement(config: ScenarioConfig, settings: Dict[str, Any], writer: ArtifactWriter) -> Dict[str, Any]:
    options = config.section('confinement')
    scheme = config.build_scheme()
    space = config.space_for(scheme)
    _certified_states(scheme, space, writer)
    fit = measure_confinement(scheme, delta_x=float(options.get('delta_x', 1e-3)), space=space,
                              method=options.get('method', 'DOP853'),
                              samples=_samples(settings, int(options.get('samples', 60))))
    predicted = predicted_confinement_rate(scheme, space, skew_correction=options.get('skew_correction', True))
    writer.json('confinement.json', {'fit': fit.to_dict(), 'predicted': predicted})
    return {'cutoff': space.cutoff, 'measured_rate': fit.rate, 'predicted_rate': predicted,
            'ratio': fit.rate / predicted, **_crossing_summary(scheme, space.cutoff)}


def run_qec(config: ScenarioConfig, settings: Dict[str, Any], writer: ArtifactWriter) -> Dict[str, Any]:
    options = config.section('qec')
    scheme = config.build_scheme()
    space = config.space_for(scheme)
    states = _certified_states(scheme, space, writer)
    noise = [(entry['kind'], float(entry['rate'])) for entry in options.get('noise', [])]
    traj, fit = run_qec_experiment(scheme, noise, horizon=float(options.get('horizon', 10.0)),
                                   samples=_samples(settings, int(options.get('samples', 200))),
                                   space=space, method=options.get('method', 'DOP853'),
                                   fit_from=float(options.get('fit_from', 0.1)),
                                   truncation_threshold=settings['truncation_threshold'])
    writer.csv('trajectory.csv', traj.rows(), metadata={'noise': noise, 'cutoff': space.cutoff})
    writer.json('logical_rate.json', fit.to_dict())
    _certify_closure(writer, traj, settings['truncation_threshold'])
    writer.certify('logical_fit', accepted=fit.accepted, residual_rms=fit.residual_rms, points=fit.points)
    return {'cutoff': space.cutoff, 'mandel_q': states[0].distribution.mandel_q, **traj.summary}


# ---------------------------------------------------------------------------
# Platforms
# ---------------------------------------------------------------------------

def run_ion(config: ScenarioConfig, settings: Dict[str, Any], writer: ArtifactWriter) -> Dict[str, Any]:
    options = config.section('run')
    ion = config.ion_config()
    if 'points_per_unit' not in config.section('ion'):
        ion = replace(ion, points_per_unit=settings['recoil_points_per_unit'])
    scheme = build_ion_scheme(ion)
    writer.csv('profiles.csv', _profile_rows(scheme, ion.cutoff), metadata={'eta_l': ion.eta_l, 'ratio': ion.ratio})
    traj, fit = run_ion_scenario(ion, initial=options.get('initial', 'four_cat_matched'),
                                 path=options.get('path', 'full'), horizon=options.get('horizon'),
                                 with_noise=options.get('with_noise', True))
    writer.csv('trajectory.csv', traj.rows(), metadata={'path': traj.summary['path'], 'cutoff': ion.cutoff})
    writer.json('logical_rate.json', fit.to_dict())
    summary = dict(traj.summary)
    if options.get('unstabilized', False):
        bare = unstabilized_decay_rate(ion, horizon=options.get('horizon'))
        summary['unstabilized_rate'] = bare.rate
        writer.json('unstabilized_rate.json', bare.to_dict())
    return summary


def run_cqed(config: ScenarioConfig, settings: Dict[str, Any], writer: ArtifactWriter) -> Dict[str, Any]:
    options = config.section('run')
    cqed = config.cqed_config()
    scheme = ats_scheme(cqed)
    writer.csv('profiles.csv', _profile_rows(scheme, cqed.storage_cutoff), metadata={'alignment': cqed.alignment})
    writer.json('resonance.json', {'plan': cqed.plan.to_dict(), 'frequencies': cqed.frequencies(),
                                   'bias_voltage': cqed.bias_voltage, 'kappa_eff': cqed.kappa_eff})
    traj = run_cqed_scenario(cqed, initial=options.get('initial', 'fock:0'), horizon=options.get('horizon'),
                             threshold=float(options.get('threshold', 0.99)))
    writer.csv('trajectory.csv', traj.rows(), metadata={'storage_cutoff': cqed.storage_cutoff})
    summary = {k: v for k, v in traj.summary.items() if k != 'plan'}
    summary['bias_voltage'] = cqed.bias_voltage
    return summary


def run_rwa_validate(config: ScenarioConfig, settings: Dict[str, Any], writer: ArtifactWriter) -> Dict[str, Any]:
    options = config.section('rwa')
    cqed = config.cqed_config()
    report = rwa_validate(cqed, averaging_time=float(options.get('averaging_time', 10e-9)),
                          integration_step=float(options.get('integration_step', 1e-12)),
                          max_order=int(options.get('max_order', 6)))
    writer.csv('rwa_elements.csv', report.rows(),
               metadata={'averaging_time': report.averaging_time, 'integration_step': report.integration_step})
    return {'h_star': report.h_star, 'max_resonant_error': report.max_resonant_error,
            'max_unwanted': report.max_unwanted, 'unwanted_fraction': report.unwanted_fraction}


# ---------------------------------------------------------------------------
# Transforms and phase space
# ---------------------------------------------------------------------------

def run_transform(config: ScenarioConfig, settings: Dict[str, Any], writer: ArtifactWriter) -> Dict[str, Any]:
    options = config.section('transform')
    mode = options.get('mode', 'rabi')
    zeta = float(options.get('zeta', 0.5))
    alpha = float(options.get('alpha', 2.0))
    space = FockSpace(int(options.get('cutoff', 80)))
    base = standard_cat_scheme(alpha, 2)
    sq = SqueezedScheme(base, zeta)

    if mode == 'rabi':
        rows = []
        for j in range(int(options.get('j_max', 4)) + 1):
            for k in range(int(options.get('k_max', 20)) + 1):
                f, g = generalized_rabi(sq, j, k)
                rows.append({'j': j, 'k': k, 'f_abs': abs(f), 'g_abs': abs(g)})
        odd = max([max(r['f_abs'], r['g_abs']) for r in rows if r['j'] % 2], default=0.0)
        writer.csv('generalized_rabi.csv', rows, metadata={'zeta': zeta, 'alpha': alpha})
        return {'max_odd_element': odd, 'rows': len(rows)}
    if mode == 'noise':
        expansion = transform_noise(options.get('noise', 'loss'), zeta, space)
        interior = space.cutoff // 2
        defect = float(np.max(np.abs(expansion.operator - expansion.expansion)[:interior, :interior]))
        writer.json('noise_expansion.json', {'weights': expansion.weights,
                                             'dominant_ratio': expansion.dominant_ratio, 'defect': defect})
        return {'kind': expansion.kind, 'dominant_ratio': expansion.dominant_ratio, 'identity_defect': defect}
    if mode == 'kernel':
        dim = kernel_dimension(transform_K(sq, space).matrix)
        return {'kernel_dimension': dim, 'zeta': zeta}
    if mode == 'xu':
        c1 = float(options.get('c1', 1.0))
        c2 = float(options.get('c2', c1 * np.tanh(zeta)))
        xu = xu_style_scheme(alpha, zeta, c1, c2, space)
        loss = float(options.get('loss_rate', 0.01))
        horizon = float(options.get('horizon', 20.0))
        dark = xu.dark_states[0]
        xu_rate = loss_protection_rate(xu.operator, dark, loss, space, horizon=horizon)
        ref_rate = loss_protection_rate(squeezed_cat_operator(alpha, zeta, space), dark, loss, space,
                                        horizon=horizon)
        writer.json('protection.json', {'xu': xu_rate, 'squeezed_cat': ref_rate,
                                        'A': [xu.A.real, xu.A.imag], 'B': [xu.B.real, xu.B.imag]})
        return {'xu_rate': xu_rate['rate'], 'squeezed_cat_rate': ref_rate['rate']}
    raise ConfigValidationError(f"[transform] mode must be rabi, noise, kernel or xu, got '{mode}'")


def run_phasespace(config: ScenarioConfig, settings: Dict[str, Any], writer: ArtifactWriter) -> Dict[str, Any]:
    options = config.section('phasespace')
    quantity = options.get('quantity', 'wigner')
    resolution = int(options.get('resolution', settings['wigner_resolution']))
    scheme = config.build_scheme()
    space = config.space_for(scheme)

    if quantity == 'field':
        crossing = stabilizing_crossing(scheme, (0, space.cutoff - 1))
        default_half = np.sqrt(crossing.k_star) + 2.0 if crossing else 4.0
        grid = PhaseGrid.square(float(options.get('half_width', default_half)), resolution)
        field = classical_field(scheme, grid, jobs=settings['default_jobs'])
        report = find_critical_points(field)
        writer.csv('field.csv', field.rows(), metadata=field.metadata())
        writer.csv('critical_points.csv', report.rows(), fieldnames=['q', 'p', 'class', 'eigenvalues'])
        return {'stable': report.count('stable'), 'saddle': report.count('saddle'),
                'unstable': report.count('unstable'), 'unclassified': report.count('unclassified'),
                'dropped_seeds': report.dropped, 'd': scheme.d}

    states = _certified_states(scheme, space, writer)
    state = options.get('state', 'dark:0')
    if state == 'mixture':
        rho = sum(np.outer(s.xi, s.xi.conj()) for s in states) / len(states)
    else:
        psi = _initial_state(state, states, space)
        rho = np.outer(psi, psi.conj())
    grid = (PhaseGrid.square(float(options['half_width']), resolution) if 'half_width' in options
            else PhaseGrid.for_cutoff(space.cutoff, resolution))
    if quantity == 'wigner':
        values = wigner(rho, grid, jobs=settings['default_jobs'])
        writer.certify('wigner_normalization', value=float(values.sum() * grid.cell_area))
    elif quantity == 'husimi':
        values = husimi(rho, grid, jobs=settings['default_jobs'])
    else:
        raise ConfigValidationError(f"[phasespace] quantity must be wigner, husimi or field, got '{quantity}'")
    writer.csv(f'{quantity}.csv', scalar_field_rows(grid, values), metadata=grid.to_dict())
    return {'quantity': quantity, 'min': float(values.min()), 'max': float(values.max()),
            'integral': float(values.sum() * grid.cell_area)}


ANALYSIS_REGISTRY: Dict[str, Tuple[Runner, str, List[str]]] = {
    'darkstate': (run_darkstate, "Dark states from the amplitude recurrence, profiles and boson statistics",
                  ['scheme', 'cutoff', 'darkstate']),
    'spectrum': (run_spectrum, "Liouvillian eigenvalues nearest zero and leakage rates",
                 ['scheme', 'cutoff', 'spectrum']),
    'evolve': (run_evolve, "Lindblad evolution with optional noise channels",
               ['scheme', 'cutoff', 'evolve']),
    'confinement': (run_confinement, "Measured vs predicted return rate after a small displacement",
                    ['scheme', 'cutoff', 'confinement']),
    'qec': (run_qec, "Logical fidelity of a dark state under noise", ['scheme', 'cutoff', 'qec']),
    'ion': (run_ion, "Trapped-ion sideband stabilization with motional noise and recoil", ['ion', 'run']),
    'cqed': (run_cqed, "Voltage-biased ATS effective stabilization", ['cqed', 'run']),
    'rwa-validate': (run_rwa_validate, "Time-averaged ATS Hamiltonian vs the analytic profiles",
                     ['cqed', 'rwa']),
    'transform': (run_transform, "Squeezing transformations: Rabi tables, noise, kernels, squeezed (1,1)",
                  ['transform']),
    'phasespace': (run_phasespace, "Wigner/Husimi grids and the mean-field flow with critical points",
                   ['scheme', 'cutoff', 'phasespace']),
}


def get_available_analyses() -> Dict[str, Dict[str, Any]]:
    """Analysis kinds with descriptions and the config sections they read."""
    return {name: {'description': description, 'sections': sections}
            for name, (_, description, sections) in ANALYSIS_REGISTRY.items()}


def run_analysis(config: ScenarioConfig, settings: Dict[str, Any], writer: ArtifactWriter) -> Dict[str, Any]:
    runner = ANALYSIS_REGISTRY[config.analysis][0]
    logger.info(f"running {config.analysis} for '{config.name}'")
    return runner(config, settings, writer)
