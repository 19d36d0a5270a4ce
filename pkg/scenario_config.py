#!/usr/bin/env python3
"""
Scenario Configuration
TOML/JSON scenario files: parsing, schema validation, content hashing and sweep overrides
"""

import copy
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from darkstate import auto_cutoff
from dynamics import NOISE_KINDS
from errors import ConfigValidationError
from fock_core import FockSpace
from platform_cqed import CqedConfig
from platform_ion import IonConfig
from rabi_profiles import NLREScheme, linear_scheme, profile_from_dict, standard_cat_scheme

logger = logging.getLogger(__name__)

ANALYSES = ('darkstate', 'spectrum', 'evolve', 'confinement', 'qec', 'ion', 'cqed',
            'transform', 'phasespace', 'rwa-validate')
SCHEME_KINDS = ('standard_cat', 'linear', 'profiles')
CUTOFF_POLICIES = ('auto', 'explicit')
AUTO_WIDTH = 8.0

NUMBER = (int, float)

COMMON_SECTIONS = {
    'scenario': {'analysis': str, 'name': str, 'seed': int, 'description': str},
    'output': {'dir': str},
    'sweep': {'axis': str, 'values': list},
}

SCHEME_SECTION = {
    'kind': str, 'alpha': NUMBER, 'd': int, 'r': int, 'l': int,
    'k_star': NUMBER, 'h_star': NUMBER, 'slope_f': NUMBER, 'slope_g': NUMBER,
    'theta_f': NUMBER, 'theta_g': NUMBER, 'kappa_eff': NUMBER,
    'phase_f': NUMBER, 'phase_g': NUMBER, 'f': dict, 'g': dict,
}
CUTOFF_SECTION = {'policy': str, 'value': int}
NOISE_KEYS = {'kind': str, 'rate': NUMBER}
MODE_NOISE_KINDS = tuple(kind for kind in NOISE_KINDS if kind != 'spin_dephasing')

ANALYSIS_SECTIONS: Dict[str, Dict[str, Dict[str, Any]]] = {
    'darkstate': {
        'darkstate': {'cmb': bool, 'entropy_alphas': list},
    },
    'spectrum': {
        'spectrum': {'count': int, 'zero_tol': NUMBER, 'near_tol': NUMBER},
    },
    'evolve': {
        'evolve': {'horizon': NUMBER, 'samples': int, 'method': str, 'initial': str, 'noise': list},
    },
    'confinement': {
        'confinement': {'delta_x': NUMBER, 'samples': int, 'method': str, 'skew_correction': bool},
    },
    'qec': {
        'qec': {'horizon': NUMBER, 'samples': int, 'method': str, 'noise': list, 'fit_from': NUMBER},
    },
    'ion': {
        'ion': None,
        'run': {'initial': str, 'path': str, 'with_noise': bool, 'unstabilized': bool, 'horizon': NUMBER},
    },
    'cqed': {
        'cqed': None,
        'run': {'initial': str, 'horizon': NUMBER, 'threshold': NUMBER},
    },
    'rwa-validate': {
        'cqed': None,
        'rwa': {'averaging_time': NUMBER, 'integration_step': NUMBER, 'max_order': int},
    },
    'transform': {
        'transform': {'mode': str, 'zeta': NUMBER, 'alpha': NUMBER, 'c1': NUMBER, 'c2': NUMBER,
                      'cutoff': int, 'j_max': int, 'k_max': int, 'loss_rate': NUMBER,
                      'horizon': NUMBER, 'noise': str},
    },
    'phasespace': {
        'phasespace': {'quantity': str, 'resolution': int, 'half_width': NUMBER, 'state': str},
    },
}

SCHEME_ANALYSES = ('darkstate', 'spectrum', 'evolve', 'confinement', 'qec', 'phasespace')
ION_FREQUENCIES = ('omega_m', 'omega_l')
CQED_FREQUENCIES = ('e_j', 'omega_a', 'omega_c', 'max_bias_frequency', 'gamma')


def _type_name(expected) -> str:
    if isinstance(expected, tuple):
        return 'number'
    return expected.__name__


def _check_value(section: str, key: str, value: Any, expected) -> None:
    if expected is None:
        return
    if isinstance(value, bool) and expected is not bool:
        ok = False
    elif expected is float:
        ok = isinstance(value, (int, float))
    else:
        ok = isinstance(value, expected)
    if not ok:
        raise ConfigValidationError(f"[{section}] {key} must be {_type_name(expected)}, got {value!r}",
                                    {'section': section, 'key': key})


def _dataclass_schema(cls) -> Dict[str, Any]:
    schema = {f.name: None for f in fields(cls) if f.init}
    schema['angular'] = bool
    return schema


def canonical_json(document: Dict[str, Any]) -> str:
    return json.dumps(document, sort_keys=True, separators=(',', ':'), ensure_ascii=False)


def config_hash(document: Dict[str, Any]) -> str:
    """First 16 hex digits of sha256 over the canonical JSON of the parsed document."""
    return hashlib.sha256(canonical_json(document).encode()).hexdigest()[:16]


def _to_angular(data: Dict[str, Any], keys: Tuple[str, ...]) -> Dict[str, Any]:
    """Drop the `angular` flag; scale frequency keys by 2π when it is false."""
    data = dict(data)
    angular = data.pop('angular', True)
    if not angular:
        for key in keys:
            if key in data:
                data[key] = 2 * np.pi * float(data[key])
    return data


@dataclass
class ScenarioConfig:
    """A validated scenario document."""
    analysis: str
    name: str
    document: Dict[str, Any]
    source: Optional[str] = None
    seed: int = 0
    config_hash: str = field(init=False)

    def __post_init__(self):
        self.config_hash = config_hash(self.document)

    def section(self, name: str) -> Dict[str, Any]:
        return dict(self.document.get(name, {}))

    def output_dir(self, default: str) -> Path:
        explicit = self.section('output').get('dir')
        return Path(explicit) if explicit else Path(default) / self.name

    def build_scheme(self) -> NLREScheme:
        return build_scheme(self.section('scheme'))

    def space_for(self, scheme: NLREScheme) -> FockSpace:
        cutoff = self.section('cutoff')
        if cutoff.get('policy', 'auto') == 'explicit':
            return FockSpace(int(cutoff['value']))
        return FockSpace(auto_cutoff(scheme, width_factor=AUTO_WIDTH))

    def ion_config(self) -> IonConfig:
        return IonConfig.from_dict(_to_angular(self.section('ion'), ION_FREQUENCIES))

    def cqed_config(self) -> CqedConfig:
        data = _to_angular(self.section('cqed'), CQED_FREQUENCIES)
        if 'bias' in data and data['bias'] is not None:
            data['bias'] = tuple(data['bias'])
        return CqedConfig.from_dict(data)

    def with_override(self, axis: str, value: Any) -> 'ScenarioConfig':
        """Copy with `section.key` replaced, re-validated."""
        document = set_path(self.document, axis, value)
        scenario = document.setdefault('scenario', {})
        scenario['name'] = f"{self.name}__{axis.replace('.', '-')}={value}"
        return validate_document(document, self.source)


def build_scheme(section: Dict[str, Any]) -> NLREScheme:
    kind = section.get('kind', 'linear')
    kappa = float(section.get('kappa_eff', 1.0))
    try:
        if kind == 'standard_cat':
            scheme = standard_cat_scheme(float(section['alpha']), int(section['d']), kappa_eff=kappa)
        elif kind == 'linear':
            scheme = linear_scheme(int(section['r']), int(section['l']), float(section['k_star']),
                                   float(section['h_star']),
                                   slope_f=section.get('slope_f'), slope_g=section.get('slope_g'),
                                   theta_f=section.get('theta_f'), theta_g=section.get('theta_g'),
                                   kappa_eff=kappa)
        elif kind == 'profiles':
            scheme = NLREScheme(r=int(section['r']), l=int(section['l']),
                                f_profile=profile_from_dict(section['f']),
                                g_profile=profile_from_dict(section['g']), kappa_eff=kappa)
        else:
            raise ConfigValidationError(f"[scheme] kind must be one of {SCHEME_KINDS}, got '{kind}'")
    except KeyError as exc:
        raise ConfigValidationError(f"[scheme] missing key {exc} for kind '{kind}'") from exc
    except TypeError as exc:
        raise ConfigValidationError(f"[scheme] incomplete '{kind}' parameters: {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, ConfigValidationError):
            raise
        raise ConfigValidationError(f"[scheme] {exc}") from exc
    if 'phase_f' in section or 'phase_g' in section:
        scheme = NLREScheme(r=scheme.r, l=scheme.l, f_profile=scheme.f_profile, g_profile=scheme.g_profile,
                            kappa_eff=scheme.kappa_eff, phase_f=float(section.get('phase_f', 0.0)),
                            phase_g=float(section.get('phase_g', 0.0)))
    return scheme


def set_path(document: Dict[str, Any], axis: str, value: Any) -> Dict[str, Any]:
    """Copy of the document with `section.key` (or `section.table.key` into an inline table) set."""
    parts = axis.split('.')
    if len(parts) < 2 or not all(parts):
        raise ConfigValidationError(f"sweep axis must look like 'section.key', got '{axis}'")
    out = copy.deepcopy(document)
    node = out.setdefault(parts[0], {})
    for part in parts[1:-1]:
        node = node.get(part)
        if not isinstance(node, dict):
            raise ConfigValidationError(f"sweep axis '{axis}': '{part}' is not a table", {'axis': axis})
    node[parts[-1]] = value
    return out


def _validate_noise(section: str, entries: list) -> None:
    for entry in entries:
        if not isinstance(entry, dict):
            raise ConfigValidationError(f"[{section}] noise entries must be tables with kind and rate")
        unknown = set(entry) - set(NOISE_KEYS)
        missing = set(NOISE_KEYS) - set(entry)
        if unknown or missing:
            raise ConfigValidationError(f"[{section}] noise entry {entry} needs exactly kind and rate")
        _check_value(section, 'rate', entry['rate'], float)
        if entry['kind'] not in MODE_NOISE_KINDS:
            raise ConfigValidationError(f"[{section}] noise kind must be one of {MODE_NOISE_KINDS}, got {entry['kind']!r}")


def validate_document(document: Dict[str, Any], source: Optional[str] = None) -> ScenarioConfig:
    """Schema check, then construction of every parameter object; no heavy numerics."""
    if not isinstance(document, dict):
        raise ConfigValidationError("scenario document must be a table")
    scenario = document.get('scenario')
    if not isinstance(scenario, dict) or 'analysis' not in scenario:
        raise ConfigValidationError("missing [scenario] section with an 'analysis' key")
    analysis = scenario['analysis']
    if analysis not in ANALYSES:
        raise ConfigValidationError(f"unknown analysis '{analysis}'; expected one of {ANALYSES}")

    allowed = dict(COMMON_SECTIONS)
    allowed.update(ANALYSIS_SECTIONS[analysis])
    if analysis in SCHEME_ANALYSES:
        allowed['scheme'] = SCHEME_SECTION
        allowed['cutoff'] = CUTOFF_SECTION
    if 'ion' in allowed:
        allowed['ion'] = _dataclass_schema(IonConfig)
    if 'cqed' in allowed:
        allowed['cqed'] = _dataclass_schema(CqedConfig)

    unknown_sections = set(document) - set(allowed)
    if unknown_sections:
        raise ConfigValidationError(f"unknown sections for '{analysis}': {sorted(unknown_sections)}")
    for name, body in document.items():
        if not isinstance(body, dict):
            raise ConfigValidationError(f"[{name}] must be a table")
        schema = allowed[name]
        unknown = set(body) - set(schema)
        if unknown:
            raise ConfigValidationError(f"[{name}] unknown keys {sorted(unknown)}", {'section': name})
        for key, value in body.items():
            _check_value(name, key, value, schema[key])
            if key == 'noise' and isinstance(value, list):
                _validate_noise(name, value)

    config = ScenarioConfig(analysis=analysis, name=str(scenario.get('name', analysis)),
                            document=document, source=source, seed=int(scenario.get('seed', 0)))

    if analysis in SCHEME_ANALYSES:
        if 'scheme' not in document:
            raise ConfigValidationError(f"analysis '{analysis}' needs a [scheme] section")
        config.build_scheme()
        cutoff = config.section('cutoff')
        policy = cutoff.get('policy', 'auto')
        if policy not in CUTOFF_POLICIES:
            raise ConfigValidationError(f"[cutoff] policy must be one of {CUTOFF_POLICIES}")
        if policy == 'explicit' and int(cutoff.get('value', 0)) < 2:
            raise ConfigValidationError("[cutoff] explicit policy needs value ≥ 2")
    if analysis == 'ion':
        config.ion_config()
    if analysis in ('cqed', 'rwa-validate'):
        config.cqed_config()
    logger.info(f"validated scenario '{config.name}' ({analysis}), hash {config.config_hash}")
    return config


def parse_text(text: str, suffix: str) -> Dict[str, Any]:
    try:
        if suffix == '.json':
            return json.loads(text)
        return tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigValidationError(f"could not parse scenario file: {exc}") from exc


def load_config(path: str) -> ScenarioConfig:
    """Read and validate a .toml (default) or .json scenario file."""
    target = Path(path)
    try:
        text = target.read_text(encoding='utf-8')
    except OSError as exc:
        raise ConfigValidationError(f"cannot read scenario file {path}: {exc}") from exc
    return validate_document(parse_text(text, target.suffix.lower()), str(target))
