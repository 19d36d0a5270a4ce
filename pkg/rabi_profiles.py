#!/usr/bin/env python3
"""
Rabi-Frequency Profiles
Scalar process strengths f̃(k), g̃(k), their crossing points and the convergence test
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.special import gammaln, jv, jvp

from fock_core import displacement_element

logger = logging.getLogger(__name__)

DIRECTIONS = ('rising', 'falling')


def _finish(values, k):
    return float(values) if np.ndim(k) == 0 else values


def _clamp(values: np.ndarray, label: str) -> np.ndarray:
    """Profiles are magnitudes; negative lobes past a zero are cut to 0."""
    if np.any(values < 0):
        logger.warning(f"{label}: negative values past a zero clamped to 0")
        values = np.where(values < 0, 0.0, values)
    return values


@dataclass(frozen=True)
class Constant:
    value: float
    kind: str = field(default='constant', init=False)

    def evaluate(self, k):
        k = np.asarray(k, dtype=float)
        return _finish(np.full(k.shape, float(self.value)), k)

    def derivative(self, k):
        return _finish(np.zeros(np.shape(k)), k)


@dataclass(frozen=True)
class LinearCrossing:
    """h* ± s (k − k*), clamped at zero."""
    k_star: float
    h_star: float
    slope: float
    direction: str
    kind: str = field(default='linear', init=False)

    def __post_init__(self):
        if self.h_star <= 0:
            raise ValueError(f"h* must be positive, got {self.h_star}")
        if self.slope < 0:
            raise ValueError(f"slope must be non-negative, got {self.slope}")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")

    @property
    def _sign(self) -> float:
        return 1.0 if self.direction == 'rising' else -1.0

    def evaluate(self, k):
        k = np.asarray(k, dtype=float)
        return _finish(np.maximum(self.h_star + self._sign * self.slope * (k - self.k_star), 0.0), k)

    def derivative(self, k):
        k = np.asarray(k, dtype=float)
        active = self.h_star + self._sign * self.slope * (k - self.k_star) > 0
        return _finish(np.where(active, self._sign * self.slope, 0.0), k)


@dataclass(frozen=True)
class Ladder:
    """scale·√((k+1)(k+2)…(k+order)), the lowering strength of â^order."""
    order: int
    scale: float = 1.0
    kind: str = field(default='ladder', init=False)

    def evaluate(self, k):
        k = np.asarray(k, dtype=float)
        log_val = 0.5 * (gammaln(k + self.order + 1) - gammaln(k + 1))
        return _finish(self.scale * np.exp(log_val), k)

    def derivative(self, k):
        k = np.asarray(k, dtype=float)
        harmonic = sum(1.0 / (k + j) for j in range(1, self.order + 1))
        return _finish(0.5 * np.asarray(self.evaluate(k)) * harmonic, k)


class _SampledProfile:
    """Integer samples of an exact form, monotone cubic in between."""

    def _exact(self, k_int: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _samples(self, k_max: int) -> Tuple[np.ndarray, np.ndarray]:
        ks = np.arange(0, k_max + 2)
        return ks, _clamp(self._exact(ks), type(self).__name__)

    def evaluate(self, k):
        k = np.asarray(k, dtype=float)
        if np.any(k < 0):
            raise ValueError("Fock index must be non-negative")
        if k.size and np.all(k == np.floor(k)):
            return _finish(_clamp(self._exact(k.astype(int)), type(self).__name__), k)
        ks, vals = self._samples(int(np.ceil(k.max())) if k.size else 0)
        return _finish(PchipInterpolator(ks, vals)(k), k)

    def derivative(self, k):
        k = np.asarray(k, dtype=float)
        ks, vals = self._samples(int(np.ceil(k.max())) + 1 if k.size else 1)
        return _finish(PchipInterpolator(ks, vals).derivative()(k), k)


@dataclass(frozen=True)
class IonLaguerre(_SampledProfile):
    """strength·⟨k+order|e^{iη(a+a†)}|k⟩ magnitude, exact Laguerre form."""
    order: int
    eta: float
    strength: float = 1.0
    kind: str = field(default='ion_laguerre', init=False)

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError(f"Lamb-Dicke parameter must be positive, got {self.eta}")

    def _exact(self, k_int):
        return self.strength * np.asarray(displacement_element(k_int, abs(self.order), self.eta))


@dataclass(frozen=True)
class IonBessel:
    """strength·J_order(2η√(k + (order+1)/2))."""
    order: int
    eta: float
    strength: float = 1.0
    kind: str = field(default='ion_bessel', init=False)

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError(f"Lamb-Dicke parameter must be positive, got {self.eta}")

    def _arg(self, k):
        return 2.0 * self.eta * np.sqrt(k + (abs(self.order) + 1) / 2.0)

    def evaluate(self, k):
        k = np.asarray(k, dtype=float)
        return _finish(_clamp(self.strength * jv(abs(self.order), self._arg(k)), 'IonBessel'), k)

    def derivative(self, k):
        k = np.asarray(k, dtype=float)
        x = self._arg(k)
        slope = self.strength * jvp(abs(self.order), x) * 2.0 * self.eta * 0.5 / np.sqrt(k + (abs(self.order) + 1) / 2.0)
        return _finish(np.where(jv(abs(self.order), x) > 0, slope, 0.0), k)


def ats_strength(e_j: float, phi_c: float, eps: float) -> float:
    """Ω = ½ E_J φ_c e^{−φ_c²/2} ε."""
    return 0.5 * e_j * phi_c * np.exp(-0.5 * phi_c ** 2) * eps


@dataclass(frozen=True)
class ATS(_SampledProfile):
    """Ω·f(k, order, φ_a) with Ω from the junction energy and drive amplitude."""
    order: int
    phi_a: float
    e_j: float
    phi_c: float
    eps: float
    kind: str = field(default='ats', init=False)

    @property
    def strength(self) -> float:
        return ats_strength(self.e_j, self.phi_c, self.eps)

    def _exact(self, k_int):
        return self.strength * np.asarray(displacement_element(k_int, abs(self.order), self.phi_a))


@dataclass(frozen=True)
class Tabulated:
    values: Tuple[float, ...]
    kind: str = field(default='tabulated', init=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.size == 0 or not np.all(np.isfinite(vals)):
            raise ValueError("tabulated profile needs finite values")
        object.__setattr__(self, 'values', tuple(float(v) for v in vals))

    def evaluate(self, k):
        k = np.asarray(k, dtype=float)
        if np.any(k > len(self.values) - 1) or np.any(k < 0):
            raise ValueError(f"tabulated profile defined on k ∈ [0, {len(self.values) - 1}]")
        vals = np.abs(np.asarray(self.values))
        return _finish(np.interp(k, np.arange(len(vals)), vals), k)

    def derivative(self, k):
        k = np.asarray(k, dtype=float)
        return _finish((np.asarray(self.evaluate(np.minimum(k + 1, len(self.values) - 1)))
                        - np.asarray(self.evaluate(np.maximum(k - 1, 0)))) / 2.0, k)


RabiProfileSpec = Union[Constant, LinearCrossing, Ladder, IonLaguerre, IonBessel, ATS, Tabulated]

PROFILE_KINDS = {
    'constant': Constant,
    'linear': LinearCrossing,
    'ladder': Ladder,
    'ion_laguerre': IonLaguerre,
    'ion_bessel': IonBessel,
    'ats': ATS,
    'tabulated': Tabulated,
}


def eval_profile(spec: RabiProfileSpec, k):
    """f̃(k) or g̃(k) for a profile; never negative."""
    if np.any(np.asarray(k) < 0):
        raise ValueError("Fock index must be non-negative")
    return spec.evaluate(k)


def profile_to_dict(spec: RabiProfileSpec) -> Dict[str, Any]:
    data = asdict(spec)
    if 'values' in data:
        data['values'] = list(data['values'])
    return data


def profile_from_dict(data: Dict[str, Any]) -> RabiProfileSpec:
    data = dict(data)
    kind = data.pop('kind', None)
    if kind == 'linear_angle':
        return linear_profile_from_angles(**data)
    if kind not in PROFILE_KINDS:
        raise ValueError(f"unknown profile kind '{kind}'")
    cls = PROFILE_KINDS[kind]
    if kind == 'tabulated':
        data['values'] = tuple(data.get('values', ()))
    try:
        return cls(**data)
    except TypeError as exc:
        raise ValueError(f"bad parameters for profile '{kind}': {exc}") from exc


@dataclass(frozen=True)
class NLREScheme:
    """Jump operator K = a†^r f(n) − g(n) a^l with effective rate κ_eff."""
    r: int
    l: int
    f_profile: RabiProfileSpec
    g_profile: RabiProfileSpec
    kappa_eff: float = 1.0
    phase_f: float = 0.0
    phase_g: float = 0.0

    def __post_init__(self):
        if self.r < 0 or self.l < 0 or self.r + self.l < 1:
            raise ValueError(f"orders need r, l ≥ 0 and r + l ≥ 1, got ({self.r}, {self.l})")
        if self.kappa_eff <= 0:
            raise ValueError(f"kappa_eff must be positive, got {self.kappa_eff}")

    @property
    def d(self) -> int:
        return self.r + self.l

    def f(self, k):
        return eval_profile(self.f_profile, k)

    def g(self, k):
        return eval_profile(self.g_profile, k)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'r': self.r, 'l': self.l, 'kappa_eff': self.kappa_eff,
            'phase_f': self.phase_f, 'phase_g': self.phase_g,
            'f': profile_to_dict(self.f_profile), 'g': profile_to_dict(self.g_profile),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'NLREScheme':
        return cls(r=int(data['r']), l=int(data['l']),
                   f_profile=profile_from_dict(data['f']),
                   g_profile=profile_from_dict(data['g']),
                   kappa_eff=float(data.get('kappa_eff', 1.0)),
                   phase_f=float(data.get('phase_f', 0.0)),
                   phase_g=float(data.get('phase_g', 0.0)))


@dataclass(frozen=True)
class Crossing:
    k_star: float
    h_star: float
    slope_f: float
    slope_g: float
    gain_switch: bool


def _g_offset(scheme: NLREScheme, alignment: str) -> int:
    if alignment == 'recurrence':
        return scheme.r
    if alignment == 'source':
        return scheme.r - scheme.l
    raise ValueError(f"alignment must be 'recurrence' or 'source', got '{alignment}'")


def _aligned_g(scheme: NLREScheme, k, offset: int):
    idx = np.asarray(k, dtype=float) + offset
    out = np.zeros(idx.shape)
    valid = idx >= 0
    if np.any(valid):
        out[valid] = np.asarray(scheme.g(idx[valid]))
    return out


def find_crossing(scheme: NLREScheme, search_range: Sequence[float] = (0, 100),
                  alignment: str = 'recurrence') -> List[Crossing]:
    """All sign changes of |f̃(k)| − |g̃(k+r)| in the range, refined to Δk < 1e−6."""
    k_min, k_max = search_range
    if not k_max > k_min >= 0:
        raise ValueError(f"need k_max > k_min ≥ 0, got {search_range}")
    offset = _g_offset(scheme, alignment)

    def gap(k):
        return float(np.asarray(scheme.f(k)) - _aligned_g(scheme, np.asarray([k]), offset)[0])

    ks = np.arange(int(np.ceil(k_min)), int(np.floor(k_max)) + 1, dtype=float)
    if ks.size < 2:
        ks = np.array([k_min, k_max], dtype=float)
    f_vals = np.asarray(scheme.f(ks), dtype=float)
    g_vals = _aligned_g(scheme, ks, offset)
    scale = max(np.max(np.abs(f_vals)), np.max(np.abs(g_vals)), 1e-300)
    diff = f_vals - g_vals
    signs = np.where(np.abs(diff) <= 1e-14 * scale, 0, np.sign(diff))

    crossings = []
    previous = None
    for idx, sgn in enumerate(signs):
        if sgn == 0:
            continue
        if previous is not None and signs[previous] != sgn:
            lo, hi = ks[previous], ks[idx]
            k_star = brentq(gap, lo, hi, xtol=1e-9, rtol=1e-14, maxiter=200)
            h_star = float(np.asarray(scheme.f(k_star)))
            if h_star <= 0:
                previous = idx
                continue
            slope_f = float(np.asarray(scheme.f_profile.derivative(k_star)))
            slope_g = float(np.asarray(scheme.g_profile.derivative(k_star + offset))) if k_star + offset >= 0 else 0.0
            crossings.append(Crossing(k_star=k_star, h_star=h_star, slope_f=slope_f,
                                      slope_g=slope_g, gain_switch=bool(signs[previous] > 0 > sgn)))
        previous = idx
    logger.info(f"find_crossing: {len(crossings)} crossing(s) in [{k_min}, {k_max}] ({alignment})")
    return crossings


def stabilizing_crossing(scheme: NLREScheme, search_range: Sequence[float] = (0, 100),
                         alignment: str = 'recurrence') -> Optional[Crossing]:
    """First gain-switch crossing, or None."""
    for crossing in find_crossing(scheme, search_range, alignment):
        if crossing.gain_switch:
            return crossing
    return None


def check_convergence(scheme: NLREScheme, horizon: int) -> str:
    """'converges', 'diverges' or 'undetermined' from |f̃(k)/g̃(k+r)| on [horizon−20, horizon]."""
    ks = np.arange(max(0, horizon - 20), horizon + 1, dtype=float)
    f_vals = np.abs(np.asarray(scheme.f(ks), dtype=float))
    g_vals = np.abs(np.asarray(scheme.g(ks + scheme.r), dtype=float))
    if np.any(g_vals == 0):
        return 'undetermined'
    ratios = f_vals / g_vals
    if ratios.max() < 1 - 1e-6:
        return 'converges'
    if ratios.min() > 1 + 1e-6:
        return 'diverges'
    logger.info("check_convergence: ratio tail is ambiguous; restrict the cutoff below the "
                "first zero of g̃ past k*")
    return 'undetermined'


def linear_profile_from_angles(k_star: float, h_star: float, theta: float, direction: str,
                               shift: int = 0) -> LinearCrossing:
    """LinearCrossing through (k*+shift, h*) with slope cot θ (θ from the vertical)."""
    if not 0 < theta < np.pi / 2:
        raise ValueError(f"angle must lie in (0, π/2), got {theta}")
    return LinearCrossing(k_star=k_star + shift, h_star=h_star, slope=1.0 / np.tan(theta),
                          direction=direction)


def linear_scheme(r: int, l: int, k_star: float, h_star: float,
                  slope_f: Optional[float] = None, slope_g: Optional[float] = None,
                  theta_f: Optional[float] = None, theta_g: Optional[float] = None,
                  kappa_eff: float = 1.0) -> NLREScheme:
    """Falling f̃ and rising g̃ meeting at height h*, with g̃ anchored at k* + r."""
    if theta_f is not None:
        f_prof = linear_profile_from_angles(k_star, h_star, theta_f, 'falling')
    else:
        f_prof = LinearCrossing(k_star, h_star, float(slope_f), 'falling')
    if theta_g is not None:
        g_prof = linear_profile_from_angles(k_star, h_star, theta_g, 'rising', shift=r)
    else:
        g_prof = LinearCrossing(k_star + r, h_star, float(slope_g), 'rising')
    return NLREScheme(r=r, l=l, f_profile=f_prof, g_profile=g_prof, kappa_eff=kappa_eff)


def standard_cat_scheme(alpha: float, d: int, kappa_eff: float = 1.0) -> NLREScheme:
    """K = α^d − a^d, i.e. a^d − α^d up to a global sign."""
    return NLREScheme(r=0, l=d, f_profile=Constant(float(alpha) ** d),
                      g_profile=Ladder(order=d), kappa_eff=kappa_eff)


def nonlinear_coherent_parameter(scheme: NLREScheme, k):
    """β(k) = f̃(k)√((k+1)^(d))/g̃(k+r): the number-dependent amplitude of the
    rewritten jump operator a†^r·(g/…)·[β(n) − a^d]. Constant α^d for a standard cat."""
    k = np.asarray(k, dtype=float)
    rising = np.exp(0.5 * (gammaln(k + scheme.d + 1) - gammaln(k + 1)))
    with np.errstate(divide='ignore', invalid='ignore'):
        beta = np.asarray(scheme.f(k)) * rising / np.asarray(scheme.g(k + scheme.r))
    return _finish(beta, k)
