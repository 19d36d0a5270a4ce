#!/usr/bin/env python3
"""
Dark-State Manifold
Recurrence-built dark states, their boson statistics and the CMB / CMP closed forms
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
from scipy.special import gammaln, logsumexp

from errors import NoCrossingError, TruncationError
from fock_core import DensityOperator, FockSpace, displacement_element
from rabi_profiles import NLREScheme, check_convergence, stabilizing_crossing, standard_cat_scheme

logger = logging.getLogger(__name__)

TRUE_DARK = 'true_dark'
EXPONENTIALLY_GOOD = 'exponentially_good'

# Levels at the top of the space counted as tail mass.
TAIL_LEVELS = 5
PROBABILITY_FLOOR = 1e-300


@dataclass(frozen=True)
class BosonDistribution:
    """Photon/phonon-number probabilities P[n = k]."""
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("distribution must be a non-empty 1-D array")
        if np.any(p < -1e-14):
            raise ValueError("distribution has negative probabilities")
        total = p.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"distribution sums to {total:.12f}, not 1")
        object.__setattr__(self, 'probabilities', np.clip(p, 0.0, None) / total)

    @classmethod
    def from_state(cls, psi: np.ndarray) -> 'BosonDistribution':
        weights = np.abs(np.asarray(psi)) ** 2
        return cls(weights / weights.sum())

    @classmethod
    def from_density(cls, rho: np.ndarray) -> 'BosonDistribution':
        weights = np.clip(np.real(np.diag(np.asarray(rho))), 0.0, None)
        return cls(weights / weights.sum())

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.probabilities.size)

    @property
    def mean(self) -> float:
        return float(np.dot(self.support, self.probabilities))

    @property
    def variance(self) -> float:
        return float(np.dot((self.support - self.mean) ** 2, self.probabilities))

    @property
    def mandel_q(self) -> float:
        return self.variance / self.mean - 1.0

    @property
    def skewness(self) -> float:
        var = self.variance
        if var <= 0:
            return 0.0
        return float(np.dot((self.support - self.mean) ** 3, self.probabilities) / var ** 1.5)

    def padded(self, size: int) -> np.ndarray:
        out = np.zeros(max(size, self.probabilities.size))
        out[:self.probabilities.size] = self.probabilities
        return out

    def total_variation(self, other: 'BosonDistribution') -> float:
        size = max(self.probabilities.size, other.probabilities.size)
        return 0.5 * float(np.abs(self.padded(size) - other.padded(size)).sum())


@dataclass(frozen=True)
class DarkState:
    mu: int
    xi: np.ndarray
    truth: str
    norm_defect: float
    leakage_proxy: float = 0.0

    @property
    def distribution(self) -> BosonDistribution:
        return BosonDistribution.from_state(self.xi)


def _chain_log_amplitudes(scheme: NLREScheme, mu: int, cutoff: int) -> Tuple[np.ndarray, np.ndarray]:
    """Log-magnitudes and phases of one residue class; −inf marks zeros."""
    ks = np.arange(mu, cutoff, scheme.d)
    log_mag = np.full(ks.size, -np.inf)
    phase = np.zeros(ks.size)
    if ks.size == 0:
        return log_mag, phase
    f_vals = np.abs(np.asarray(scheme.f(ks), dtype=float))
    g_vals = np.abs(np.asarray(scheme.g(ks + scheme.r), dtype=float))
    step_phase = scheme.phase_f - scheme.phase_g

    log_mag[0] = 0.0
    for idx in range(ks.size - 1):
        if not np.isfinite(log_mag[idx]):
            break
        f_k, g_k = f_vals[idx], g_vals[idx]
        if g_k == 0.0:
            if f_k == 0.0:
                logger.debug(f"residue {mu}: chain ends at k={ks[idx]} (f̃ = g̃ = 0)")
                break
            # g̃(k+r)ξ_{k+d} = f̃(k)ξ_k forces everything up to k to vanish
            log_mag[:idx + 1] = -np.inf
            log_mag[idx + 1] = 0.0
            phase[idx + 1] = 0.0
            continue
        if f_k == 0.0:
            break
        log_mag[idx + 1] = log_mag[idx] + np.log(f_k) - np.log(g_k)
        phase[idx + 1] = phase[idx] + step_phase
    return log_mag, phase


def _leakage(scheme: NLREScheme, mu: int, xi: np.ndarray) -> float:
    """g̃(μ−l)|ξ_μ|: the residual ‖K Ξ_μ‖ of a class that starts inside the gain gap."""
    if mu < scheme.l:
        return 0.0
    return float(abs(np.asarray(scheme.g(mu - scheme.l))) * abs(xi[mu]))


def solve_recurrence(scheme: NLREScheme, space: FockSpace,
                     truncation_tol: float = 1e-8) -> List[DarkState]:
    """One normalized state per residue class μ ∈ [0, d) from
    ξ_{k+d} = f̃(k)e^{iφ_f} / (g̃(k+r)e^{iφ_g}) · ξ_k."""
    N = space.cutoff
    status = check_convergence(scheme, N - 1)
    if status != 'converges':
        raise NoCrossingError(f"recurrence tail {status} at cutoff {N}",
                              {'cutoff': N, 'status': status})

    states = []
    for mu in range(scheme.d):
        log_mag, phase = _chain_log_amplitudes(scheme, mu, N)
        xi = np.zeros(N, dtype=complex)
        if mu < N and np.any(np.isfinite(log_mag)):
            finite = np.isfinite(log_mag)
            log_norm = 0.5 * logsumexp(2.0 * log_mag[finite])
            amps = np.zeros(log_mag.size, dtype=complex)
            amps[finite] = np.exp(log_mag[finite] - log_norm + 1j * phase[finite])
            xi[mu::scheme.d] = amps
        else:
            logger.warning(f"residue {mu}: no support below cutoff {N}")
            continue

        populations = np.abs(xi) ** 2
        norm_defect = float(populations[max(N - TAIL_LEVELS, 0):].sum())
        if norm_defect > truncation_tol:
            raise TruncationError(
                f"residue {mu}: tail mass {norm_defect:.2e} above {truncation_tol:.0e}; raise the cutoff",
                {'mu': mu, 'cutoff': N, 'norm_defect': norm_defect})
        truth = TRUE_DARK if mu < scheme.l else EXPONENTIALLY_GOOD
        states.append(DarkState(mu=mu, xi=xi, truth=truth, norm_defect=norm_defect,
                                leakage_proxy=_leakage(scheme, mu, xi)))
    logger.info(f"solve_recurrence: {len(states)} state(s) for (r,l)=({scheme.r},{scheme.l}) at N={N}")
    return states


def classify_states(scheme: NLREScheme, states: Sequence[DarkState]) -> List[DarkState]:
    """Residues μ < l are true dark states; the r others are exponentially good."""
    classified = []
    for state in states:
        truth = TRUE_DARK if state.mu < scheme.l else EXPONENTIALLY_GOOD
        classified.append(replace(state, truth=truth, leakage_proxy=_leakage(scheme, state.mu, state.xi)))
    n_true = sum(s.truth == TRUE_DARK for s in classified)
    logger.info(f"classify_states: {n_true} true dark, {len(classified) - n_true} exponentially good")
    return classified


def manifold_distribution(states: Sequence[DarkState]) -> BosonDistribution:
    """Equal-weight mixture of the residue-class distributions."""
    if not states:
        raise ValueError("no dark states given")
    weights = np.mean([np.abs(s.xi) ** 2 for s in states], axis=0)
    return BosonDistribution(weights / weights.sum())


# ---------------------------------------------------------------------------
# Conway–Maxwell–Binomial statistics of linear profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CMBParams:
    """P(x) ∝ C(m, x)² θ^x with x(k) = (k − a)/d − 1."""
    m: float
    theta: float
    d: int
    a: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.m) or self.m <= -1:
            raise ValueError(f"m must be finite and > −1, got {self.m}")
        if not self.theta > 0 or not np.isfinite(self.theta):
            raise ValueError(f"θ must be positive and finite, got {self.theta}")
        if self.d < 1:
            raise ValueError(f"d must be ≥ 1, got {self.d}")

    @property
    def p(self) -> float:
        return self.theta / (1.0 + self.theta)

    def x_of(self, k):
        return (np.asarray(k, dtype=float) - self.a) / self.d - 1.0

    def k_of(self, x):
        return self.d * (np.asarray(x, dtype=float) + 1.0) + self.a

    @property
    def is_integer_m(self) -> bool:
        return abs(self.m - round(self.m)) < 1e-12


def cmb_params_from_linear(k_star: float, h_star: float, s_f: float, s_g: float, d: int) -> CMBParams:
    """Map a linear crossing (slope magnitudes s_f, s_g) to CMB parameters."""
    s_f, s_g = abs(s_f), abs(s_g)
    if s_f == 0 or s_g == 0:
        raise ValueError("CMB needs non-zero slopes; use the CMP limit for s_f → 0")
    return CMBParams(m=(h_star / s_f + h_star / s_g) / d - 1.0,
                     theta=(s_f / s_g) ** 2, d=d, a=k_star - h_star / s_g)


def cmb_params_from_scheme(scheme: NLREScheme, search_range: Sequence[float] = (0, 200)) -> CMBParams:
    crossing = stabilizing_crossing(scheme, search_range)
    if crossing is None:
        raise NoCrossingError("scheme has no stabilizing crossing", {'search_range': list(search_range)})
    return cmb_params_from_linear(crossing.k_star, crossing.h_star, crossing.slope_f,
                                  crossing.slope_g, scheme.d)


def _cmb_log_weight(params: CMBParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x * np.log(params.theta) - 2.0 * (gammaln(x + 1.0) + gammaln(params.m - x + 1.0))


def _class_support(params: CMBParams, mu: int) -> np.ndarray:
    """Fock indices k ≡ μ (mod d), k ≥ 0, with −1 < x(k) < m + 1."""
    k_hi = int(np.floor(params.k_of(params.m + 1.0)))
    ks = np.arange(mu, max(k_hi, mu) + 1, params.d)
    x = params.x_of(ks)
    return ks[(x > -1.0) & (x < params.m + 1.0)]


def cmb_class_distribution(params: CMBParams, mu: int, cutoff: Optional[int] = None) -> np.ndarray:
    """CMB probabilities over Fock index for residue class μ, normalized by summation."""
    ks = _class_support(params, mu)
    if ks.size == 0:
        raise ValueError(f"CMB residue class {mu} has empty support")
    log_w = _cmb_log_weight(params, params.x_of(ks))
    probs = np.exp(log_w - logsumexp(log_w))
    size = int(ks.max()) + 1 if cutoff is None else cutoff
    out = np.zeros(size)
    keep = ks < size
    out[ks[keep]] = probs[keep]
    return out


def cmb_pdf(params: CMBParams, k: int) -> float:
    """P[n = k] within the residue class of k."""
    if k < 0:
        raise ValueError("Fock index must be non-negative")
    probs = cmb_class_distribution(params, k % params.d)
    return float(probs[k]) if k < probs.size else 0.0


def _log_rgamma_sq(z: float) -> float:
    """log(1/Γ(z)²), −inf at the poles."""
    value = mpmath.rgamma(z)
    return -np.inf if value == 0 else 2.0 * float(mpmath.log(abs(value)))


def _integer_lattice_terms(params: CMBParams) -> Tuple[np.ndarray, np.ndarray]:
    """x = 0, 1, 2, … weights for the ₂F₁ moment oracle."""
    if params.is_integer_m:
        x = np.arange(0, int(round(params.m)) + 1, dtype=float)
    elif params.theta < 1:
        extra = int(np.ceil(80.0 / -np.log(params.theta)))
        x = np.arange(0, int(np.ceil(params.m)) + 1 + extra, dtype=float)
    else:
        raise ValueError(f"CMB series diverges for non-integer m={params.m} and θ={params.theta} ≥ 1")
    log_w = (x * np.log(params.theta) - 2.0 * gammaln(x + 1.0)
             + np.array([_log_rgamma_sq(params.m - xi + 1.0) for xi in x]))
    return x, log_w


def cmb_moments_direct(params: CMBParams) -> Tuple[float, float]:
    """(E[X], Var X) on the integer lattice by direct summation."""
    x, log_w = _integer_lattice_terms(params)
    w = np.exp(log_w - logsumexp(log_w))
    mean = float(np.dot(x, w))
    return mean, float(np.dot((x - mean) ** 2, w))


def cmb_x_moments(params: CMBParams) -> Tuple[float, float]:
    """(E[X], Var X) from ₂F₁(−m,−m;1;θ) and its first two θ-derivatives."""
    if not params.is_integer_m and params.theta >= 1:
        raise ValueError(f"₂F₁ moments need integer m or θ < 1, got m={params.m}, θ={params.theta}")
    m, theta = mpmath.mpf(params.m), mpmath.mpf(params.theta)
    with mpmath.workdps(30):
        Z = mpmath.hyp2f1(-m, -m, 1, theta)
        F1 = mpmath.hyp2f1(1 - m, 1 - m, 2, theta)
        F2 = mpmath.hyp2f1(2 - m, 2 - m, 3, theta)
        mean = m ** 2 * theta * F1 / Z
        factorial2 = theta ** 2 * m ** 2 * (1 - m) ** 2 / 2 * F2 / Z
        var = factorial2 + mean - mean ** 2
    return float(mean), float(var)


def cmb_moments(params: CMBParams) -> Tuple[float, float]:
    """(⟨n⟩, ⟨(Δn)²⟩) through n = d(X + 1) + a."""
    mean_x, var_x = cmb_x_moments(params)
    return params.d * mean_x + params.a + params.d, params.d ** 2 * var_x


def mandel_q_from_cmb(params: CMBParams) -> float:
    mean, var = cmb_moments(params)
    return var / mean - 1.0


def cmb_normalization_3f2(params: CMBParams, mu: int, all_classes: bool = False) -> float:
    """Σ over the class of C-weights in closed form:
    θ^y/(Γ(y+1)Γ(m−y+1))² · ₃F₂(1, y−m, y−m; 1+y, 1+y; θ), y the first x of the class.
    With all_classes the result is multiplied by d, the smooth-distribution
    approximation of the sum over every residue class."""
    ks = _class_support(params, mu)
    if ks.size == 0:
        raise ValueError(f"CMB residue class {mu} has empty support")
    y = mpmath.mpf(float(params.x_of(ks[0])))
    m, theta = mpmath.mpf(params.m), mpmath.mpf(params.theta)
    with mpmath.workdps(30):
        lead = theta ** y * (mpmath.rgamma(y + 1) * mpmath.rgamma(m - y + 1)) ** 2
        total = lead * mpmath.hyp3f2(1, y - m, y - m, 1 + y, 1 + y, theta)
    return float(total) * (params.d if all_classes else 1)


def cmb_class_weight_sum(params: CMBParams, mu: int) -> float:
    """Direct-summation counterpart of cmb_normalization_3f2."""
    ks = _class_support(params, mu)
    return float(np.exp(logsumexp(_cmb_log_weight(params, params.x_of(ks)))))


# ---------------------------------------------------------------------------
# Conway–Maxwell–Poisson limits
# ---------------------------------------------------------------------------

def cmp_distribution(lam: float, x_max: Optional[int] = None) -> np.ndarray:
    """P(x) ∝ λ^x/(x!)² over x = 0 … x_max."""
    if not lam > 0:
        raise ValueError(f"λ must be positive, got {lam}")
    if x_max is None:
        root = np.sqrt(lam)
        x_max = int(root + 20.0 * lam ** 0.25 + 30)
    x = np.arange(0, x_max + 1, dtype=float)
    log_w = x * np.log(lam) - 2.0 * gammaln(x + 1.0)
    return np.exp(log_w - logsumexp(log_w))


def cmp_pdf(lam: float, x: int) -> float:
    if x < 0:
        return 0.0
    probs = cmp_distribution(lam, max(x, int(np.sqrt(lam) + 20.0 * lam ** 0.25 + 30)))
    return float(probs[x])


def cmp_reciprocal_pdf(lam: float, y: int, support: Optional[Tuple[int, int]] = None) -> float:
    """P(y) ∝ (y!)²/λ^y on a finite window; the series itself diverges."""
    if support is None:
        raise ValueError("reciprocal CMP diverges; a finite support (y_min, y_max) is required")
    y_min, y_max = int(support[0]), int(support[1])
    if y_min < 0 or y_max < y_min:
        raise ValueError(f"bad support {support}")
    if not lam > 0:
        raise ValueError(f"λ must be positive, got {lam}")
    if not y_min <= y <= y_max:
        return 0.0
    ys = np.arange(y_min, y_max + 1, dtype=float)
    log_w = 2.0 * gammaln(ys + 1.0) - ys * np.log(lam)
    return float(np.exp(log_w[y - y_min] - logsumexp(log_w)))


def cmp_params_from_cmb(params: CMBParams) -> float:
    """λ = m²p of the large-m limit."""
    return params.m ** 2 * params.p


def poisson_distribution(mean: float, size: int) -> np.ndarray:
    k = np.arange(size, dtype=float)
    if mean == 0:
        out = np.zeros(size)
        out[0] = 1.0
        return out
    log_p = -mean + k * np.log(mean) - gammaln(k + 1.0)
    return np.exp(log_p)


def poisson_parity_projection(mean: float, size: int, d: int, mu: int) -> np.ndarray:
    """Poisson law restricted to k ≡ μ (mod d) and renormalized."""
    probs = poisson_distribution(mean, size)
    mask = (np.arange(size) % d) == mu
    out = np.where(mask, probs, 0.0)
    return out / out.sum()


# ---------------------------------------------------------------------------
# Relative entropy
# ---------------------------------------------------------------------------

Distribution = Union[BosonDistribution, DensityOperator, np.ndarray]


def _classical_relative_entropy(p: np.ndarray, q: np.ndarray) -> float:
    size = max(p.size, q.size)
    p = np.pad(p, (0, size - p.size))
    q = np.pad(q, (0, size - q.size))
    active = p > PROBABILITY_FLOOR
    if np.any(q[active] < PROBABILITY_FLOOR):
        bad = np.flatnonzero(active & (q < PROBABILITY_FLOOR))
        raise ValueError(f"support violation: p > 0 where q = 0 at k = {bad[:5].tolist()}")
    value = float(np.sum(p[active] * (np.log(p[active]) - np.log(q[active]))))
    return max(value, 0.0)


def _quantum_relative_entropy(rho: np.ndarray, sigma: np.ndarray) -> float:
    p, _ = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    s, v = np.linalg.eigh(0.5 * (sigma + sigma.conj().T))
    null = s < 1e-12
    if np.any(null):
        leaked = float(np.real(np.trace(v[:, null].conj().T @ rho @ v[:, null])))
        if leaked > 1e-12:
            raise ValueError(f"support violation: weight {leaked:.2e} of ρ outside supp(σ)")
    log_sigma = (v * np.log(np.maximum(s, PROBABILITY_FLOOR))) @ v.conj().T
    p = p[p > 1e-15]
    value = float(np.sum(p * np.log(p)) - np.real(np.trace(rho @ log_sigma)))
    return max(value, 0.0) if value > -1e-10 else value


def relative_entropy(p: Distribution, q: Distribution) -> float:
    """S(p‖q) for two distributions or two density operators."""
    if isinstance(p, DensityOperator) or (isinstance(p, np.ndarray) and p.ndim == 2):
        rho = np.asarray(p.matrix if isinstance(p, DensityOperator) else p)
        sigma = np.asarray(q.matrix if isinstance(q, DensityOperator) else q)
        if rho.shape != sigma.shape:
            raise ValueError(f"shape mismatch {rho.shape} vs {sigma.shape}")
        return _quantum_relative_entropy(rho, sigma)
    p_arr = p.probabilities if isinstance(p, BosonDistribution) else np.asarray(p, dtype=float)
    q_arr = q.probabilities if isinstance(q, BosonDistribution) else np.asarray(q, dtype=float)
    return _classical_relative_entropy(p_arr, q_arr)


def standard_cat_cmp_approximation(alpha: float, d: int, size: int) -> np.ndarray:
    """CMP-limit distribution over k for K = a^d − α^d (s_f = 0)."""
    scheme = standard_cat_scheme(alpha, d)
    crossing = stabilizing_crossing(scheme, (0, max(100.0, 4.0 * alpha ** 2 + 50.0)))
    if crossing is None:
        raise NoCrossingError(f"no crossing for α={alpha}, d={d}")
    s_g = abs(crossing.slope_g)
    lam = (crossing.h_star / (d * s_g)) ** 2
    a = crossing.k_star - crossing.h_star / s_g
    k = np.arange(size, dtype=float)
    x = (k - a) / d - 1.0
    valid = x > -1.0
    log_w = np.full(size, -np.inf)
    log_w[valid] = x[valid] * np.log(lam) - 2.0 * gammaln(x[valid] + 1.0)
    return np.exp(log_w - logsumexp(log_w[valid]))


def standard_cat_entropy_sweep(d: int, alphas: Sequence[float]) -> List[float]:
    """S(CMP approximation ‖ Poisson(α²)) for each α."""
    values = []
    for alpha in alphas:
        size = int(alpha ** 2 + 12.0 * alpha + 40)
        approx = standard_cat_cmp_approximation(alpha, d, size)
        reference = poisson_distribution(alpha ** 2, size)
        values.append(relative_entropy(approx / approx.sum(), reference / reference.sum()))
        logger.debug(f"entropy sweep d={d} α={alpha}: S={values[-1]:.3e}")
    return values


# ---------------------------------------------------------------------------
# Nonlinear shifted Fock basis
# ---------------------------------------------------------------------------

def _displaced_fock(space: FockSpace, alpha: float, k: int) -> np.ndarray:
    """Columns ⟨m|D(α)|k⟩ from the untruncated real-argument kernel."""
    out = np.zeros(space.cutoff, dtype=complex)
    for m in range(space.cutoff):
        if m >= k:
            out[m] = displacement_element(k, m - k, alpha)
        else:
            out[m] = (-1) ** (k - m) * displacement_element(m, k - m, alpha)
    return out


@dataclass
class ShiftedFockBasis:
    alpha: float
    states: Dict[Tuple[int, str], np.ndarray] = field(default_factory=dict)
    norms: Dict[Tuple[int, str], float] = field(default_factory=dict)
    masked_mass: float = 0.0

    def ratio(self, l: int, k: int, sign: str = '+') -> float:
        """F_l(k) = N_k / N_{k−l}."""
        return self.norms[(k, sign)] / self.norms[(k - l, sign)]


def reshaping_weights(dist: BosonDistribution, alpha: float, size: int) -> Tuple[np.ndarray, float]:
    """R(n) = √(P(n)/Poisson(n|α²)); zero where the Poisson weight underflows."""
    p = dist.padded(size)[:size]
    k = np.arange(size, dtype=float)
    if alpha == 0:
        log_poisson = np.where(k == 0, 0.0, -np.inf)
    else:
        log_poisson = -alpha ** 2 + 2.0 * k * np.log(abs(alpha)) - gammaln(k + 1.0)
    underflow = log_poisson < np.log(PROBABILITY_FLOOR)
    masked = float(p[underflow & (p > 0)].sum())
    if masked > 0:
        logger.warning(f"reshaping: {masked:.2e} of the distribution masked where Poisson(α²) underflows")
    R = np.zeros(size)
    keep = (~underflow) & (p > 0)
    R[keep] = np.sqrt(p[keep]) * np.exp(-0.5 * log_poisson[keep])
    return R, masked


def shifted_fock_basis(dist: Optional[BosonDistribution], alpha: float, k_max: int, space: FockSpace,
                       orthogonalize: bool = False) -> ShiftedFockBasis:
    """|φ_{k,±}⟩ ∝ R(n)[D(α) ± (−1)^k D(−α)]|k⟩ for k = 0 … k_max; dist=None means R ≡ 1."""
    if k_max < 0 or k_max >= space.cutoff:
        raise ValueError(f"k_max must lie in [0, {space.cutoff - 1}]")
    if dist is None:
        R, masked = np.ones(space.cutoff), 0.0
    else:
        R, masked = reshaping_weights(dist, alpha, space.cutoff)
    basis = ShiftedFockBasis(alpha=float(alpha), masked_mass=masked)
    for k in range(k_max + 1):
        plus_shift = _displaced_fock(space, alpha, k)
        minus_shift = _displaced_fock(space, -alpha, k)
        for sign, s in (('+', 1.0), ('-', -1.0)):
            raw = R * (plus_shift + s * (-1) ** k * minus_shift)
            norm = float(np.linalg.norm(raw))
            basis.norms[(k, sign)] = norm
            basis.states[(k, sign)] = raw / norm if norm > 0 else raw
    if orthogonalize:
        for sign in ('+', '-'):
            keys = [(k, sign) for k in range(k_max + 1)]
            ortho = gram_schmidt([basis.states[key] for key in keys])
            for key, vec in zip(keys, ortho):
                basis.states[key] = vec
    return basis


def gram_schmidt(vectors: Sequence[np.ndarray], tol: float = 1e-12) -> List[np.ndarray]:
    """Modified Gram–Schmidt in the given order; dependent vectors come back as zeros."""
    basis: List[np.ndarray] = []
    out = []
    for vec in vectors:
        w = np.asarray(vec, dtype=complex).copy()
        for b in basis:
            w -= np.vdot(b, w) * b
        norm = np.linalg.norm(w)
        if norm < tol:
            logger.warning("gram_schmidt: linearly dependent vector dropped")
            out.append(np.zeros_like(w))
            continue
        w /= norm
        basis.append(w)
        out.append(w)
    return out


# ---------------------------------------------------------------------------
# Confinement rate
# ---------------------------------------------------------------------------

def confinement_rate_from_moments(kappa_eff: float, f_at_mean: float, variance: float,
                                  skew: Optional[float] = None) -> float:
    """4κ f̃(⟨n⟩)²/Var, times √(1 − Skew) when a skew is passed."""
    if variance <= 0:
        raise ValueError(f"variance must be positive, got {variance}")
    rate = 4.0 * kappa_eff * f_at_mean ** 2 / variance
    if skew is None:
        return rate
    if skew >= 1.0:
        logger.warning(f"skewness {skew:.3f} ≥ 1: skew correction skipped")
        return rate
    return rate * np.sqrt(1.0 - skew)


def predicted_confinement_rate(scheme: NLREScheme, space: Optional[FockSpace] = None,
                               skew_correction: bool = True) -> float:
    """Confinement rate of the manifold from the Ξ₀ statistics.

    The skew factor is used only when f̃ has a non-zero slope smaller in
    magnitude than g̃'s at the crossing; a constant f̃ keeps the plain rate.
    """
    if space is None:
        space = FockSpace(auto_cutoff(scheme))
    states = solve_recurrence(scheme, space)
    dist = states[0].distribution
    f_mean = float(np.asarray(scheme.f(dist.mean)))
    skew = None
    if skew_correction:
        crossing = stabilizing_crossing(scheme, (0, space.cutoff - 1))
        if crossing is not None and 0 < abs(crossing.slope_f) < abs(crossing.slope_g):
            skew = dist.skewness
    rate = confinement_rate_from_moments(scheme.kappa_eff, f_mean, dist.variance, skew)
    logger.info(f"predicted confinement rate {rate:.4g} (⟨n⟩={dist.mean:.3f}, Var={dist.variance:.3f})")
    return rate


def auto_cutoff(scheme: NLREScheme, search_range: Sequence[float] = (0, 400), width_factor: float = 12.0) -> int:
    """Cutoff k* + width_factor·σ + d + 10, σ estimated from the linearized CMB variance."""
    crossing = stabilizing_crossing(scheme, search_range)
    if crossing is None:
        return 40 + scheme.d
    s_f, s_g = abs(crossing.slope_f), abs(crossing.slope_g)
    if s_g == 0:
        sigma = np.sqrt(max(crossing.k_star, 1.0))
    elif s_f == 0:
        sigma = np.sqrt(scheme.d * crossing.h_star / (2.0 * s_g))
    else:
        sigma = np.sqrt(scheme.d * crossing.h_star / (s_f + s_g))
    return int(np.ceil(crossing.k_star + width_factor * max(sigma, 1.0) + scheme.d + 10))


# ---------------------------------------------------------------------------
# CSV rows
# ---------------------------------------------------------------------------

def dark_state_rows(state: DarkState) -> List[Dict[str, Any]]:
    return [{'mu': state.mu, 'k': k, 'probability': float(abs(x) ** 2),
             're_xi': float(x.real), 'im_xi': float(x.imag)}
            for k, x in enumerate(state.xi)]


def distribution_rows(dist: BosonDistribution) -> List[Dict[str, Any]]:
    return [{'k': k, 'probability': float(p)} for k, p in enumerate(dist.probabilities)]
