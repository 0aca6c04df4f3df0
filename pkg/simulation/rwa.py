import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Union

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.optimize import minimize_scalar

from simulation.errors import ConvergenceError, DegenerateCouplingError, InstabilityError, ValidationError
from simulation.floquet import CovarianceMatrix, DriftMatrix, NoiseDiffusion
from simulation.meanfield import EffectiveCoupling
from simulation.params import (PhysicalParams, eta_factor, optimal_gain_value,
                               threshold_cooperativities)

logger = logging.getLogger(__name__)

LYAPUNOV_RESIDUAL_TOL = 1e-10
VALIDITY_FACTOR = 10.0
GAIN_XTOL = 1e-10


def build_tilde_drift(coupling: EffectiveCoupling, params: PhysicalParams) -> DriftMatrix:
    """
    Constant rotating-frame drift under the rotating wave approximation.

    Args:
        coupling (EffectiveCoupling): Sideband couplings (g_-1 does not enter)
        params (PhysicalParams): System parameters

    Returns:
        DriftMatrix: Constant matrix over (dq~, dp~, dx~, dy~)
    """
    gp, gm = coupling.g_plus, coupling.g_minus
    half_gamma, kappa = params.gamma_m / 2.0, params.kappa
    c = 2.0 * params.lambda_gain * math.cos(params.theta)
    s = 2.0 * params.lambda_gain * math.sin(params.theta)
    matrix = np.array([
        [-half_gamma, 0.0, gm.imag, -gm.real],
        [0.0, -half_gamma, gp.real, gp.imag],
        [-gp.imag, -gm.real, -kappa + c, s],
        [gp.real, -gm.imag, s, -kappa - c],
    ])
    return DriftMatrix.from_constant(matrix, frame='rotating_rwa')


@dataclass(frozen=True)
class StabilityResult:
    stable: bool
    margin: float
    eigenvalues: np.ndarray
    gain_below_threshold: Optional[bool] = None

    def to_dict(self) -> Dict:
        return {
            'stable': self.stable,
            'margin': self.margin,
            'eigenvalues': [complex(e) for e in self.eigenvalues],
            'gain_below_threshold': self.gain_below_threshold,
        }


def _as_array(M: Union[DriftMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(M, DriftMatrix):
        if not M.is_constant:
            raise ValidationError("Eigenvalue stability needs a constant drift matrix", field='M')
        return M.constant
    return np.asarray(M, dtype=float)


def stability_check(M: Union[DriftMatrix, np.ndarray], lambda_bar: Optional[float] = None) -> StabilityResult:
    """
    Spectral stability of a constant drift: stable iff every eigenvalue has a
    negative real part. The necessary gain condition lambda_bar < 1 is
    reported separately when `lambda_bar` is given.
    """
    eigenvalues = np.linalg.eigvals(_as_array(M))
    largest = float(np.max(eigenvalues.real))
    return StabilityResult(
        stable=largest < 0,
        margin=-largest,
        eigenvalues=eigenvalues,
        gain_below_threshold=None if lambda_bar is None else lambda_bar < 1.0,
    )


def steady_lyapunov(M: Union[DriftMatrix, np.ndarray], D: Union[NoiseDiffusion, np.ndarray]) -> CovarianceMatrix:
    """
    Solve M V + V M^T = -D through the 16x16 Kronecker-sum system.

    Args:
        M: Hurwitz drift matrix
        D: Diffusion matrix

    Returns:
        CovarianceMatrix: Unique symmetric steady-state solution
    """
    M = _as_array(M)
    D = D.matrix if isinstance(D, NoiseDiffusion) else np.asarray(D, dtype=float)

    stability = stability_check(M)
    if not stability.stable:
        offending = unstable_eigenvalues(stability)
        raise InstabilityError(f"Drift matrix is not Hurwitz; eigenvalues with Re >= 0: {offending}",
                               eigenvalues=offending)

    identity = np.eye(4)
    system = np.kron(identity, M) + np.kron(M, identity)
    solution = lu_solve(lu_factor(system), -D.ravel(order='F'))
    V = solution.reshape((4, 4), order='F')
    V = 0.5 * (V + V.T)

    residual = np.linalg.norm(M @ V + V @ M.T + D)
    scale = np.linalg.norm(D) or 1.0
    if residual > LYAPUNOV_RESIDUAL_TOL * scale:
        raise ConvergenceError(f"Lyapunov residual {residual:.3e} exceeds {LYAPUNOV_RESIDUAL_TOL:g} * |D|",
                               residual=residual / scale)
    return CovarianceMatrix(V).check()


def steady_covariance(coupling: EffectiveCoupling, params: PhysicalParams) -> CovarianceMatrix:
    """Rotating-frame RWA steady state with the rotating-frame diffusion."""
    return steady_lyapunov(build_tilde_drift(coupling, params), NoiseDiffusion.rotating(params))


@dataclass(frozen=True)
class AnalyticVariances:
    var_q: float
    var_p: float
    s_omega_minus: float
    s_omega_plus: float
    s_lambda_minus: float
    s_lambda_plus: float
    norm: float


def analytic_variances(coupling: EffectiveCoupling, params: PhysicalParams) -> AnalyticVariances:
    """
    Closed-form steady variances for negligible mechanical damping and n_a = 0.

    The half-sum phase (phi_r0 + phi_r1)/2 is evaluated as theta - phi_0 - phi_1.
    """
    a, b = abs(coupling.g_0), abs(coupling.g_plus1)
    lambda_bar = params.lambda_bar
    norm = 2.0 * (1.0 - lambda_bar ** 2) * (a ** 2 - b ** 2)
    if norm <= 0:
        raise DegenerateCouplingError(
            f"Normalization 2(1 - lambda_bar^2)(|g0|^2 - |g1|^2) = {norm:.6g} is not positive")

    cross = 2.0 * a * b
    s_omega_minus = (a ** 2 + b ** 2 - cross * math.cos(coupling.phi_r)) / norm
    s_omega_plus = (a ** 2 + b ** 2 + cross * math.cos(coupling.phi_r)) / norm
    base = a ** 2 * math.cos(coupling.phi_r0) + b ** 2 * math.cos(coupling.phi_r1)
    half_sum = math.cos(params.theta - coupling.phi_0 - coupling.phi_1)
    s_lambda_minus = (base - cross * half_sum) / norm
    s_lambda_plus = (base + cross * half_sum) / norm

    return AnalyticVariances(
        var_q=s_omega_minus - lambda_bar * s_lambda_minus,
        var_p=s_omega_plus + lambda_bar * s_lambda_plus,
        s_omega_minus=s_omega_minus,
        s_omega_plus=s_omega_plus,
        s_lambda_minus=s_lambda_minus,
        s_lambda_plus=s_lambda_plus,
        norm=norm,
    )


@dataclass(frozen=True)
class DampedVariance:
    var_p: float
    c_tilde: float
    valid: bool


def momentum_variance_damped(cooperativity: float, r: float, lambda_bar: float, n_m: float,
                             gamma_over_kappa: float, validity_factor: float = VALIDITY_FACTOR) -> DampedVariance:
    """
    Momentum variance with mechanical damping and thermal noise, for the
    momentum phase configuration.

    Args:
        cooperativity (float): C = 4|g_0|^2/(kappa gamma_m)
        r (float): Squeeze parameter, tanh r = |g_1|/|g_0|
        lambda_bar (float): Normalized gain
        n_m (float): Thermal phonon number
        gamma_over_kappa (float): gamma_m / kappa
        validity_factor (float): Required margin of C~ over 2(1 + lambda_bar)

    Returns:
        DampedVariance: var_p with the validity flag
    """
    c_tilde = cooperativity * (1.0 - math.tanh(r) ** 2)
    gain = 1.0 + lambda_bar
    var_p = (math.exp(-2.0 * r) / (2.0 * gain)
             + (2.0 * n_m + 1.0) * (gain / c_tilde + gamma_over_kappa / (4.0 * gain)))
    valid = c_tilde >= validity_factor * 2.0 * gain
    if not valid:
        logger.warning(f"C~ = {c_tilde:.4g} is not >> 2(1 + lambda_bar) = {2.0 * gain:.4g}; "
                       f"damped momentum variance is outside its validity range")
    return DampedVariance(var_p=var_p, c_tilde=c_tilde, valid=valid)


class GainRegime(str, Enum):
    BELOW_THRESHOLD = 'below_threshold'
    INTERIOR_OPTIMUM = 'interior_optimum'
    GAIN_SATURATED = 'gain_saturated'


@dataclass(frozen=True)
class OptimalGain:
    lambda_bar_opt: float
    unclamped: float
    regime: GainRegime
    c_tilde_thr: float
    c_tilde_ins: float


def _gain_objective(lambda_bar: float, c_tilde: float, eta: float) -> float:
    """Damped momentum variance over (2 n_m + 1), less its gain-independent part."""
    return eta / (4.0 * (1.0 + lambda_bar)) + (1.0 + lambda_bar) / c_tilde


def _gain_slope(lambda_bar: float, c_tilde: float, eta: float) -> float:
    return 1.0 / c_tilde - eta / (4.0 * (1.0 + lambda_bar) ** 2)


def optimal_gain(c_tilde: float, eta: float) -> OptimalGain:
    """
    Gain minimizing the damped momentum variance, with its regime.

    The closed-form estimate is kept as `unclamped`; the reported optimum is
    the bounded minimizer of the variance on [0, 1]. Below C~_thr the optimum
    is 0; above C~_ins it sits at the instability boundary and is reported as 1.
    """
    if c_tilde <= 0 or eta <= 0:
        raise ValidationError(f"optimal_gain needs C~ > 0 and eta > 0 (got {c_tilde}, {eta})", field='c_tilde')
    c_thr, c_ins = threshold_cooperativities(eta)
    raw = optimal_gain_value(c_tilde, eta)
    if _gain_slope(0.0, c_tilde, eta) >= 0:
        regime, value = GainRegime.BELOW_THRESHOLD, 0.0
    elif _gain_slope(1.0, c_tilde, eta) <= 0:
        regime, value = GainRegime.GAIN_SATURATED, 1.0
    else:
        result = minimize_scalar(_gain_objective, bounds=(0.0, 1.0), args=(c_tilde, eta), method='bounded',
                                 options={'xatol': GAIN_XTOL})
        regime, value = GainRegime.INTERIOR_OPTIMUM, float(result.x)
    return OptimalGain(lambda_bar_opt=value, unclamped=raw, regime=regime, c_tilde_thr=c_thr, c_tilde_ins=c_ins)


def optimal_gain_for(coupling: EffectiveCoupling, params: PhysicalParams) -> OptimalGain:
    ratio = coupling.ratio
    c_tilde = coupling.cooperativity(params) * (1.0 - ratio ** 2)
    eta = eta_factor(math.atanh(ratio), params.n_m, params.gamma_m / params.kappa)
    return optimal_gain(c_tilde, eta)


def unstable_eigenvalues(result: StabilityResult) -> List[complex]:
    return [complex(e) for e in result.eigenvalues if e.real >= 0]
