import logging
import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import quad

from simulation.errors import InstabilityError, IntegrationError
from simulation.meanfield import EffectiveCoupling
from simulation.params import PhysicalParams
from simulation.rwa import build_tilde_drift, stability_check

logger = logging.getLogger(__name__)

NEAR_SINGULAR = 1e-14


@dataclass(frozen=True)
class SpectralTransfer:
    """
    Noise transfer coefficients of the rotating-frame quadratures,

        dq~(w) = A1 x_in + B1 y_in + E1 q_in + F1 p_in
        dp~(w) = A2 x_in + B2 y_in + E2 q_in + F2 p_in

    `u` is the cavity factor kappa - i w and `v` the mechanical factor
    gamma_m/2 - i w. Arrays broadcast over `omega`.
    """
    omega: np.ndarray
    A1: np.ndarray
    B1: np.ndarray
    E1: np.ndarray
    F1: np.ndarray
    A2: np.ndarray
    B2: np.ndarray
    E2: np.ndarray
    F2: np.ndarray
    u: np.ndarray
    v: np.ndarray
    d: np.ndarray
    alpha0: complex
    alpha1: complex
    beta0: complex
    beta1: complex
    Gamma0: complex
    Gamma1: complex


def transfer_at(omega, coupling: EffectiveCoupling, params: PhysicalParams) -> SpectralTransfer:
    """
    Evaluate the closed-form transfer coefficients at one or many frequencies.

    Args:
        omega: Frequency or array of frequencies (units of omega_m)
        coupling (EffectiveCoupling): Sideband couplings
        params (PhysicalParams): System parameters

    Returns:
        SpectralTransfer: Coefficients at `omega`
    """
    omega = np.asarray(omega, dtype=float)
    g0, g1 = coupling.g_0, coupling.g_plus1
    lam, theta = params.lambda_gain, params.theta
    kappa, gamma = params.kappa, params.gamma_m
    phase = np.exp(-1j * theta)

    alpha0 = g0 * phase - np.conj(g0) / phase
    alpha1 = g1 * phase - np.conj(g1) / phase
    beta0 = g0 * phase + np.conj(g0) / phase
    beta1 = g1 * phase + np.conj(g1) / phase
    Gamma0 = g0 ** 2 * phase + np.conj(g0) ** 2 / phase
    Gamma1 = g1 ** 2 * phase + np.conj(g1) ** 2 / phase
    G_sq = abs(g0) ** 2 - abs(g1) ** 2
    gm, gp = g0 - g1, g0 + g1

    u = kappa - 1j * omega
    v = gamma / 2.0 - 1j * omega
    d = (u * v + G_sq) ** 2 - 4.0 * lam ** 2 * v ** 2
    scale = np.abs(u * v + G_sq) ** 2 + 4.0 * lam ** 2 * np.abs(v) ** 2
    if np.any(np.abs(d) < NEAR_SINGULAR * np.maximum(scale, 1e-300)):
        raise InstabilityError("Transfer denominator vanishes on the real axis (system at its stability edge)")

    root_kappa, root_gamma = math.sqrt(2.0 * kappa), math.sqrt(gamma)
    mech = (u ** 2 - 4.0 * lam ** 2) * v + G_sq * u
    mixing = lam * (Gamma0 - Gamma1)

    A1 = -(root_kappa * 1j / d) * ((lam * (alpha0 - alpha1) + 1j * u * gm.imag) * v + 1j * G_sq * gm.imag)
    B1 = (root_kappa / d) * ((lam * (beta0 - beta1) - u * gm.real) * v - G_sq * gm.real)
    E1 = (root_gamma / d) * (mech + mixing)
    F1 = (root_gamma / d) * 1j * lam * (gm ** 2 * phase - np.conj(gm) ** 2 / phase)
    A2 = (root_kappa / d) * ((lam * (beta0 + beta1) + u * gp.real) * v + G_sq * gp.real)
    B2 = (root_kappa * 1j / d) * ((lam * (alpha0 + alpha1) - 1j * u * gp.imag) * v - 1j * G_sq * gp.imag)
    E2 = (root_gamma / d) * 1j * lam * (gp ** 2 * phase - np.conj(gp) ** 2 / phase)
    F2 = (root_gamma / d) * (mech - mixing)

    return SpectralTransfer(omega, A1, B1, E1, F1, A2, B2, E2, F2, u, v, d,
                            alpha0, alpha1, beta0, beta1, Gamma0, Gamma1)


@dataclass(frozen=True)
class Spectrum:
    """Symmetrized spectra split into radiation-pressure (rp) and thermal (th) parts."""
    omega: np.ndarray
    sq_rp: np.ndarray
    sq_th: np.ndarray
    sp_rp: np.ndarray
    sp_th: np.ndarray

    @property
    def sq(self) -> np.ndarray:
        return self.sq_rp + self.sq_th

    @property
    def sp(self) -> np.ndarray:
        return self.sp_rp + self.sp_th

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'omega': self.omega,
            'Sq_total': self.sq,
            'Sq_rp': self.sq_rp,
            'Sq_th': self.sq_th,
            'Sp_total': self.sp,
            'Sp_rp': self.sp_rp,
            'Sp_th': self.sp_th,
        })


def _pair(x_plus, x_minus) -> np.ndarray:
    return np.real(x_plus * x_minus)


def spectra(omega_grid, coupling: EffectiveCoupling, params: PhysicalParams) -> Spectrum:
    """
    Position and momentum noise spectra on a frequency grid.

    Args:
        omega_grid: Frequencies (units of omega_m)
        coupling (EffectiveCoupling): Sideband couplings
        params (PhysicalParams): System parameters

    Returns:
        Spectrum: S_q, S_p with their radiation-pressure and thermal parts
    """
    omega = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    plus = transfer_at(omega, coupling, params)
    minus = transfer_at(-omega, coupling, params)
    optical = params.n_a + 0.5
    thermal = params.n_m + 0.5
    return Spectrum(
        omega=omega,
        sq_rp=(_pair(plus.A1, minus.A1) + _pair(plus.B1, minus.B1)) * optical,
        sq_th=(_pair(plus.E1, minus.E1) + _pair(plus.F1, minus.F1)) * thermal,
        sp_rp=(_pair(plus.A2, minus.A2) + _pair(plus.B2, minus.B2)) * optical,
        sp_th=(_pair(plus.E2, minus.E2) + _pair(plus.F2, minus.F2)) * thermal,
    )


@dataclass(frozen=True)
class QuadratureConfig:
    width_factor: float = 50.0
    epsrel: float = 1e-10
    epsabs: float = 1e-14
    limit: int = 500
    tail_tol: float = 1e-6
    max_widenings: int = 8


@dataclass(frozen=True)
class IntegratedVariance:
    var_q: float
    var_p: float
    abserr: float
    tail_q: float
    tail_p: float
    width: float

    def to_dict(self) -> Dict:
        return {
            'var_q': self.var_q,
            'var_p': self.var_p,
            'abserr': self.abserr,
            'tail_q': self.tail_q,
            'tail_p': self.tail_p,
            'width': self.width,
        }


def _breakpoints(coupling: EffectiveCoupling, params: PhysicalParams, width: float) -> np.ndarray:
    """Panel edges on [0, width] clustered around the resonances of the drift."""
    eigenvalues = stability_check(build_tilde_drift(coupling, params)).eigenvalues
    centers = np.abs(eigenvalues.imag)
    widths = np.maximum(np.abs(eigenvalues.real), 1e-12)
    points = [0.0]
    for center, half in zip(centers, widths):
        points.append(center)
        for k in (0.5, 2.0, 8.0, 32.0):
            points.extend((center - k * half, center + k * half))
    points.extend(np.geomspace(widths.min() / 4.0, width, 48))
    points = np.unique(np.clip(points, 0.0, width))
    return points[np.concatenate(([True], np.diff(points) > 1e-15 * width))]


def _integrate_panels(func, edges: np.ndarray, config: QuadratureConfig) -> Tuple[float, float]:
    total, error = 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        out = quad(func, lo, hi, epsabs=config.epsabs, epsrel=config.epsrel, limit=config.limit, full_output=1)
        value, abserr = out[0], out[1]
        if len(out) > 3 and abserr > max(1e-8 * abs(value), 1e3 * config.epsabs):
            raise IntegrationError(f"Quadrature did not converge on [{lo:.4g}, {hi:.4g}]: {out[3]}",
                                   abserr=abserr)
        total += value
        error += abserr
    return total, error


def integrate_variance(coupling: EffectiveCoupling, params: PhysicalParams,
                       config: QuadratureConfig = QuadratureConfig()) -> IntegratedVariance:
    """
    Variances <dZ^2> = (1/2pi) integral S_Z(w) dw by adaptive Gauss-Kronrod panels.

    The spectra are even, so the integral runs over [0, W] and doubles; the
    remainder beyond W is taken from the 1/w^2 asymptote. W widens by a
    factor 10 until that tail is below `config.tail_tol` of the result.

    Args:
        coupling (EffectiveCoupling): Sideband couplings
        params (PhysicalParams): System parameters (stable)
        config (QuadratureConfig): Quadrature settings

    Returns:
        IntegratedVariance: var_q, var_p, error and tail estimates
    """
    stability = stability_check(build_tilde_drift(coupling, params))
    if not stability.stable:
        raise InstabilityError("Spectral integration requires a stable drift",
                               eigenvalues=[complex(e) for e in stability.eigenvalues if e.real >= 0])

    def density(which):
        def f(w):
            s = spectra(w, coupling, params)
            return float((s.sq if which == 'q' else s.sp)[0])
        return f

    width = config.width_factor * max(params.kappa, abs(coupling.g_0), params.gamma_m)
    results = {}
    abserr = 0.0
    for which in ('q', 'p'):
        f = density(which)
        edges = _breakpoints(coupling, params, width)
        body, err = _integrate_panels(f, edges, config)
        upper = width
        for _ in range(config.max_widenings + 1):
            tail = f(upper) * upper
            variance = (body + tail) / math.pi
            if tail / math.pi <= config.tail_tol * abs(variance):
                break
            logger.debug(f"S_{which} tail {tail / math.pi:.3e} too large at W={upper:.4g}; widening")
            extra, extra_err = _integrate_panels(f, np.geomspace(upper, 10.0 * upper, 9), config)
            body += extra
            err += extra_err
            upper *= 10.0
        else:
            raise IntegrationError(f"Spectral tail of S_{which} did not fall below {config.tail_tol:g}",
                                   abserr=tail / math.pi)
        results[which] = (variance, tail / math.pi)
        abserr += err / math.pi

    return IntegratedVariance(
        var_q=results['q'][0],
        var_p=results['p'][0],
        abserr=abserr,
        tail_q=results['q'][1],
        tail_p=results['p'][1],
        width=width,
    )
