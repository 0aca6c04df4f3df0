import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp
from scipy.optimize import root

from simulation.errors import (ConvergenceError, DegenerateCouplingError, InstabilityError, OrbitError,
                               SingularityError, ValidationError)
from simulation.params import PhysicalParams
from utils.numerics import wrap_phase

logger = logging.getLogger(__name__)

OVERFLOW_GUARD = 1e12
DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12
MATCH_TOL = 1e-9


@dataclass(frozen=True)
class MeanFieldState:
    t: float = 0.0
    q_mean: float = 0.0
    p_mean: float = 0.0
    a_mean: complex = 0j

    def __post_init__(self):
        values = (self.t, self.q_mean, self.p_mean, self.a_mean.real, self.a_mean.imag)
        if not all(math.isfinite(v) for v in values):
            raise InstabilityError(f"Non-finite mean-field state at t={self.t}", time=self.t)

    def as_vector(self) -> np.ndarray:
        return np.array([self.q_mean, self.p_mean, self.a_mean.real, self.a_mean.imag])


@dataclass(frozen=True)
class MeanFieldTrajectory:
    """Sampled solution of the first-moment equations (arrays share one time axis)."""
    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    a: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> MeanFieldState:
        return MeanFieldState(float(self.t[i]), float(self.q[i]), float(self.p[i]), complex(self.a[i]))

    def __iter__(self) -> Iterator[MeanFieldState]:
        return (self[i] for i in range(len(self)))

    @property
    def final(self) -> MeanFieldState:
        return self[len(self) - 1]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            't': self.t,
            'q_mean': self.q,
            'p_mean': self.p,
            're_a': self.a.real,
            'im_a': self.a.imag,
        })


def _mean_field_rhs(params: PhysicalParams):
    """Right-hand side over y = (q, p, Re a, Im a)."""
    harmonics = list(params.drive_phasors.items())
    omega_mod = params.omega_mod
    gamma, g, kappa, delta0 = params.gamma_m, params.g, params.kappa, params.delta0
    pump = 2.0 * params.lambda_gain * np.exp(1j * params.theta)
    two_delta_p = 2.0 * params.delta_p

    def rhs(t, y):
        q, p = y[0], y[1]
        a = y[2] + 1j * y[3]
        drive = 0j
        for n, amplitude in harmonics:
            drive += amplitude * np.exp(-1j * n * omega_mod * t)
        da = (-(kappa + 1j * delta0) * a + 1j * g * a * q + drive
              + pump * np.conj(a) * np.exp(-1j * two_delta_p * t))
        return [p, -q - gamma * p + g * (a.real ** 2 + a.imag ** 2), da.real, da.imag]

    return rhs


def _blowup(t, y):
    return OVERFLOW_GUARD - math.hypot(y[2], y[3])


_blowup.terminal = True


def integrate_mean_field(params: PhysicalParams, initial: Optional[MeanFieldState] = None,
                         t_end: float = 1.0, tol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                         t_eval: Optional[np.ndarray] = None) -> MeanFieldTrajectory:
    """
    Integrate the first-moment equations from `initial.t` to `t_end`.

    Args:
        params (PhysicalParams): System parameters
        initial (MeanFieldState): Starting state (zero state at t=0 by default)
        t_end (float): Final time in units of 1/omega_m
        tol (float): Relative tolerance of the RK5(4) controller
        atol (float): Absolute tolerance
        t_eval (np.ndarray): Optional sampling times; the solver steps otherwise

    Returns:
        MeanFieldTrajectory: Sampled trajectory
    """
    initial = initial or MeanFieldState()
    if tol <= 0 or atol <= 0:
        raise ValidationError("Integration tolerances must be positive", field='tol')
    if t_end <= initial.t:
        raise ValidationError(f"t_end={t_end} must exceed the initial time {initial.t}", field='t_end')

    sol = solve_ivp(
        _mean_field_rhs(params), (initial.t, t_end), initial.as_vector(),
        method='RK45', rtol=tol, atol=atol, t_eval=t_eval, events=_blowup,
    )
    if sol.status == 1 or (sol.t_events[0].size > 0):
        t_blow = float(sol.t_events[0][0])
        raise InstabilityError(f"Mean field diverged (|<a>| > {OVERFLOW_GUARD:g}) at t={t_blow:.6g}",
                               time=t_blow)
    if sol.status != 0:
        raise InstabilityError(f"Mean-field integration failed: {sol.message}", time=float(sol.t[-1]))

    y = sol.y
    if not np.all(np.isfinite(y)):
        raise InstabilityError("Mean-field integration produced non-finite values", time=float(sol.t[-1]))
    return MeanFieldTrajectory(t=sol.t, q=y[0], p=y[1], a=y[2] + 1j * y[3])


@dataclass(frozen=True)
class MeanFieldOrbit:
    """
    One period of the asymptotic orbit on a uniform grid t in [0, tau).

    Grid times are aligned with absolute time modulo tau, so the orbit can be
    evaluated against any tau-periodic coefficient of the equations.
    """
    period: float
    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    a: np.ndarray
    periodicity_residual: float
    window: Optional[MeanFieldTrajectory] = None
    settled_periods: int = 0

    @property
    def grid_size(self) -> int:
        return len(self.t)

    @property
    def samples(self) -> Tuple[MeanFieldState, ...]:
        return tuple(MeanFieldState(float(t), float(q), float(p), complex(a))
                     for t, q, p, a in zip(self.t, self.q, self.p, self.a))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            't': self.t,
            'q_mean': self.q,
            'p_mean': self.p,
            're_a': self.a.real,
            'im_a': self.a.imag,
        })

    def summary(self) -> Dict:
        return {
            'period': self.period,
            'grid_size': self.grid_size,
            'periodicity_residual': self.periodicity_residual,
            'settled_periods': self.settled_periods,
            'q_mean': {'min': float(self.q.min()), 'max': float(self.q.max()), 'avg': float(self.q.mean())},
            'p_mean': {'min': float(self.p.min()), 'max': float(self.p.max())},
            'abs_a': {'min': float(np.abs(self.a).min()), 'max': float(np.abs(self.a).max())},
        }


def _periodicity_residual(current: np.ndarray, previous: np.ndarray) -> float:
    """Max over grid and components of |x(t+tau) - x(t)|, each relative to that component's amplitude."""
    worst = 0.0
    for now, before in zip(current, previous):
        amplitude = np.max(np.abs(now))
        if amplitude == 0.0:
            continue
        worst = max(worst, float(np.max(np.abs(now - before)) / amplitude))
    return worst


def _analytic_seed(params: PhysicalParams) -> MeanFieldState:
    """State at t=0 from the perturbative expansion, or the zero state if it is unavailable."""
    if not math.isclose(params.delta_p, params.omega_mod / 2.0, rel_tol=1e-12):
        return MeanFieldState()
    try:
        coefficients = fourier_perturbation_coefficients(params, N=max(1, params.max_harmonic))
        q, p, a = coefficients.reconstruct(0.0, params.g)
        return MeanFieldState(0.0, float(np.real(q)), float(np.real(p)), complex(a))
    except (SingularityError, InstabilityError) as e:
        logger.warning(f"Analytic seed unavailable ({e}); starting from the zero state")
        return MeanFieldState()


def detect_periodic_orbit(params: PhysicalParams, settle_periods: int = 200, sample_periods: int = 2,
                          tol: float = 1e-6, grid_size: int = 256, max_extensions: int = 3,
                          extension_periods: int = 100, seed: str = 'analytic',
                          rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> MeanFieldOrbit:
    """
    Settle the first moments onto their tau-periodic orbit.

    Integrates `settle_periods` periods, then samples `sample_periods` more
    and compares the last two periods on the grid. Extends the settling by
    `extension_periods` at most `max_extensions` times.

    Args:
        params (PhysicalParams): System parameters
        settle_periods (int): Periods discarded before sampling
        sample_periods (int): Periods sampled after settling (at least 2)
        tol (float): Orbit acceptance tolerance on the periodicity residual
        grid_size (int): Samples per period
        max_extensions (int): Extra settling attempts before giving up
        extension_periods (int): Length of each extension
        seed (str): 'analytic' starts from the perturbative orbit, 'zero' from rest

    Returns:
        MeanFieldOrbit: Converged one-period orbit with the sampled window
    """
    if settle_periods < 1:
        raise ValidationError("settle_periods must be at least 1", field='settle_periods')
    if sample_periods < 2:
        raise ValidationError("sample_periods must be at least 2", field='sample_periods')
    if grid_size < 8:
        raise ValidationError("grid_size must be at least 8", field='grid_size')
    if seed not in ('analytic', 'zero'):
        raise ValidationError(f"Unknown seed '{seed}'", field='seed')

    tau = params.tau
    grid = np.arange(grid_size) * tau / grid_size

    if not params.has_drive:
        if params.lambda_bar >= 1.0:
            raise InstabilityError(
                f"Parametric threshold crossed (lambda_bar={params.lambda_bar:.4g} >= 1): "
                f"cavity eigenvalue -kappa + 2 Lambda >= 0",
                eigenvalues=[complex(-params.kappa + 2.0 * params.lambda_gain)])
        logger.info("Zero drive below threshold: orbit is the trivial fixed point")
        zeros = np.zeros(grid_size)
        return MeanFieldOrbit(tau, grid, zeros, zeros.copy(), zeros.astype(complex), 0.0)

    state = _analytic_seed(params) if seed == 'analytic' else MeanFieldState()
    settle_end = settle_periods * tau
    logger.info(f"Settling mean field over {settle_periods} periods (t <= {settle_end:.6g})")
    state = integrate_mean_field(params, state, settle_end, tol=rtol, atol=atol).final
    settled = settle_periods

    residual = math.inf
    for attempt in range(max_extensions + 1):
        if attempt > 0:
            settled += extension_periods
            logger.info(f"Orbit residual {residual:.3e} > {tol:.1e}; "
                        f"extension {attempt}/{max_extensions} of {extension_periods} periods")
            state = integrate_mean_field(params, state, settled * tau, tol=rtol, atol=atol).final

        start = settled * tau
        t_eval = start + np.arange(sample_periods * grid_size + 1) * tau / grid_size
        t_eval[-1] = start + sample_periods * tau
        window = integrate_mean_field(params, state, t_eval[-1], tol=rtol, atol=atol, t_eval=t_eval)

        last = slice((sample_periods - 1) * grid_size, sample_periods * grid_size)
        before = slice((sample_periods - 2) * grid_size, (sample_periods - 1) * grid_size)
        components = (window.q, window.p, window.a.real, window.a.imag)
        residual = _periodicity_residual([c[last] for c in components], [c[before] for c in components])
        if residual <= tol:
            logger.info(f"Periodic orbit accepted after {settled} periods, residual {residual:.3e}")
            return MeanFieldOrbit(tau, grid, window.q[last].copy(), window.p[last].copy(),
                                  window.a[last].copy(), residual, window=window,
                                  settled_periods=settled)
        state = window.final
        settled += sample_periods

    raise OrbitError(f"Mean field did not settle onto a tau-periodic orbit (residual {residual:.3e} > {tol:.1e}); "
                     f"possible multistability or instability", residual=residual)


@dataclass(frozen=True)
class FourierCoefficients:
    """
    Perturbative Fourier tables O[n + N, j] for O in {q, p, a}: the mean
    field is sum_j g^j sum_n O_{n,j} exp(i n Omega t).
    """
    q: np.ndarray
    p: np.ndarray
    a: np.ndarray
    N: int
    J: int
    omega_mod: float

    def coefficient(self, name: str, n: int, j: int) -> complex:
        table = getattr(self, name)
        if abs(n) > self.N or not 0 <= j <= self.J:
            return 0j
        return complex(table[n + self.N, j])

    def reconstruct(self, t, g: float):
        """Evaluate (q(t), p(t), a(t)) by resumming with weights g^j."""
        t = np.asarray(t, dtype=float)
        weights = g ** np.arange(self.J + 1)
        harmonics = np.arange(-self.N, self.N + 1)
        phases = np.exp(1j * np.multiply.outer(t, harmonics * self.omega_mod))
        return tuple(phases @ (table @ weights) for table in (self.q, self.p, self.a))

    def to_json(self) -> Dict[str, list]:
        out = {}
        for name in ('q', 'p', 'a'):
            table = getattr(self, name)
            for n in range(-self.N, self.N + 1):
                for j in range(self.J + 1):
                    value = table[n + self.N, j]
                    out[f"({name}, {n}, {j})"] = [float(value.real), float(value.imag)]
        return out


def fourier_perturbation_coefficients(params: PhysicalParams, J: int = 6, N: int = 1) -> FourierCoefficients:
    """
    Recursive perturbative solution of the mean-field equations.

    Order zero solves the coupled pair (n, -n-1) mixed by the parametric
    term; higher orders are sourced by products of lower orders.

    Args:
        params (PhysicalParams): System parameters (requires delta_p = Omega/2)
        J (int): Highest perturbation order
        N (int): Highest harmonic index kept

    Returns:
        FourierCoefficients: Coefficient tables, independent of g
    """
    if not math.isclose(params.delta_p, params.omega_mod / 2.0, rel_tol=1e-12, abs_tol=1e-15):
        raise ValidationError("The Fourier recursion requires delta_p = omega_mod / 2", field='delta_p')
    if J < 0:
        raise ValidationError("J must be nonnegative", field='J')
    if N < params.max_harmonic:
        raise ValidationError(f"N={N} is below the highest drive harmonic {params.max_harmonic}", field='N')

    size = 2 * N + 1
    q = np.zeros((size, J + 1), dtype=complex)
    p = np.zeros((size, J + 1), dtype=complex)
    a = np.zeros((size, J + 1), dtype=complex)
    harmonics = range(-N, N + 1)

    kappa, delta0, omega, w = params.kappa, params.delta0, params.omega_m, params.omega_mod
    pump = 2.0 * params.lambda_gain * np.exp(1j * params.theta)
    four_lambda_sq = 4.0 * params.lambda_gain ** 2
    drive = params.drive_phasors

    def stored(table, n, j):
        return table[n + N, j] if -N <= n <= N else 0j

    def optical_source(n, j):
        if j == 0:
            return drive.get(-n, 0j)
        total = 0j
        for k in range(j):
            for m in harmonics:
                total += stored(a, m, k) * stored(q, n - m, j - k - 1)
        return 1j * total

    def mechanical_source(n, j):
        total = 0j
        for k in range(j):
            for m in harmonics:
                total += np.conj(stored(a, m, k)) * stored(a, n + m, j - k - 1)
        return total

    for j in range(J + 1):
        if j > 0:
            for n in harmonics:
                denominator = omega ** 2 - (n * w) ** 2 + 1j * params.gamma_m * n * w
                if abs(denominator) < 1e-300:
                    raise SingularityError(f"Mechanical resonance at harmonic n={n}", n=n)
                q[n + N, j] = omega * mechanical_source(n, j) / denominator
                p[n + N, j] = 1j * n * w * q[n + N, j] / omega
        for n in harmonics:
            partner = kappa - 1j * (delta0 - (n + 1) * w)
            denominator = partner * (kappa + 1j * (delta0 + n * w)) - four_lambda_sq
            if abs(denominator) < 1e-14 * max(1.0, abs(partner) ** 2):
                raise SingularityError(f"Parametric resonance: vanishing denominator at harmonic n={n}", n=n)
            numerator = partner * optical_source(n, j) + pump * np.conj(optical_source(-n - 1, j))
            a[n + N, j] = numerator / denominator

    logger.debug(f"Fourier recursion done: N={N}, J={J}, |a_0,0|={abs(a[N, 0]):.6g}")
    return FourierCoefficients(q=q, p=p, a=a, N=N, J=J, omega_mod=w)


@dataclass(frozen=True)
class EffectiveCoupling:
    """
    Sideband couplings of G(t) = g_0 + g_1 exp(-i Omega t) + g_-1 exp(i Omega t),
    with G(t) = g <a(t)> / sqrt(2) and t the absolute time of the pump.

    Phases are absolute: phi_n = arg g_n, and the squeezing phases are
    phi_r = phi_1 - phi_0, phi_r0 = theta - 2 phi_0, phi_r1 = theta - 2 phi_1.
    Real drive amplitudes do not give real couplings; see match_drive_phases.
    `theta` is the pump phase the relative phases refer to.
    """
    g_minus1: complex
    g_0: complex
    g_plus1: complex
    theta: float = math.pi
    source: str = 'analytic'

    @property
    def phi_m1(self) -> float:
        return float(np.angle(self.g_minus1))

    @property
    def phi_0(self) -> float:
        return float(np.angle(self.g_0))

    @property
    def phi_1(self) -> float:
        return float(np.angle(self.g_plus1))

    @property
    def phi_r(self) -> float:
        return wrap_phase(self.phi_1 - self.phi_0)

    @property
    def phi_r0(self) -> float:
        return wrap_phase(self.theta - 2.0 * self.phi_0)

    @property
    def phi_r1(self) -> float:
        return wrap_phase(self.theta - 2.0 * self.phi_1)

    @property
    def ratio(self) -> float:
        """|g_1| / |g_0|, i.e. tanh r."""
        if self.g_0 == 0:
            return math.inf if self.g_plus1 != 0 else 0.0
        return abs(self.g_plus1) / abs(self.g_0)

    @property
    def squeezable(self) -> bool:
        return self.ratio < 1.0

    @property
    def r(self) -> float:
        return math.atanh(self.ratio) if self.squeezable else math.inf

    @property
    def g_plus(self) -> complex:
        return self.g_0 + self.g_plus1

    @property
    def g_minus(self) -> complex:
        return self.g_0 - self.g_plus1

    @property
    def g_b(self) -> complex:
        """Bogoliubov coupling sqrt(|g_0|^2 - |g_1|^2) exp(i phi_0); nan when not squeezable."""
        if not self.squeezable:
            return complex(math.nan, math.nan)
        return math.sqrt(abs(self.g_0) ** 2 - abs(self.g_plus1) ** 2) * np.exp(1j * self.phi_0)

    def cooperativity(self, params: PhysicalParams) -> float:
        return 4.0 * abs(self.g_0) ** 2 / (params.kappa * params.gamma_m)

    def to_dict(self) -> Dict:
        return {
            'source': self.source,
            'g_minus1': self.g_minus1,
            'g_0': self.g_0,
            'g_plus1': self.g_plus1,
            'phi_minus1': self.phi_m1,
            'phi_0': self.phi_0,
            'phi_1': self.phi_1,
            'phi_r': self.phi_r,
            'phi_r0': self.phi_r0,
            'phi_r1': self.phi_r1,
            'ratio': self.ratio,
            'r': self.r,
        }

    @classmethod
    def from_ratios(cls, params: PhysicalParams, cooperativity: float, ratio: float,
                    sideband_ratio: float = 0.0, configuration: str = 'momentum') -> 'EffectiveCoupling':
        """
        Couplings specified by C, |g_1|/|g_0| and |g_-1|/|g_1|, phase-matched to the pump.

        'momentum' sets phi_r = pi and phi_r0 = pi; 'position' sets phi_r = 0 and
        phi_r0 = 0. g_-1 shares the phase of g_1.
        """
        if cooperativity <= 0:
            raise ValidationError("cooperativity must be positive", field='cooperativity')
        if ratio < 0 or sideband_ratio < 0:
            raise ValidationError("coupling ratios must be nonnegative", field='ratio')
        magnitude = math.sqrt(cooperativity * params.kappa * params.gamma_m / 4.0)
        if configuration == 'momentum':
            phi_0 = (params.theta - math.pi) / 2.0
            phi_1 = phi_0 + math.pi
        elif configuration == 'position':
            phi_0 = params.theta / 2.0
            phi_1 = phi_0
        else:
            raise ValidationError(f"Unknown phase configuration '{configuration}'", field='configuration')
        g_0 = magnitude * np.exp(1j * phi_0)
        g_1 = ratio * magnitude * np.exp(1j * phi_1)
        g_m1 = sideband_ratio * ratio * magnitude * np.exp(1j * phi_1)
        return cls(complex(g_m1), complex(g_0), complex(g_1), theta=params.theta, source='ratios')


def _resummed_sidebands(tables: FourierCoefficients, g: float) -> Tuple[complex, complex, complex]:
    """(g_-1, g_0, g_1) with g_n = sum_j a_{-n,j} g^{j+1} / sqrt(2)."""
    weights = g ** (np.arange(tables.J + 1) + 1) / math.sqrt(2.0)

    def sideband(n):
        if abs(n) > tables.N:
            return 0j
        return complex(tables.a[-n + tables.N] @ weights)

    return sideband(-1), sideband(0), sideband(1)


def effective_coupling(source: Union[FourierCoefficients, MeanFieldOrbit],
                       params: PhysicalParams) -> EffectiveCoupling:
    """
    Sideband couplings from either the perturbative tables or a numeric orbit.

    Args:
        source: FourierCoefficients (analytic resummation) or MeanFieldOrbit
            (projection of g<a(t)>/sqrt(2) onto exp(-i n Omega t))
        params (PhysicalParams): System parameters

    Returns:
        EffectiveCoupling: g_-1, g_0, g_1
    """
    if isinstance(source, FourierCoefficients):
        coupling = EffectiveCoupling(*_resummed_sidebands(source, params.g), params.theta, 'analytic')
    elif isinstance(source, MeanFieldOrbit):
        G = params.g * source.a / math.sqrt(2.0)

        def sideband(n):
            return complex(np.mean(G * np.exp(1j * n * params.omega_mod * source.t)))

        coupling = EffectiveCoupling(sideband(-1), sideband(0), sideband(1), params.theta, 'numeric')
    else:
        raise ValidationError(f"Unsupported coupling source {type(source).__name__}", field='source')

    if not coupling.squeezable:
        logger.warning(f"|g1|/|g0| = {coupling.ratio:.4g} >= 1: the mechanical mode is not squeezed")
    return coupling


def coupling_discrepancy(first: EffectiveCoupling, second: EffectiveCoupling) -> float:
    """Largest sideband difference relative to |g_0| of the first coupling."""
    scale = abs(first.g_0) or 1.0
    pairs = ((first.g_minus1, second.g_minus1), (first.g_0, second.g_0), (first.g_plus1, second.g_plus1))
    return max(abs(x - y) for x, y in pairs) / scale


def match_drive_phases(params: PhysicalParams, J: int = 6, tol: float = MATCH_TOL) -> PhysicalParams:
    """
    Phase the drive so that g_0 is real and positive and g_1 opposes it.

    Solves arg g_0 = 0 and arg g_1 = pi for the laser phase and the modulation
    phase on the resummed perturbative couplings. At theta = pi this is the
    momentum configuration phi_r = phi_r0 = pi. Without an E_+1 component
    only the laser phase is fixed. Without the OPA both phases are gauge
    choices and leave the lab-frame variances unchanged.

    Args:
        params (PhysicalParams): Parameters with a nonzero drive
        J (int): Perturbation order of the couplings
        tol (float): Accepted phase residual in radians

    Returns:
        PhysicalParams: Copy with `laser_phase` and `modulation_phase` set
    """
    if not params.has_drive:
        return params
    N = max(1, params.max_harmonic)

    def sidebands(laser_phase, modulation_phase):
        trial = params.with_changes(laser_phase=laser_phase, modulation_phase=modulation_phase)
        return _resummed_sidebands(fourier_perturbation_coefficients(trial, J=J, N=N), params.g)

    _, g_0, g_1 = sidebands(params.laser_phase, params.modulation_phase)
    if g_0 == 0:
        raise DegenerateCouplingError("Carrier coupling g_0 vanishes; drive phases cannot be matched")
    # g_1 follows the modulation phase only through E_+1
    has_sideband = 1 in params.drive_phasors
    phi_0 = float(np.angle(g_0))
    seed = [params.laser_phase - phi_0]
    if has_sideband:
        seed.append(params.modulation_phase + wrap_phase(float(np.angle(g_1)) - phi_0 - math.pi))

    def residual(x):
        _, c_0, c_1 = sidebands(x[0], x[1] if has_sideband else params.modulation_phase)
        out = [wrap_phase(float(np.angle(c_0)))]
        if has_sideband:
            out.append(wrap_phase(float(np.angle(c_1)) - math.pi))
        return out

    solution = root(residual, seed, method='hybr', options={'xtol': 1e-12})
    error = float(np.max(np.abs(residual(solution.x))))
    if error > tol:
        raise ConvergenceError(f"Drive phases not matched (phase residual {error:.3e} > {tol:.1e})",
                               residual=error)

    laser_phase = wrap_phase(float(solution.x[0]))
    modulation_phase = wrap_phase(float(solution.x[1])) if has_sideband else params.modulation_phase
    logger.info(f"Matched drive phases: laser {laser_phase:.6f} rad, modulation {modulation_phase:.6f} rad")
    return params.with_changes(laser_phase=laser_phase, modulation_phase=modulation_phase)
