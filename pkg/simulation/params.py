import logging
import math
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import TYPE_CHECKING, Dict, Mapping, Optional

import numpy as np
from scipy import constants

from simulation.errors import DegenerateCouplingError, ValidationError

if TYPE_CHECKING:
    from simulation.meanfield import EffectiveCoupling

logger = logging.getLogger(__name__)

# CODATA values, used only at the SI boundary
HBAR = constants.hbar
K_B = constants.k
C_LIGHT = constants.c

MARKOVIAN_Q_WARNING = 1e3


@dataclass(frozen=True)
class PhysicalParams:
    """
    Dimensionless system parameters. Every rate is in units of the mechanical
    frequency, which is fixed to 1.

    `drive` maps harmonic index n to the complex amplitude E_n of the
    component E_n e^{-i n Omega t}. The cavity sees E_n exp(i(chi - n psi))
    with chi = `laser_phase` and psi = `modulation_phase`: a common phase of
    the laser relative to the OPA pump and a delay of the modulation.
    """
    kappa: float
    gamma_m: float
    delta0: float
    g: float
    lambda_gain: float = 0.0
    theta: float = math.pi
    omega_mod: float = 2.0
    delta_p: Optional[float] = None
    drive: Mapping[int, complex] = field(default_factory=dict)
    n_a: float = 0.0
    n_m: float = 0.0
    omega_m: float = 1.0
    laser_phase: float = 0.0
    modulation_phase: float = 0.0

    def __post_init__(self):
        if self.omega_m != 1.0:
            raise ValidationError("omega_m is the unit of frequency and must equal 1", field='omega_m')
        for name in ('kappa', 'gamma_m', 'omega_mod'):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValidationError(f"{name} must be positive, got {value}", field=name)
        for name in ('lambda_gain', 'n_a', 'n_m', 'g'):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValidationError(f"{name} must be nonnegative, got {value}", field=name)
        for name in ('delta0', 'theta', 'laser_phase', 'modulation_phase'):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite", field=name)

        drive = {}
        for n, amplitude in dict(self.drive).items():
            amplitude = complex(amplitude)
            if not (math.isfinite(amplitude.real) and math.isfinite(amplitude.imag)):
                raise ValidationError(f"drive E{n} is not finite", field=f'drive.E{n}')
            drive[int(n)] = amplitude
        object.__setattr__(self, 'drive', MappingProxyType(drive))

        if self.delta_p is None:
            object.__setattr__(self, 'delta_p', self.omega_mod / 2.0)

    # mappingproxy does not pickle; worker processes receive a plain dict
    def __getstate__(self):
        state = dict(self.__dict__)
        state['drive'] = dict(self.drive)
        return state

    def __setstate__(self, state):
        state['drive'] = MappingProxyType(state['drive'])
        self.__dict__.update(state)

    @property
    def tau(self) -> float:
        """Modulation period 2 pi / Omega."""
        return 2.0 * math.pi / self.omega_mod

    @property
    def lambda_bar(self) -> float:
        """Normalized parametric gain 2 Lambda / kappa."""
        return 2.0 * self.lambda_gain / self.kappa

    @property
    def max_harmonic(self) -> int:
        active = [abs(n) for n, e in self.drive.items() if e != 0]
        return max(active, default=0)

    @property
    def has_drive(self) -> bool:
        return any(e != 0 for e in self.drive.values())

    @property
    def drive_phasors(self) -> Dict[int, complex]:
        """Nonzero amplitudes as seen by the cavity, E_n exp(i(chi - n psi))."""
        return {n: e * complex(np.exp(1j * (self.laser_phase - n * self.modulation_phase)))
                for n, e in self.drive.items() if e != 0}

    def with_changes(self, **changes) -> 'PhysicalParams':
        """Copy with fields replaced; `delta_p` follows `omega_mod` unless given."""
        if 'omega_mod' in changes and 'delta_p' not in changes:
            changes['delta_p'] = None
        return replace(self, **changes)

    def to_dict(self) -> Dict:
        return {
            'kappa': self.kappa,
            'gamma_m': self.gamma_m,
            'delta0': self.delta0,
            'g': self.g,
            'lambda_gain': self.lambda_gain,
            'lambda_bar': self.lambda_bar,
            'theta': self.theta,
            'omega_mod': self.omega_mod,
            'delta_p': self.delta_p,
            'drive': {f'E{n:+d}' if n else 'E0': e for n, e in sorted(self.drive.items())},
            'laser_phase': self.laser_phase,
            'modulation_phase': self.modulation_phase,
            'n_a': self.n_a,
            'n_m': self.n_m,
        }


@dataclass(frozen=True)
class ExperimentalParams:
    """
    Laboratory parameters in SI units.

    The last four fields are not fixed by the hardware and are given directly
    in dimensionless form: detuning Delta_0/omega_m, gain Lambda/kappa, pump
    phase and modulation frequency Omega/omega_m.
    """
    cavity_length: float
    finesse: float
    laser_wavelength: float
    mirror_mass: float
    mech_freq_hz: float
    quality_factor: float
    temperature: float
    sideband_powers: Mapping[int, float] = field(default_factory=dict)
    detuning_ratio: float = 1.0
    gain_ratio: float = 0.0
    pump_phase: float = math.pi
    modulation_ratio: float = 2.0

    def __post_init__(self):
        for name in ('cavity_length', 'finesse', 'laser_wavelength', 'mirror_mass',
                     'mech_freq_hz', 'quality_factor'):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValidationError(f"{name} must be strictly positive, got {value}", field=name)
        if not math.isfinite(self.temperature) or self.temperature < 0:
            raise ValidationError(f"temperature must be nonnegative, got {self.temperature}",
                                  field='temperature')
        for n, power in dict(self.sideband_powers).items():
            if not math.isfinite(power) or power < 0:
                raise ValidationError(f"sideband power P{n} must be nonnegative, got {power}",
                                      field=f'sideband_powers.P{n}')
        object.__setattr__(self, 'sideband_powers',
                           MappingProxyType({int(n): float(p) for n, p in dict(self.sideband_powers).items()}))

    @property
    def omega_m_si(self) -> float:
        return 2.0 * math.pi * self.mech_freq_hz

    @property
    def kappa_si(self) -> float:
        """Cavity amplitude decay rate pi c / (2 F L) in rad/s."""
        return math.pi * C_LIGHT / (2.0 * self.finesse * self.cavity_length)

    @property
    def gamma_m_si(self) -> float:
        return self.omega_m_si / self.quality_factor

    @property
    def omega_laser_si(self) -> float:
        return 2.0 * math.pi * C_LIGHT / self.laser_wavelength

    @property
    def x_zpf(self) -> float:
        return math.sqrt(HBAR / (2.0 * self.mirror_mass * self.omega_m_si))

    @property
    def g_si(self) -> float:
        """Single-photon coupling x_zpf omega_c / L, with omega_c taken at the laser line."""
        return self.x_zpf * self.omega_laser_si / self.cavity_length


def bose_occupation(energy_ratio: float) -> float:
    """Bose factor 1/(exp(x) - 1); zero for x -> inf (T -> 0)."""
    if math.isinf(energy_ratio) or energy_ratio > 700.0:
        return 0.0
    return 1.0 / math.expm1(energy_ratio)


def from_experimental(exp: ExperimentalParams) -> PhysicalParams:
    """
    Convert laboratory parameters to the dimensionless set.

    Args:
        exp (ExperimentalParams): SI parameters

    Returns:
        PhysicalParams: Rates in units of omega_m
    """
    omega_m = exp.omega_m_si
    if exp.quality_factor < MARKOVIAN_Q_WARNING:
        logger.warning(f"Q = {exp.quality_factor:g} is below {MARKOVIAN_Q_WARNING:g}; "
                       f"the Markovian Brownian-noise limit is questionable")

    kappa_si = exp.kappa_si
    drive = {}
    for n, power in exp.sideband_powers.items():
        amplitude = math.sqrt(2.0 * kappa_si * power / (HBAR * exp.omega_laser_si))
        drive[n] = complex(amplitude / omega_m)

    if exp.temperature == 0:
        n_m = n_a = 0.0
    else:
        n_m = bose_occupation(HBAR * omega_m / (K_B * exp.temperature))
        n_a = bose_occupation(HBAR * exp.omega_laser_si / (K_B * exp.temperature))

    kappa = kappa_si / omega_m
    params = PhysicalParams(
        kappa=kappa,
        gamma_m=exp.gamma_m_si / omega_m,
        delta0=exp.detuning_ratio,
        g=exp.g_si / omega_m,
        lambda_gain=exp.gain_ratio * kappa,
        theta=exp.pump_phase,
        omega_mod=exp.modulation_ratio,
        drive=drive,
        n_a=n_a,
        n_m=n_m,
    )
    logger.info(f"Converted experimental parameters: kappa={params.kappa:.4g}, "
                f"gamma_m={params.gamma_m:.3g}, g={params.g:.3g}, n_m={params.n_m:.4g}")
    return params


def to_si_rates(params: PhysicalParams, mech_freq_hz: float) -> Dict[str, float]:
    """Re-scale the dimensionless rates by omega_m (rad/s)."""
    omega_m = 2.0 * math.pi * mech_freq_hz
    return {
        'kappa': params.kappa * omega_m,
        'gamma_m': params.gamma_m * omega_m,
        'g': params.g * omega_m,
        'delta0': params.delta0 * omega_m,
        'lambda_gain': params.lambda_gain * omega_m,
        'drive': {n: abs(e) * omega_m for n, e in params.drive.items()},
    }


def eta_factor(r: float, n_m: float, gamma_over_kappa: float) -> float:
    """eta = (cosh r - sinh r)^2 / (n_m + 1/2) + gamma_m/kappa."""
    return math.exp(-2.0 * r) / (n_m + 0.5) + gamma_over_kappa


def threshold_cooperativities(eta: float):
    """Reduced cooperativities at which the optimal gain leaves 0 and reaches 1."""
    return 4.0 * (1.0 / eta - 1.0), 8.0 * (2.0 / eta - 1.0)


def optimal_gain_value(c_tilde: float, eta: float) -> float:
    """Unclamped Lambda_bar_opt = (eta/2)(1 + sqrt(1 + C~/eta)) - 1."""
    return 0.5 * eta * (1.0 + math.sqrt(1.0 + c_tilde / eta)) - 1.0


@dataclass(frozen=True)
class DerivedQuantities:
    lambda_bar: float
    cooperativity: float
    c_tilde: float
    eta: float
    lambda_bar_opt: float
    lambda_bar_opt_clamped: bool
    c_tilde_thr: float
    c_tilde_ins: float
    r: float
    quantum_cooperativity: float

    @property
    def tanh_r(self) -> float:
        return math.tanh(self.r)

    @property
    def cooperativity_thr(self) -> float:
        return self.c_tilde_thr / (1.0 - self.tanh_r ** 2)

    @property
    def cooperativity_ins(self) -> float:
        return self.c_tilde_ins / (1.0 - self.tanh_r ** 2)

    def to_dict(self) -> Dict:
        return {
            'lambda_bar': self.lambda_bar,
            'cooperativity': self.cooperativity,
            'c_tilde': self.c_tilde,
            'eta': self.eta,
            'lambda_bar_opt': self.lambda_bar_opt,
            'lambda_bar_opt_clamped': self.lambda_bar_opt_clamped,
            'c_tilde_thr': self.c_tilde_thr,
            'c_tilde_ins': self.c_tilde_ins,
            'cooperativity_thr': self.cooperativity_thr,
            'cooperativity_ins': self.cooperativity_ins,
            'r': self.r,
            'quantum_cooperativity': self.quantum_cooperativity,
        }


def derived(params: PhysicalParams, coupling: 'EffectiveCoupling') -> DerivedQuantities:
    """
    Cooperativities, eta, the optimal gain and its thresholds.

    Args:
        params (PhysicalParams): System parameters
        coupling (EffectiveCoupling): Sideband couplings

    Returns:
        DerivedQuantities: Populated derived set
    """
    g0, g1 = abs(coupling.g_0), abs(coupling.g_plus1)
    if g0 <= g1:
        raise DegenerateCouplingError(f"|g1| = {g1:.6g} >= |g0| = {g0:.6g}: squeeze parameter undefined")

    ratio = g1 / g0
    r = math.atanh(ratio)
    cooperativity = 4.0 * g0 ** 2 / (params.kappa * params.gamma_m)
    c_tilde = cooperativity * (1.0 - ratio ** 2)
    eta = eta_factor(r, params.n_m, params.gamma_m / params.kappa)
    c_thr, c_ins = threshold_cooperativities(eta)
    raw = optimal_gain_value(c_tilde, eta)

    return DerivedQuantities(
        lambda_bar=params.lambda_bar,
        cooperativity=cooperativity,
        c_tilde=c_tilde,
        eta=eta,
        lambda_bar_opt=min(max(raw, 0.0), 1.0),
        lambda_bar_opt_clamped=raw >= 1.0,
        c_tilde_thr=c_thr,
        c_tilde_ins=c_ins,
        r=r,
        quantum_cooperativity=cooperativity / params.n_m if params.n_m > 0 else math.inf,
    )
