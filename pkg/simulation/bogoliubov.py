import logging
import math
from dataclasses import dataclass

from simulation.errors import DegenerateCouplingError, ValidationError
from simulation.meanfield import EffectiveCoupling
from simulation.params import PhysicalParams
from utils.numerics import wrap_phase

logger = logging.getLogger(__name__)

ADIABATICITY_RATIO = 10.0
MOMENTUM_PHASE_TOL = 1e-6
THERMAL_WEIGHTS = ('quadrature', 'occupation')


@dataclass(frozen=True)
class BogoliubovMode:
    """
    Mechanical mode rotated into dB = db~ cosh r + exp(i phi_r) db~^+ sinh r,
    which couples to the cavity through g_B alone.
    """
    r: float
    phi_r: float
    g_b: complex
    n_b_minus: float
    n_b_plus: float

    @property
    def momentum_configuration(self) -> bool:
        return abs(wrap_phase(self.phi_r - math.pi)) <= MOMENTUM_PHASE_TOL


def to_bogoliubov(coupling: EffectiveCoupling, n_m: float) -> BogoliubovMode:
    """
    Bogoliubov transform of the mechanical mode.

    Args:
        coupling (EffectiveCoupling): Sideband couplings, |g_1| < |g_0|
        n_m (float): Thermal phonon number

    Returns:
        BogoliubovMode: r, phi_r, g_B and the noise occupations
    """
    if not coupling.squeezable:
        raise DegenerateCouplingError(
            f"|g1|/|g0| = {coupling.ratio:.6g} >= 1: Bogoliubov transform undefined")
    if n_m < 0:
        raise ValidationError("n_m must be nonnegative", field='n_m')
    r = coupling.r
    sinh_sq, cosh_sq = math.sinh(r) ** 2, math.cosh(r) ** 2
    return BogoliubovMode(
        r=r,
        phi_r=coupling.phi_r,
        g_b=coupling.g_b,
        n_b_minus=(n_m + 1.0) * sinh_sq + n_m * cosh_sq,
        n_b_plus=(n_m + 1.0) * cosh_sq + n_m * sinh_sq,
    )


@dataclass(frozen=True)
class AdiabaticResult:
    var_pb: float
    damping_rate: float
    adiabatic: bool


def adiabatic_momentum_variance(mode: BogoliubovMode, params: PhysicalParams,
                                adiabaticity_ratio: float = ADIABATICITY_RATIO,
                                thermal_weight: str = 'quadrature') -> AdiabaticResult:
    """
    Steady Bogoliubov "momentum" variance after adiabatic elimination of the cavity.

    The momentum couples only to the amplified-damped cavity quadrature and
    relaxes at |g_B|^2 / (kappa (1 + lambda_bar)) + gamma_m / 2. Mechanical
    noise reaches it with weight exp(2r). With `thermal_weight='occupation'`
    the noise is averaged over both quadratures (weight cosh 2r) and the
    gamma_m / 2 relaxation is dropped.

    Args:
        mode (BogoliubovMode): Transformed mechanical mode
        params (PhysicalParams): System parameters, lambda_bar < 1
        adiabaticity_ratio (float): Required kappa / |g_B|
        thermal_weight (str): 'quadrature' or 'occupation'

    Returns:
        AdiabaticResult: variance, relaxation rate and the adiabaticity flag
    """
    if thermal_weight not in THERMAL_WEIGHTS:
        raise ValidationError(f"Unknown thermal weight '{thermal_weight}'", field='thermal_weight')
    lambda_bar = params.lambda_bar
    if lambda_bar >= 1.0:
        raise ValidationError(f"lambda_bar = {lambda_bar:.4g} must stay below 1", field='lambda_bar')
    g_b_sq = abs(mode.g_b) ** 2
    if g_b_sq == 0:
        raise DegenerateCouplingError("Vanishing Bogoliubov coupling: no cooling of the Bogoliubov mode")

    gain = 1.0 + lambda_bar
    adiabatic = params.kappa >= adiabaticity_ratio * math.sqrt(g_b_sq)
    if not adiabatic:
        logger.warning(f"kappa/|g_B| = {params.kappa / math.sqrt(g_b_sq):.3g} is below "
                       f"{adiabaticity_ratio:g}; adiabatic elimination is inaccurate")

    cavity_rate = g_b_sq / (params.kappa * gain)
    if thermal_weight == 'quadrature':
        rate, weight = cavity_rate + params.gamma_m / 2.0, math.exp(2.0 * mode.r)
    else:
        rate, weight = cavity_rate, math.cosh(2.0 * mode.r)
    thermal = params.gamma_m * weight * (params.n_m + 0.5) / (2.0 * rate)
    optical = cavity_rate * (2.0 * params.n_a + 1.0) / (2.0 * gain * rate)
    return AdiabaticResult(var_pb=thermal + optical, damping_rate=rate, adiabatic=adiabatic)


def back_transform_variance(var_pb: float, mode: BogoliubovMode) -> float:
    """Momentum variance of the original mode, (cosh r - sinh r)^2 var_pB."""
    if not mode.momentum_configuration:
        raise ValidationError(f"Back transform needs phi_r = pi (got {mode.phi_r:.6g})", field='phi_r')
    return math.exp(-2.0 * mode.r) * var_pb
