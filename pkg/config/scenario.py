import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Union

from dotenv import dotenv_values

from simulation.errors import ConfigurationError, ValidationError
from simulation.meanfield import match_drive_phases
from simulation.params import ExperimentalParams, PhysicalParams, from_experimental
from simulation.sweep import CouplingSpec
from utils.numerics import parse_angle, parse_complex

logger = logging.getLogger(__name__)

FLOAT_KEYS = ('kappa', 'gamma_m', 'delta0', 'g', 'omega_mod', 'delta_p', 'n_a', 'n_m')
GAIN_KEYS = ('lambda', 'lambda_over_kappa', 'lambda_bar')
EXPERIMENTAL_KEYS = ('cavity_length', 'finesse', 'laser_wavelength', 'mirror_mass', 'mech_freq_hz',
                     'quality_factor', 'temperature', 'detuning_ratio', 'gain_ratio', 'modulation_ratio')
COUPLING_KEYS = ('cooperativity', 'ratio', 'sideband_ratio', 'configuration')
DRIVE_KEY = re.compile(r'^drive\.E([+-]?\d+)$')
POWER_KEY = re.compile(r'^experimental\.P([+-]?\d+)$')
DEFAULTS = {'delta0': 1.0, 'g': 0.0}
ANGLE_KEYS = ('theta', 'laser_phase', 'modulation_phase')
PHASE_REFERENCES = ('matched', 'laser')

# Variants of a driven scenario: OPA without modulation, modulation without OPA, both
VARIANTS = ('opa-only', 'mod-only', 'both')


@dataclass(frozen=True)
class Scenario:
    name: str
    params: PhysicalParams
    coupling: Optional[CouplingSpec] = None
    experimental: Optional[ExperimentalParams] = None
    source: Optional[Path] = None
    raw: Dict[str, str] = field(default_factory=dict)
    phase_reference: str = 'matched'

    def to_dict(self) -> Dict:
        out = {'name': self.name, 'params': self.params.to_dict(), 'phase_reference': self.phase_reference}
        if self.coupling is not None:
            out['coupling'] = {
                'cooperativity': self.coupling.cooperativity,
                'ratio': self.coupling.ratio,
                'sideband_ratio': self.coupling.sideband_ratio,
                'configuration': self.coupling.configuration,
            }
        if self.source is not None:
            out['source'] = str(self.source)
        return out


def _number(key: str, text: str) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        raise ValidationError(f"'{key}' must be a number, got '{text}'", field=key)


def _angle(key: str, text: str) -> float:
    try:
        return parse_angle(text)
    except ValueError:
        raise ValidationError(f"'{key}' must be an angle (radians or a multiple of pi), got '{text}'", field=key)


def _complex(key: str, text: str) -> complex:
    try:
        return parse_complex(text)
    except ValueError:
        raise ValidationError(f"'{key}' must be a complex number (re,im or mag@phase), got '{text}'", field=key)


def _experimental(values: Dict[str, str]) -> ExperimentalParams:
    fields, powers = {}, {}
    for key, text in values.items():
        match = POWER_KEY.match(key)
        if match:
            powers[int(match.group(1))] = _number(key, text)
            continue
        name = key.split('.', 1)[1]
        if name == 'pump_phase':
            fields[name] = _angle(key, text)
        elif name in EXPERIMENTAL_KEYS:
            fields[name] = _number(key, text)
        else:
            raise ConfigurationError(f"Unknown experimental key '{key}'")
    missing = [k for k in EXPERIMENTAL_KEYS[:7] if k not in fields]
    if missing:
        raise ConfigurationError(f"Experimental block is missing {', '.join(missing)}")
    return ExperimentalParams(sideband_powers=powers, **fields)


def _coupling(values: Dict[str, str]) -> CouplingSpec:
    fields = {}
    for key, text in values.items():
        name = key.split('.', 1)[1]
        if name not in COUPLING_KEYS:
            raise ConfigurationError(f"Unknown coupling key '{key}'")
        fields[name] = text.strip() if name == 'configuration' else _number(key, text)
    for required in ('cooperativity', 'ratio'):
        if required not in fields:
            raise ConfigurationError(f"Coupling block needs 'coupling.{required}'")
    return CouplingSpec(**fields)


def _gain(values: Dict[str, str], kappa: float) -> Optional[float]:
    gains = [k for k in GAIN_KEYS if k in values]
    if len(gains) > 1:
        raise ConfigurationError(f"Give only one of {', '.join(gains)}")
    if not gains:
        return None
    value = _number(gains[0], values[gains[0]])
    scale = {'lambda': 1.0, 'lambda_over_kappa': kappa, 'lambda_bar': kappa / 2.0}
    return value * scale[gains[0]]


def _physical(values: Dict[str, str], experimental: Optional[ExperimentalParams]) -> PhysicalParams:
    fields, drive = {}, {}
    for key, text in values.items():
        match = DRIVE_KEY.match(key)
        if match:
            drive[int(match.group(1))] = _complex(key, text)
        elif key in FLOAT_KEYS:
            fields[key] = _number(key, text)
        elif key in ANGLE_KEYS:
            fields[key] = _angle(key, text)
        elif key not in GAIN_KEYS and key != 'phase_reference':
            raise ConfigurationError(f"Unknown scenario key '{key}'")

    # plain keys refine the converted laboratory set
    if experimental is not None:
        params = from_experimental(experimental)
        if drive:
            fields['drive'] = {**params.drive, **drive}
        gain = _gain(values, fields.get('kappa', params.kappa))
        if gain is not None:
            fields['lambda_gain'] = gain
        return params.with_changes(**fields) if fields else params

    fields = {**DEFAULTS, **fields}
    for required in ('kappa', 'gamma_m'):
        if required not in fields:
            raise ConfigurationError(f"Scenario needs '{required}'")
    gain = _gain(values, fields['kappa'])
    if gain is not None:
        fields['lambda_gain'] = gain
    return PhysicalParams(drive=drive, **fields)


def _phase_reference(values: Dict[str, str], params: PhysicalParams) -> str:
    reference = values.get('phase_reference', 'matched')
    if reference not in PHASE_REFERENCES:
        raise ConfigurationError(
            f"phase_reference must be one of {', '.join(PHASE_REFERENCES)}, got '{reference}'")
    explicit = [k for k in ('laser_phase', 'modulation_phase') if k in values]
    if reference == 'matched' and explicit:
        raise ConfigurationError(f"{', '.join(explicit)} need phase_reference=laser")
    if reference == 'matched' and params.has_drive and params.g > 0:
        if not math.isclose(params.delta_p, params.omega_mod / 2.0, rel_tol=1e-12):
            raise ConfigurationError("phase_reference=matched needs delta_p = omega_mod / 2; "
                                     "use phase_reference=laser")
    return reference


def _matched(params: PhysicalParams) -> PhysicalParams:
    if not params.has_drive or params.g == 0:
        return params
    return match_drive_phases(params)


def parse_scenario(values: Dict[str, Optional[str]], name: str = 'scenario',
                   source: Optional[Path] = None) -> Scenario:
    """
    Build a Scenario from raw key/value pairs.

    Keys are parameter names (`kappa`, `gamma_m`, `delta0`, `g`, `lambda`,
    `theta`, `omega_mod`, `delta_p`, `n_a`, `n_m`, `drive.E<n>`), optionally an
    `experimental.*` block in SI units and a `coupling.*` block of ratios.
    Plain keys next to an experimental block override the converted values.

    `phase_reference=matched` (the default) phases a driven scenario so the
    carrier coupling is real and the first sideband opposes it;
    `phase_reference=laser` takes the drive as written, rotated by
    `laser_phase` and delayed by `modulation_phase`.

    Args:
        values (Dict[str, str]): Keys and their textual values
        name (str): Scenario name
        source (Path): File the values came from

    Returns:
        Scenario: Parsed parameters and optional coupling specification
    """
    cleaned = {}
    for key, text in values.items():
        if text is None or not str(text).strip():
            raise ValidationError(f"'{key}' has no value", field=key)
        cleaned[key.strip()] = str(text).strip()

    experimental_values = {k: v for k, v in cleaned.items() if k.startswith('experimental.')}
    coupling_values = {k: v for k, v in cleaned.items() if k.startswith('coupling.')}
    plain = {k: v for k, v in cleaned.items() if k not in experimental_values and k not in coupling_values}

    experimental = _experimental(experimental_values) if experimental_values else None
    params = _physical(plain, experimental)
    reference = _phase_reference(plain, params)
    if reference == 'matched':
        params = _matched(params)
    coupling = _coupling(coupling_values) if coupling_values else None
    return Scenario(name=name, params=params, coupling=coupling, experimental=experimental,
                    source=source, raw=cleaned, phase_reference=reference)


def load_scenario(path: Union[str, Path], overrides: Optional[Dict[str, str]] = None) -> Scenario:
    """
    Read a scenario file.

    Args:
        path: File path
        overrides (Dict[str, str]): Keys replacing those in the file

    Returns:
        Scenario: Parsed scenario
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"Scenario file not found: {path}")
    values = dict(dotenv_values(path))
    if overrides:
        values.update(overrides)
    logger.info(f"Loaded scenario {path.name} ({len(values)} keys)")
    return parse_scenario(values, name=path.stem, source=path)


def scenario_variant(params: PhysicalParams, variant: str, rematch: bool = False) -> PhysicalParams:
    """
    'opa-only' keeps the OPA and only the carrier drive E0, 'mod-only' keeps
    the modulated drive and switches the OPA off, 'both' keeps everything.
    With `rematch` the drive phases are matched again for the variant.
    """
    if variant == 'both':
        return params
    if variant == 'opa-only':
        changed = params.with_changes(drive={0: params.drive.get(0, 0j)})
    elif variant == 'mod-only':
        changed = params.with_changes(lambda_gain=0.0)
    else:
        raise ValidationError(f"Unknown variant '{variant}'; expected one of {', '.join(VARIANTS)}",
                              field='scenario')
    return _matched(changed) if rematch else changed
