import itertools
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from simulation.errors import SqueezingError, ValidationError
from simulation.floquet import NoiseDiffusion, periodic_steady_covariance, rotating_crt_drift
from simulation.meanfield import EffectiveCoupling
from simulation.params import PhysicalParams, derived
from simulation.routes import safe_report
from simulation.rwa import momentum_variance_damped, optimal_gain_for

logger = logging.getLogger(__name__)

METHODS = ('lyapunov', 'damped', 'crt')
COUPLING_AXES = ('cooperativity', 'ratio', 'sideband_ratio')
PARAM_AXES = ('kappa', 'gamma_m', 'n_m', 'n_a', 'theta', 'delta0')
AXES = ('lambda_bar',) + COUPLING_AXES + PARAM_AXES
VACUUM_VARIANCE = 0.5


@dataclass(frozen=True)
class CouplingSpec:
    """Couplings described by ratios, resolved against the parameters of each point."""
    cooperativity: float
    ratio: float
    sideband_ratio: float = 0.0
    configuration: str = 'momentum'

    def resolve(self, params: PhysicalParams) -> EffectiveCoupling:
        return EffectiveCoupling.from_ratios(params, self.cooperativity, self.ratio,
                                             self.sideband_ratio, self.configuration)


@dataclass(frozen=True)
class SweepPoint:
    index: int
    values: Dict[str, float]
    params: PhysicalParams
    coupling: CouplingSpec
    method: str
    crt_options: Dict = field(default_factory=dict)


def point_params(base: PhysicalParams, spec: CouplingSpec,
                 values: Dict[str, float]) -> Tuple[PhysicalParams, CouplingSpec]:
    """Apply one grid point; lambda_bar is held fixed when kappa moves unless it is itself an axis."""
    lambda_bar = values.get('lambda_bar', base.lambda_bar)
    changes = {name: values[name] for name in PARAM_AXES if name in values}
    params = base.with_changes(**changes)
    params = params.with_changes(lambda_gain=lambda_bar * params.kappa / 2.0)
    spec = replace(spec, **{name: values[name] for name in COUPLING_AXES if name in values})
    return params, spec


def evaluate_point(point: SweepPoint) -> Dict:
    """One grid row. Unstable or degenerate points give NaN variances and stable=False."""
    params = point.params
    row = dict(point.values)
    row['lambda_bar'] = params.lambda_bar
    row['cooperativity'] = point.coupling.cooperativity
    row['ratio'] = point.coupling.ratio
    coupling = point.coupling.resolve(params)

    var_q, var_p, stable = math.nan, math.nan, False
    try:
        if point.method == 'lyapunov':
            report = safe_report('lyapunov', coupling, params)
            var_q, var_p, stable = report.var_q, report.var_p, report.stable
        elif point.method == 'damped':
            result = momentum_variance_damped(point.coupling.cooperativity, coupling.r, params.lambda_bar,
                                              params.n_m, params.gamma_m / params.kappa)
            stable = params.lambda_bar < 1.0
            var_p = result.var_p if stable else math.nan
        elif point.method == 'crt':
            drift = rotating_crt_drift(coupling, params)
            _, report = periodic_steady_covariance(drift, NoiseDiffusion.rotating(params), **point.crt_options)
            var_q, var_p, stable = report.var_q, report.var_p, report.stable
        else:
            raise ValidationError(f"Unknown sweep method '{point.method}'", field='method')
    except SqueezingError as e:
        if e.exit_code != 3:
            raise
        logger.debug(f"Point {point.index} unstable: {e}")

    row['var_q'] = var_q
    row['var_p'] = var_p
    row['db_p'] = -10.0 * math.log10(var_p / VACUUM_VARIANCE) if var_p > 0 else math.nan
    row['stable'] = stable
    row['squeezed'] = bool(stable and var_p < VACUUM_VARIANCE)

    try:
        quantities = derived(params, coupling)
        gain = optimal_gain_for(coupling, params)
        row['c_tilde'] = quantities.c_tilde
        row['lambda_bar_opt'] = gain.lambda_bar_opt
        row['gain_regime'] = gain.regime.value
    except (SqueezingError, ValueError):
        row['c_tilde'] = math.nan
        row['lambda_bar_opt'] = math.nan
        row['gain_regime'] = ''
    return row


def build_grid(axes: Dict[str, Sequence[float]]) -> List[Dict[str, float]]:
    """Cartesian product of the axes, the last axis varying fastest."""
    for name in axes:
        if name not in AXES:
            raise ValidationError(f"Unknown sweep axis '{name}'; expected one of {', '.join(AXES)}", field='axis')
    names = list(axes)
    return [dict(zip(names, map(float, combo))) for combo in itertools.product(*(axes[n] for n in names))]


def run_sweep(base: PhysicalParams, spec: CouplingSpec, axes: Dict[str, Sequence[float]],
              method: str = 'lyapunov', jobs: Optional[int] = None,
              crt_options: Optional[Dict] = None) -> pd.DataFrame:
    """
    Evaluate a grid of parameter points.

    The grid is the Cartesian product of `axes` applied on top of `base` and
    `spec`. Points are independent and go to a process pool; rows come back
    in grid order.

    Args:
        base (PhysicalParams): Parameters shared by every point
        spec (CouplingSpec): Base coupling specification
        axes (Dict[str, Sequence[float]]): Axis name -> values
        method (str): 'lyapunov', 'damped' or 'crt'
        jobs (int): Worker processes; None uses every available core, 1 runs serially
        crt_options (Dict): Keyword options of periodic_steady_covariance for 'crt'

    Returns:
        pd.DataFrame: One row per grid point in grid order
    """
    if method not in METHODS:
        raise ValidationError(f"Unknown sweep method '{method}'; expected one of {', '.join(METHODS)}",
                              field='method')
    grid = build_grid(axes)
    points = []
    for index, values in enumerate(grid):
        params, point_spec = point_params(base, spec, values)
        points.append(SweepPoint(index, values, params, point_spec, method, dict(crt_options or {})))

    workers = jobs or os.cpu_count() or 1
    logger.info(f"Sweeping {len(points)} points ({method}) with {workers} worker(s)")
    if workers == 1 or len(points) == 1:
        rows = [evaluate_point(p) for p in points]
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(evaluate_point, points, chunksize=max(1, len(points) // (4 * workers))))

    frame = pd.DataFrame(rows)
    leading = list(axes) + [c for c in ('lambda_bar', 'cooperativity', 'ratio') if c not in axes]
    frame = frame[leading + [c for c in frame.columns if c not in leading]]
    logger.info(f"Sweep finished: {int(frame['stable'].sum())}/{len(frame)} stable points")
    return frame


def argmin_along(frame: pd.DataFrame, axis: str, column: str = 'var_p') -> pd.DataFrame:
    """Rows minimizing `column` along `axis` for every combination of the other axes."""
    others = [c for c in frame.columns if c in AXES and c != axis and frame[c].nunique() > 1]
    valid = frame[np.isfinite(frame[column])]
    if not others:
        return valid.loc[[valid[column].idxmin()]]
    return valid.loc[valid.groupby(others)[column].idxmin()]
