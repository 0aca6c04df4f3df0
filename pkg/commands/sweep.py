import logging

import click

from commands.common import handle_errors, output_options, write_table
from commands.rwa import base_scenario
from config.config import Config
from simulation.errors import ConfigurationError, ValidationError
from simulation.sweep import AXES, METHODS, argmin_along, run_sweep
from utils.numerics import axis_values

logger = logging.getLogger(__name__)


def parse_axes(specs):
    """`name=start:stop:count` or `name=v1,v2,...` pairs, in the given order."""
    axes = {}
    for spec in specs:
        if '=' not in spec:
            raise ValidationError(f"Axis '{spec}' must read name=values", field='axis')
        name, values = (part.strip() for part in spec.split('=', 1))
        if name in axes:
            raise ValidationError(f"Axis '{name}' given twice", field='axis')
        try:
            axes[name] = axis_values(values)
        except ValueError as e:
            raise ValidationError(str(e), field='axis')
    return axes


@click.command('sweep')
@click.option('-c', '--config', 'config_path', default=None,
              help='Scenario file or preset name (built-in defaults when omitted).')
@click.option('-a', '--axis', 'axis_specs', multiple=True, required=True,
              help=f"name=start:stop:count or name=v1,v2; names: {', '.join(AXES)}.")
@click.option('--method', type=click.Choice(METHODS), default='lyapunov', show_default=True,
              help='Steady-state route evaluated at every point.')
@click.option('-j', '--jobs', type=int, default=None, help='Worker processes (default: all cores).')
@click.option('--argmin', 'argmin_axis', default=None,
              help='Also export the points minimizing var_p along this axis.')
@output_options
@handle_errors
def sweep(config_path, axis_specs, method, jobs, argmin_axis, out_dir, fmt):
    """Evaluate a parameter grid."""
    scenario = base_scenario(config_path)
    if scenario.coupling is None:
        raise ConfigurationError("Sweeps need a scenario with a coupling.* block")
    axes = parse_axes(axis_specs)
    if argmin_axis is not None and argmin_axis not in axes:
        raise ValidationError(f"--argmin axis '{argmin_axis}' is not swept", field='argmin')
    if jobs is not None and jobs < 1:
        raise ValidationError("--jobs must be at least 1", field='jobs')

    crt_options = {'settle_periods': Config.COVARIANCE_SETTLE_PERIODS, 'tol': Config.COVARIANCE_TOL,
                   'strategy': 'monodromy', 'rtol': Config.RTOL, 'atol': Config.ATOL}
    frame = run_sweep(scenario.params, scenario.coupling, axes, method=method, jobs=jobs,
                      crt_options=crt_options)
    write_table(frame, out_dir, 'sweep', fmt)
    if argmin_axis is not None:
        write_table(argmin_along(frame, argmin_axis), out_dir, 'sweep_argmin', fmt)
    click.echo(f"{len(frame)} points, {int(frame['squeezed'].sum())} squeezed below vacuum")
