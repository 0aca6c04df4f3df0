import logging
from pathlib import Path

import click
import numpy as np

from commands.common import config_option, handle_errors, output_options, read_scenario, write_report, write_table
from config.config import Config
from simulation.errors import SingularityError, ValidationError
from simulation.meanfield import (MeanFieldState, coupling_discrepancy, detect_periodic_orbit, effective_coupling,
                                  fourier_perturbation_coefficients, integrate_mean_field)

logger = logging.getLogger(__name__)


@click.command('meanfield')
@config_option
@click.option('--settle', type=int, default=Config.SETTLE_PERIODS, show_default=True,
              help='Periods discarded before sampling.')
@click.option('--sample', type=int, default=Config.SAMPLE_PERIODS, show_default=True,
              help='Periods sampled after settling (exported as the window).')
@click.option('--tol', type=float, default=Config.ORBIT_TOL, show_default=True,
              help='Orbit periodicity tolerance.')
@click.option('--grid-size', type=int, default=Config.ORBIT_GRID, show_default=True, help='Samples per period.')
@click.option('--t-end', type=float, default=None,
              help='Also export the transient from rest up to this time.')
@click.option('--coefficients', is_flag=True, help='Export the perturbative Fourier tables.')
@click.option('--order', type=int, default=Config.FOURIER_ORDER, show_default=True,
              help='Perturbative order J of the Fourier tables.')
@output_options
@handle_errors
def meanfield(config_path, settle, sample, tol, grid_size, t_end, coefficients, order, out_dir, fmt):
    """Settle the classical mean field onto its periodic orbit."""
    scenario = read_scenario(config_path)
    params = scenario.params
    click.echo(f"Mean field for scenario '{scenario.name}' (tau = {params.tau:.6g})")

    orbit = detect_periodic_orbit(params, settle_periods=settle, sample_periods=sample, tol=tol,
                                  grid_size=grid_size, max_extensions=Config.MAX_EXTENSIONS,
                                  extension_periods=Config.EXTENSION_PERIODS)
    frame = orbit.to_frame()
    frame['abs_a'] = np.abs(orbit.a)
    write_table(frame, out_dir, 'meanfield_orbit', fmt)
    if orbit.window is not None:
        write_table(orbit.window.to_frame(), out_dir, 'meanfield_window', fmt)

    if t_end is not None:
        if t_end <= 0:
            raise ValidationError("--t-end must be positive", field='t_end')
        t_eval = np.linspace(0.0, t_end, int(np.ceil(t_end / params.tau * 64)) + 1)
        transient = integrate_mean_field(params, MeanFieldState(), t_end,
                                         tol=Config.RTOL, atol=Config.ATOL, t_eval=t_eval)
        write_table(transient.to_frame(), out_dir, 'meanfield_transient', fmt)

    report = {'scenario': scenario.to_dict(), 'orbit': orbit.summary()}
    if params.has_drive:
        numeric = effective_coupling(orbit, params)
        report['coupling'] = numeric.to_dict()
        try:
            tables = fourier_perturbation_coefficients(params, J=order, N=max(1, params.max_harmonic))
            analytic = effective_coupling(tables, params)
            report['coupling_analytic'] = analytic.to_dict()
            report['coupling_discrepancy'] = coupling_discrepancy(numeric, analytic)
            if coefficients:
                write_report(tables.to_json(), out_dir, 'meanfield_coefficients')
        except (SingularityError, ValidationError) as e:
            logger.warning(f"Perturbative tables unavailable: {e}")
            report['coupling_analytic'] = None

    path = write_report(report, out_dir, 'meanfield_report')
    click.echo(f"Orbit residual {orbit.periodicity_residual:.3e} after {orbit.settled_periods} periods")
    click.secho(f"Report written to {Path(path)}", fg='green')
