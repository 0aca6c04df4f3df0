import logging

import click

from commands.common import (config_option, echo_variances, handle_errors, output_options, read_scenario,
                             write_report, write_table)
from config.config import Config
from config.scenario import VARIANTS, scenario_variant
from simulation.floquet import (CovarianceMatrix, NoiseDiffusion, SqueezingReport, lab_drift,
                                periodic_steady_covariance, rotating_crt_drift)
from simulation.meanfield import detect_periodic_orbit, effective_coupling, fourier_perturbation_coefficients
from simulation.rwa import steady_lyapunov

logger = logging.getLogger(__name__)


def _coupling_for(scenario, params, source: str):
    if scenario.coupling is not None:
        return scenario.coupling.resolve(params)
    if source == 'numeric':
        orbit = detect_periodic_orbit(params, settle_periods=Config.SETTLE_PERIODS, tol=Config.ORBIT_TOL,
                                      grid_size=Config.ORBIT_GRID)
        return effective_coupling(orbit, params)
    tables = fourier_perturbation_coefficients(params, J=Config.FOURIER_ORDER, N=max(1, params.max_harmonic))
    return effective_coupling(tables, params)


@click.command('floquet')
@config_option
@click.option('--scenario', 'variant', type=click.Choice(VARIANTS), default='both', show_default=True,
              help='Keep the OPA, the modulation, or both.')
@click.option('--frame', type=click.Choice(['lab', 'crt']), default='lab', show_default=True,
              help='Lab frame on the mean-field orbit, or rotating frame with counter-rotating terms.')
@click.option('--strategy', type=click.Choice(['settle', 'monodromy']), default='settle', show_default=True,
              help='Settle by propagation or solve the one-period fixed point.')
@click.option('--settle', type=int, default=Config.COVARIANCE_SETTLE_PERIODS, show_default=True,
              help='Covariance settling periods.')
@click.option('--tol', type=float, default=Config.COVARIANCE_TOL, show_default=True,
              help='Periodicity tolerance of the covariance.')
@click.option('--grid-size', type=int, default=Config.ORBIT_GRID, show_default=True, help='Samples per period.')
@click.option('--coupling-source', type=click.Choice(['analytic', 'numeric']), default='analytic',
              show_default=True, help="Sideband couplings for --frame crt when the scenario gives none.")
@output_options
@handle_errors
def floquet(config_path, variant, frame, strategy, settle, tol, grid_size, coupling_source, out_dir, fmt):
    """Periodic steady-state covariance of the fluctuations."""
    scenario = read_scenario(config_path)
    params = scenario_variant(scenario.params, variant, rematch=scenario.phase_reference == 'matched')
    click.echo(f"Floquet steady state for '{scenario.name}' ({variant}, {frame} frame, {strategy})")

    report_extra = {'scenario': scenario.to_dict(), 'variant': variant, 'frame': frame}
    if frame == 'lab':
        orbit = detect_periodic_orbit(params, settle_periods=Config.SETTLE_PERIODS, tol=Config.ORBIT_TOL,
                                      grid_size=grid_size, max_extensions=Config.MAX_EXTENSIONS,
                                      extension_periods=Config.EXTENSION_PERIODS)
        report_extra['orbit'] = orbit.summary()
        drift = lab_drift(params, orbit)
        diffusion = NoiseDiffusion.lab(params)
        V0 = CovarianceMatrix.thermal(params)
    else:
        coupling = _coupling_for(scenario, params, coupling_source)
        report_extra['coupling'] = coupling.to_dict()
        drift = rotating_crt_drift(coupling, params)
        diffusion = NoiseDiffusion.rotating(params)
        V0 = CovarianceMatrix.thermal(params)

    if drift.is_constant:
        logger.info("Drift is time independent; solving the stationary Lyapunov equation")
        V = steady_lyapunov(drift, diffusion)
        report = SqueezingReport(method=f'lyapunov-{drift.frame}', var_q=V.var_q, var_p=V.var_p, stable=True,
                                 extra={'min_rotated_variance': V.min_mechanical_variance()})
    else:
        trajectory, report = periodic_steady_covariance(
            drift, diffusion, settle_periods=settle, tol=tol, V0=V0, grid_size=grid_size,
            check_periods=Config.CHECK_PERIODS, strategy=strategy, max_extensions=Config.MAX_EXTENSIONS,
            extension_periods=Config.EXTENSION_PERIODS, rtol=Config.RTOL, atol=Config.ATOL)
        write_table(trajectory.to_frame(), out_dir, 'floquet_covariance', fmt)

    report.extra.update(report_extra)
    write_report(report.to_dict(), out_dir, 'floquet_report')
    echo_variances('Minimum over period', report.var_q, report.var_p, report.db_q, report.db_p)
