import logging
from dataclasses import replace

import click
import numpy as np

from commands.common import (echo_variances, handle_errors, output_options, read_scenario, write_report,
                             write_table)
from config.config import Config
from config.scenario import parse_scenario
from simulation.errors import ConfigurationError, ConvergenceError, SqueezingError
from simulation.meanfield import effective_coupling, fourier_perturbation_coefficients
from simulation.params import derived, to_si_rates
from simulation.routes import ROUTES, compare_all, evaluate_route
from simulation.rwa import optimal_gain_for
from simulation.spectrum import QuadratureConfig, spectra

logger = logging.getLogger(__name__)


def base_scenario(config_path):
    if config_path:
        return read_scenario(config_path)
    return parse_scenario(Config.RWA_BASE, name='default')


def resolve_point(scenario, ratio=None, lambda_bar=None, cooperativity=None, sideband_ratio=None,
                  configuration=None, n_m=None):
    """Parameters and couplings of a scenario with command-line overrides applied."""
    params = scenario.params
    if n_m is not None:
        params = params.with_changes(n_m=n_m)
    if lambda_bar is not None:
        params = params.with_changes(lambda_gain=lambda_bar * params.kappa / 2.0)

    spec = scenario.coupling
    overrides = {k: v for k, v in (('ratio', ratio), ('cooperativity', cooperativity),
                                   ('sideband_ratio', sideband_ratio), ('configuration', configuration))
                 if v is not None}
    if spec is None:
        if overrides:
            raise ConfigurationError("Coupling overrides need a scenario with a coupling.* block")
        tables = fourier_perturbation_coefficients(params, J=Config.FOURIER_ORDER, N=max(1, params.max_harmonic))
        return params, None, effective_coupling(tables, params)
    spec = replace(spec, **overrides)
    return params, spec, spec.resolve(params)


@click.command('rwa')
@click.option('-c', '--config', 'config_path', default=None,
              help='Scenario file or preset name (built-in defaults when omitted).')
@click.option('--method', type=click.Choice(ROUTES), default='lyapunov', show_default=True,
              help='Evaluation route.')
@click.option('--ratio', type=float, default=None, help='tanh r = |g1|/|g0|.')
@click.option('--lambda-bar', type=float, default=None, help='Normalized gain 2 Lambda / kappa.')
@click.option('--cooperativity', type=float, default=None, help='C = 4|g0|^2 / (kappa gamma_m).')
@click.option('--sideband-ratio', type=float, default=None, help='|g-1| / |g1|.')
@click.option('--configuration', type=click.Choice(['momentum', 'position']), default=None,
              help='Phase configuration of the couplings.')
@click.option('--n-m', type=float, default=None, help='Thermal phonon number.')
@click.option('--compare-all', 'compare_all_routes', is_flag=True, help='Run every route and report pairwise residuals.')
@click.option('--bound', type=float, default=Config.COMPARE_BOUND, show_default=True,
              help='Largest accepted relative residual for --compare-all.')
@click.option('--spectrum-grid', type=int, default=None,
              help='With --method spectrum, also export S_q and S_p on this many frequencies.')
@output_options
@handle_errors
def rwa(config_path, method, ratio, lambda_bar, cooperativity, sideband_ratio, configuration, n_m,
        compare_all_routes, bound, spectrum_grid, out_dir, fmt):
    """Rotating-frame steady state under the rotating wave approximation."""
    scenario = base_scenario(config_path)
    params, spec, coupling = resolve_point(scenario, ratio, lambda_bar, cooperativity, sideband_ratio,
                                           configuration, n_m)
    click.echo(f"RWA steady state for '{scenario.name}': lambda_bar = {params.lambda_bar:.6g}, "
               f"tanh r = {coupling.ratio:.6g}, C = {coupling.cooperativity(params):.6g}")

    context = {'scenario': scenario.to_dict(), 'params': params.to_dict(), 'coupling': coupling.to_dict()}
    try:
        context['derived'] = derived(params, coupling).to_dict()
        gain = optimal_gain_for(coupling, params)
        context['gain_regime'] = gain.regime.value
    except (SqueezingError, ValueError) as e:
        logger.warning(f"Derived quantities unavailable: {e}")
    if scenario.experimental is not None:
        context['si_rates'] = to_si_rates(params, scenario.experimental.mech_freq_hz)

    options = {'quadrature': QuadratureConfig(width_factor=Config.QUADRATURE_WIDTH_FACTOR,
                                              epsrel=Config.QUADRATURE_EPSREL),
               'adiabaticity_ratio': Config.ADIABATICITY_RATIO}

    if compare_all_routes:
        try:
            comparison = compare_all(coupling, params, bound, **options)
        except ConvergenceError as e:
            if hasattr(e, 'comparison'):
                write_report({**context, **e.comparison.to_dict()}, out_dir, 'rwa_compare')
            raise
        write_report({**context, **comparison.to_dict()}, out_dir, 'rwa_compare')
        for name, report in comparison.reports.items():
            echo_variances(name, report.var_q, report.var_p, report.db_q, report.db_p)
        click.echo(f"Max pairwise residual {comparison.max_residual:.3e} (bound {bound:g})")
        return

    report = evaluate_route(method, coupling, params, **options)
    write_report({**context, **report.to_dict()}, out_dir, 'rwa_report')
    echo_variances(method, report.var_q, report.var_p, report.db_q, report.db_p)

    if method == 'spectrum' and spectrum_grid:
        width = 5.0 * max(params.kappa, abs(coupling.g_0), params.gamma_m)
        grid = np.linspace(-width, width, spectrum_grid)
        write_table(spectra(grid, coupling, params).to_frame(), out_dir, 'rwa_spectrum', fmt)
