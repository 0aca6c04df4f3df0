import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, Iterable, List, Optional

from simulation.bogoliubov import adiabatic_momentum_variance, back_transform_variance, to_bogoliubov
from simulation.errors import ConfigurationError, ConvergenceError, SqueezingError, ValidationError
from simulation.floquet import SqueezingReport
from simulation.meanfield import EffectiveCoupling
from simulation.params import PhysicalParams
from simulation.rwa import analytic_variances, build_tilde_drift, stability_check, steady_covariance
from simulation.spectrum import QuadratureConfig, integrate_variance
from utils.numerics import relative_difference

logger = logging.getLogger(__name__)

ROUTES = ('lyapunov', 'analytic', 'bogoliubov', 'spectrum')


def _lyapunov(coupling: EffectiveCoupling, params: PhysicalParams, **_) -> SqueezingReport:
    stability = stability_check(build_tilde_drift(coupling, params), params.lambda_bar)
    V = steady_covariance(coupling, params)
    return SqueezingReport(
        method='lyapunov',
        var_q=V.var_q,
        var_p=V.var_p,
        stable=True,
        extra={
            'min_mechanical_variance': V.min_mechanical_variance(),
            'physicality_margin': V.physicality_margin(),
            'stability_margin': stability.margin,
            'covariance': V.matrix,
        },
    )


def _analytic(coupling: EffectiveCoupling, params: PhysicalParams, **_) -> SqueezingReport:
    result = analytic_variances(coupling, params)
    report = SqueezingReport(method='analytic', var_q=result.var_q, var_p=result.var_p, stable=True,
                             extra={'norm': result.norm})
    if params.n_a > 0 or params.n_m > 0:
        report.warnings.append("closed form neglects mechanical damping and thermal occupations")
    return report


def _bogoliubov(coupling: EffectiveCoupling, params: PhysicalParams, adiabaticity_ratio: float = 10.0,
                **_) -> SqueezingReport:
    mode = to_bogoliubov(coupling, params.n_m)
    if not mode.momentum_configuration:
        raise ConfigurationError(
            f"Bogoliubov route needs the momentum configuration phi_r = pi (got {coupling.phi_r:.6g})")
    result = adiabatic_momentum_variance(mode, params, adiabaticity_ratio)
    report = SqueezingReport(
        method='bogoliubov',
        var_q=math.nan,
        var_p=back_transform_variance(result.var_pb, mode),
        stable=True,
        extra={
            'var_pB': result.var_pb,
            'damping_rate': result.damping_rate,
            'n_B_minus': mode.n_b_minus,
            'n_B_plus': mode.n_b_plus,
            'adiabatic': result.adiabatic,
        },
    )
    if not result.adiabatic:
        report.warnings.append(f"kappa/|g_B| below {adiabaticity_ratio:g}")
    return report


def _spectrum(coupling: EffectiveCoupling, params: PhysicalParams,
              quadrature: Optional[QuadratureConfig] = None, **_) -> SqueezingReport:
    result = integrate_variance(coupling, params, quadrature or QuadratureConfig())
    return SqueezingReport(
        method='spectrum',
        var_q=result.var_q,
        var_p=result.var_p,
        stable=True,
        residuals={'quadrature_abserr': result.abserr, 'tail_q': result.tail_q, 'tail_p': result.tail_p},
        extra={'integration_width': result.width},
    )


_EVALUATORS = {
    'lyapunov': _lyapunov,
    'analytic': _analytic,
    'bogoliubov': _bogoliubov,
    'spectrum': _spectrum,
}


def evaluate_route(method: str, coupling: EffectiveCoupling, params: PhysicalParams, **options) -> SqueezingReport:
    """
    Steady variances of the rotating-frame RWA model by one route.

    Every route returns a SqueezingReport, so commands and sweeps treat them
    alike.

    Args:
        method (str): One of 'lyapunov', 'analytic', 'bogoliubov', 'spectrum'
        coupling (EffectiveCoupling): Sideband couplings
        params (PhysicalParams): System parameters
        **options: `quadrature` (QuadratureConfig), `adiabaticity_ratio` (float)

    Returns:
        SqueezingReport: Variances, dB values and route-specific extras
    """
    try:
        evaluator = _EVALUATORS[method]
    except KeyError:
        raise ValidationError(f"Unknown method '{method}'; expected one of {', '.join(ROUTES)}", field='method')
    logger.info(f"Evaluating {method} route (lambda_bar={params.lambda_bar:.4g}, ratio={coupling.ratio:.4g})")
    report = evaluator(coupling, params, **options)
    for message in report.warnings:
        logger.warning(f"{method}: {message}")
    return report


@dataclass
class RouteComparison:
    reports: Dict[str, SqueezingReport]
    residuals: Dict[str, float] = field(default_factory=dict)
    skipped: Dict[str, str] = field(default_factory=dict)
    bound: float = math.inf

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    @property
    def within_bound(self) -> bool:
        return self.max_residual <= self.bound

    def to_dict(self) -> Dict:
        return {
            'routes': {name: report.to_dict() for name, report in self.reports.items()},
            'residuals': self.residuals,
            'max_residual': self.max_residual,
            'bound': self.bound,
            'within_bound': self.within_bound,
            'skipped': self.skipped,
        }


def compare_all(coupling: EffectiveCoupling, params: PhysicalParams, bound: float,
                methods: Iterable[str] = ROUTES, **options) -> RouteComparison:
    """
    Run several routes and collect pairwise relative differences of var_p
    (and of var_q where both routes provide it).

    Routes whose preconditions fail are skipped and listed; the lyapunov
    route is required.

    Raises:
        ConvergenceError: If the largest residual exceeds `bound`
    """
    comparison = RouteComparison(reports={}, bound=bound)
    for method in methods:
        try:
            comparison.reports[method] = evaluate_route(method, coupling, params, **options)
        except (ConfigurationError, ValidationError) as e:
            if method == 'lyapunov':
                raise
            logger.warning(f"Skipping {method} route: {e}")
            comparison.skipped[method] = str(e)

    names: List[str] = list(comparison.reports)
    for first, second in combinations(names, 2):
        a, b = comparison.reports[first], comparison.reports[second]
        comparison.residuals[f'{first}-{second}:var_p'] = relative_difference(a.var_p, b.var_p)
        if math.isfinite(a.var_q) and math.isfinite(b.var_q):
            comparison.residuals[f'{first}-{second}:var_q'] = relative_difference(a.var_q, b.var_q)

    logger.info(f"Route comparison: max residual {comparison.max_residual:.3e} (bound {bound:g})")
    if not comparison.within_bound:
        error = ConvergenceError(
            f"Route residual {comparison.max_residual:.3e} exceeds the bound {bound:g}",
            residual=comparison.max_residual)
        error.comparison = comparison
        raise error
    return comparison


def safe_report(method: str, coupling: EffectiveCoupling, params: PhysicalParams, **options) -> SqueezingReport:
    """Like evaluate_route, but an unstable or degenerate point yields a report with stable=False."""
    try:
        return evaluate_route(method, coupling, params, **options)
    except SqueezingError as e:
        if e.exit_code != 3:
            raise
        return SqueezingReport(method=method, var_q=math.nan, var_p=math.nan, stable=False, warnings=[str(e)])
