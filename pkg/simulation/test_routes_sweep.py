from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import matched_coupling, rotating_params
from simulation.errors import ConvergenceError, ValidationError
from simulation.routes import ROUTES, compare_all, evaluate_route, safe_report
from simulation.rwa import momentum_variance_damped, steady_covariance
from simulation.sweep import CouplingSpec, argmin_along, build_grid, point_params, run_sweep
from utils.numerics import axis_values


def cold_point(lambda_bar=0.5):
    params = rotating_params(lambda_bar=lambda_bar)
    return params, matched_coupling(params, cooperativity=1e4, ratio=0.6)


class TestRoutes:
    def test_unknown_method(self):
        params, coupling = cold_point()
        with pytest.raises(ValidationError) as info:
            evaluate_route('montecarlo', coupling, params)
        assert info.value.field == 'method'

    def test_lyapunov_report(self):
        params, coupling = cold_point()
        report = evaluate_route('lyapunov', coupling, params)
        assert report.stable
        assert report.extra['physicality_margin'] >= -1e-8
        assert report.extra['min_mechanical_variance'] <= report.var_p
        assert report.db_p > 0

    def test_analytic_warns_about_thermal_noise(self):
        params = rotating_params(lambda_bar=0.5, n_m=10.0)
        report = evaluate_route('analytic', matched_coupling(params), params)
        assert report.warnings

    def test_routes_agree_at_zero_temperature(self):
        params, coupling = cold_point()
        comparison = compare_all(coupling, params, bound=0.1)
        assert set(comparison.reports) == set(ROUTES)
        assert comparison.within_bound
        assert 'lyapunov-spectrum:var_q' in comparison.residuals
        assert 'lyapunov-bogoliubov:var_q' not in comparison.residuals
        assert comparison.residuals['lyapunov-spectrum:var_p'] < 1e-5

    def test_position_configuration_skips_bogoliubov(self):
        params = rotating_params(lambda_bar=0.5, theta=0.0)
        coupling = matched_coupling(params, configuration='position')
        comparison = compare_all(coupling, params, bound=0.1, methods=('lyapunov', 'analytic', 'bogoliubov'))
        assert 'bogoliubov' in comparison.skipped
        assert set(comparison.reports) == {'lyapunov', 'analytic'}

    def test_bound_exceeded_keeps_comparison(self):
        params, coupling = cold_point()
        with pytest.raises(ConvergenceError) as info:
            compare_all(coupling, params, bound=1e-15, methods=('lyapunov', 'analytic'))
        comparison = info.value.comparison
        assert not comparison.within_bound
        assert comparison.to_dict()['max_residual'] == info.value.residual

    def test_safe_report_on_unstable_gain(self):
        params, coupling = cold_point(lambda_bar=1.2)
        report = safe_report('lyapunov', coupling, params)
        assert not report.stable
        assert math.isnan(report.var_p)
        assert report.db_p is None


class TestGrid:
    def test_last_axis_fastest(self):
        grid = build_grid({'lambda_bar': [0.0, 0.5], 'ratio': [0.2, 0.4, 0.6]})
        assert [(p['lambda_bar'], p['ratio']) for p in grid[:4]] == [(0.0, 0.2), (0.0, 0.4), (0.0, 0.6), (0.5, 0.2)]
        assert len(grid) == 6

    def test_unknown_axis(self):
        with pytest.raises(ValidationError):
            build_grid({'temperature': [1.0]})

    def test_lambda_bar_follows_kappa(self):
        base = rotating_params(lambda_bar=0.6)
        params, spec = point_params(base, CouplingSpec(1e4, 0.6), {'kappa': 0.2, 'ratio': 0.3})
        assert params.kappa == 0.2
        assert params.lambda_bar == pytest.approx(0.6)
        assert spec.ratio == 0.3


class TestSweep:
    def test_single_point_matches_lyapunov(self):
        base, spec = rotating_params(), CouplingSpec(1e4, 0.6)
        frame = run_sweep(base, spec, {'lambda_bar': [0.5]}, jobs=1)
        params, coupling = cold_point(0.5)
        assert frame.loc[0, 'var_p'] == pytest.approx(steady_covariance(coupling, params).var_p, rel=1e-12)
        assert bool(frame.loc[0, 'stable'])
        assert list(frame.columns[:3]) == ['lambda_bar', 'cooperativity', 'ratio']

    def test_unstable_points_are_kept(self):
        frame = run_sweep(rotating_params(), CouplingSpec(1e4, 0.6), {'lambda_bar': [0.5, 1.2]}, jobs=1)
        assert list(frame['stable']) == [True, False]
        assert np.isnan(frame.loc[1, 'var_p'])
        assert not frame.loc[1, 'squeezed']

    def test_damped_method(self):
        base = rotating_params(n_m=100.0)
        frame = run_sweep(base, CouplingSpec(5e4, 0.4), {'lambda_bar': [0.0, 0.99]}, method='damped', jobs=1)
        expected = [momentum_variance_damped(5e4, math.atanh(0.4), lb, 100.0, 1e-5).var_p for lb in (0.0, 0.99)]
        np.testing.assert_allclose(frame['var_p'], expected, rtol=1e-12)
        assert frame['var_p'].iloc[0] == pytest.approx(0.219574, abs=1e-6)

    def test_unknown_method(self):
        with pytest.raises(ValidationError):
            run_sweep(rotating_params(), CouplingSpec(1e4, 0.6), {'lambda_bar': [0.5]}, method='bogoliubov')

    def test_argmin_near_optimal_gain(self):
        base = rotating_params(n_m=100.0)
        frame = run_sweep(base, CouplingSpec(5e3, 0.6), {'lambda_bar': axis_values('0:0.9:91')}, jobs=1)
        best = argmin_along(frame, 'lambda_bar')
        assert len(best) == 1
        assert best['lambda_bar'].iloc[0] == pytest.approx(0.4148, abs=0.011)
        assert best['gain_regime'].iloc[0] == 'interior_optimum'

    def test_argmin_per_ratio(self):
        frame = run_sweep(rotating_params(n_m=100.0), CouplingSpec(5e3, 0.6),
                          {'ratio': [0.4, 0.6], 'lambda_bar': axis_values('0:0.9:10')}, jobs=1)
        assert list(argmin_along(frame, 'lambda_bar')['ratio']) == [0.4, 0.6]

    def test_process_pool_preserves_order(self):
        axes = {'lambda_bar': [0.0, 0.3, 0.6, 0.9]}
        serial = run_sweep(rotating_params(), CouplingSpec(1e4, 0.6), axes, jobs=1)
        pooled = run_sweep(rotating_params(), CouplingSpec(1e4, 0.6), axes, jobs=2)
        np.testing.assert_allclose(pooled['var_p'], serial['var_p'], rtol=1e-12)
