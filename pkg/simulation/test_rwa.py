from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from conftest import matched_coupling, rotating_params
from simulation.errors import DegenerateCouplingError, InstabilityError, ValidationError
from simulation.floquet import DriftMatrix, NoiseDiffusion
from simulation.meanfield import EffectiveCoupling
from simulation.params import eta_factor
from simulation.rwa import (GainRegime, analytic_variances, build_tilde_drift, momentum_variance_damped,
                            optimal_gain, optimal_gain_for, stability_check, steady_covariance, steady_lyapunov)


class TestDrift:
    def test_hurwitz_below_threshold(self):
        params = rotating_params(lambda_bar=0.6)
        result = stability_check(build_tilde_drift(matched_coupling(params), params), params.lambda_bar)
        assert result.stable
        assert result.margin > 0
        assert result.gain_below_threshold

    def test_unstable_above_threshold(self):
        params = rotating_params(lambda_bar=1.05)
        result = stability_check(build_tilde_drift(matched_coupling(params), params), params.lambda_bar)
        assert not result.stable
        assert result.gain_below_threshold is False

    def test_lyapunov_rejects_unstable_gain(self):
        params = rotating_params(lambda_bar=1.05)
        with pytest.raises(InstabilityError) as info:
            steady_covariance(matched_coupling(params), params)
        assert all(e.real >= 0 for e in info.value.eigenvalues)


class TestAnalyticVariances:
    def test_momentum_configuration_value(self):
        params = rotating_params(lambda_bar=0.6)
        result = analytic_variances(matched_coupling(params, ratio=0.6), params)
        # exp(-2r) / (2 (1 + lambda_bar)) with tanh r = 0.6
        assert result.var_p == pytest.approx(0.078125, rel=1e-12)
        assert result.var_q == pytest.approx(5.0, rel=1e-12)

    def test_position_configuration_swaps_quadratures(self):
        params = rotating_params(lambda_bar=0.6, theta=0.0)
        result = analytic_variances(matched_coupling(params, ratio=0.6, configuration='position'), params)
        assert result.var_q == pytest.approx(0.078125, rel=1e-12)
        assert result.var_p == pytest.approx(5.0, rel=1e-12)

    def test_degenerate_normalization(self):
        params = rotating_params()
        with pytest.raises(DegenerateCouplingError):
            analytic_variances(EffectiveCoupling(0j, 0.01 + 0j, -0.01 + 0j), params)

    @pytest.mark.parametrize('configuration,theta', [('momentum', math.pi), ('position', 0.0)])
    @pytest.mark.parametrize('lambda_bar', [0.0, 0.3, 0.6, 0.9])
    def test_lyapunov_reaches_closed_form_without_damping(self, configuration, theta, lambda_bar):
        params = rotating_params(gamma_m=1e-10, lambda_bar=lambda_bar, theta=theta)
        coupling = matched_coupling(params, cooperativity=4e7, ratio=0.6, configuration=configuration)
        exact = steady_covariance(coupling, params)
        closed = analytic_variances(coupling, params)
        assert exact.var_q == pytest.approx(closed.var_q, rel=1e-4)
        assert exact.var_p == pytest.approx(closed.var_p, rel=1e-4)


class TestSteadyCovariance:
    @pytest.mark.parametrize('lambda_bar', [0.0, 0.5, 0.9])
    @pytest.mark.parametrize('n_m', [0.0, 100.0])
    def test_uncertainty_relation(self, lambda_bar, n_m):
        params = rotating_params(lambda_bar=lambda_bar, n_m=n_m)
        V = steady_covariance(matched_coupling(params, cooperativity=5e4, ratio=0.4), params)
        assert V.var_q * V.var_p >= 0.25
        assert V.physicality_margin() >= -1e-8

    def test_random_stable_points_are_physical(self):
        rng = np.random.default_rng(2024)
        for _ in range(25):
            params = rotating_params(lambda_bar=rng.uniform(0.0, 0.95), n_m=rng.uniform(0.0, 50.0),
                                     theta=rng.uniform(-math.pi, math.pi))
            coupling = matched_coupling(params, cooperativity=10 ** rng.uniform(2.0, 5.0),
                                        ratio=rng.uniform(0.1, 0.8), sideband_ratio=rng.uniform(0.0, 0.5))
            V = steady_covariance(coupling, params)
            assert V.var_q * V.var_p >= 0.25
            assert V.min_mechanical_variance() > 0

    def test_residual_of_solution(self):
        params = rotating_params(lambda_bar=0.4, n_m=10.0, theta=1.1)
        coupling = matched_coupling(params, cooperativity=3e3, ratio=0.5, sideband_ratio=0.2)
        drift = build_tilde_drift(coupling, params)
        D = NoiseDiffusion.rotating(params).matrix
        V = steady_lyapunov(drift, D).matrix
        M = drift.constant
        np.testing.assert_allclose(M @ V + V @ M.T, -D, atol=1e-10)

    def test_damped_momentum_variance_near_instability(self):
        params = rotating_params(lambda_bar=0.99, n_m=100.0)
        V = steady_covariance(matched_coupling(params, cooperativity=5e4, ratio=0.4), params)
        damped = momentum_variance_damped(5e4, math.atanh(0.4), 0.99, 100.0, 1e-5)
        assert V.var_p == pytest.approx(0.117457, rel=5e-3)
        assert damped.var_p == pytest.approx(V.var_p, rel=5e-3)


class TestDampedVariance:
    @pytest.mark.parametrize('tanh_r,lambda_bar,expected', [
        (0.4, 0.0, 0.219574),
        (0.4, 0.99, 0.117457),
        (0.6, 0.0, 0.131784),
        (0.6, 0.99, 0.075566),
    ])
    def test_reference_values(self, tanh_r, lambda_bar, expected):
        result = momentum_variance_damped(5e4, math.atanh(tanh_r), lambda_bar, 100.0, 1e-5)
        assert result.var_p == pytest.approx(expected, abs=1e-6)
        assert result.valid

    def test_validity_flag(self, caplog):
        result = momentum_variance_damped(20.0, math.atanh(0.6), 0.9, 0.0, 1e-5)
        assert not result.valid
        assert 'validity' in caplog.text

    def test_squeezing_improves_with_gain(self):
        values = [momentum_variance_damped(5e4, math.atanh(0.4), lb, 100.0, 1e-5).var_p
                  for lb in (0.0, 0.5, 0.99)]
        assert values[0] > values[1] > values[2]


class TestOptimalGain:
    ETA = eta_factor(math.atanh(0.6), 100.0, 1e-5)

    @pytest.mark.parametrize('c_tilde,regime,value', [
        (1e3, GainRegime.BELOW_THRESHOLD, 0.0),
        (1e4, GainRegime.GAIN_SATURATED, 1.0),
    ])
    def test_clamped_regimes(self, c_tilde, regime, value):
        result = optimal_gain(c_tilde, self.ETA)
        assert result.regime is regime
        assert result.lambda_bar_opt == value

    def test_interior_optimum(self):
        result = optimal_gain(3200.0, self.ETA)
        assert result.regime is GainRegime.INTERIOR_OPTIMUM
        assert result.lambda_bar_opt == pytest.approx(0.5 * math.sqrt(3200.0 * self.ETA) - 1.0, abs=1e-6)
        assert result.unclamped == pytest.approx(0.4148, abs=1e-4)
        assert result.c_tilde_thr < 3200.0 < result.c_tilde_ins

    def test_matches_bounded_search_of_variance(self):
        c_tilde = 3200.0
        r = math.atanh(0.6)
        numeric = minimize_scalar(lambda lb: momentum_variance_damped(c_tilde / 0.64, r, lb, 100.0, 1e-5).var_p,
                                  bounds=(0.0, 0.99), method='bounded', options={'xatol': 1e-9})
        assert optimal_gain(c_tilde, self.ETA).lambda_bar_opt == pytest.approx(numeric.x, abs=1e-6)

    def test_stationary_at_random_interior_points(self):
        rng = np.random.default_rng(7)
        h = 1e-4
        for _ in range(10):
            r = math.atanh(rng.uniform(0.3, 0.7))
            n_m = rng.uniform(10.0, 200.0)
            eta = eta_factor(r, n_m, 1e-5)
            c_tilde = rng.uniform(4.4 / eta, 14.4 / eta)
            result = optimal_gain(c_tilde, eta)
            assert result.regime is GainRegime.INTERIOR_OPTIMUM

            def variance(lb):
                return momentum_variance_damped(c_tilde / (1.0 - math.tanh(r) ** 2), r, lb, n_m, 1e-5).var_p

            lb = result.lambda_bar_opt
            slope = (variance(lb + h) - variance(lb - h)) / (2.0 * h)
            curvature = (variance(lb + h) - 2.0 * variance(lb) + variance(lb - h)) / h ** 2
            assert curvature > 0
            assert abs(slope) <= 1e-3 * curvature

    def test_from_coupling(self):
        params = rotating_params(n_m=100.0)
        result = optimal_gain_for(matched_coupling(params, cooperativity=5e3, ratio=0.6), params)
        assert result.regime is GainRegime.INTERIOR_OPTIMUM
        assert result.lambda_bar_opt == pytest.approx(0.4135, abs=1e-3)

    def test_rejects_nonpositive_inputs(self):
        with pytest.raises(ValidationError) as info:
            optimal_gain(0.0, self.ETA)
        assert info.value.field == 'c_tilde'

    def test_stability_needs_constant_drift(self):
        drift = DriftMatrix(lambda t: -np.eye(4), period=1.0, frame='lab')
        with pytest.raises(ValidationError):
            stability_check(drift)
