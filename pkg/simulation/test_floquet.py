from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import matched_coupling, rotating_params
from config.scenario import scenario_variant
from simulation.errors import ConfigurationError, DomainError, InstabilityError, PhysicalityError, ValidationError
from simulation.floquet import (CovarianceMatrix, DriftMatrix, NoiseDiffusion, evolve_covariance,
                                floquet_multipliers, lab_drift, mode_to_quadrature, periodic_steady_covariance,
                                rotating_crt_drift, squeezing_db)
from simulation.meanfield import detect_periodic_orbit, match_drive_phases
from simulation.rwa import build_tilde_drift, steady_covariance, steady_lyapunov


class TestSqueezingDb:
    def test_vacuum_is_zero(self):
        assert squeezing_db(0.5) == 0.0

    def test_three_db_limit(self):
        assert squeezing_db(0.25) == pytest.approx(3.0103, abs=1e-4)

    @pytest.mark.parametrize('variance', [0.0, -0.1])
    def test_nonpositive_variance(self, variance):
        with pytest.raises(DomainError):
            squeezing_db(variance)


class TestCovarianceMatrix:
    def test_vacuum_is_minimal_physical_state(self):
        vacuum = CovarianceMatrix.vacuum().check()
        assert vacuum.physicality_margin() == pytest.approx(0.0, abs=1e-12)

    def test_sub_vacuum_in_both_quadratures_is_unphysical(self):
        with pytest.raises(PhysicalityError):
            CovarianceMatrix(np.diag([0.2, 0.2, 0.5, 0.5])).check()

    def test_asymmetric_rejected(self):
        matrix = 0.5 * np.eye(4)
        matrix[0, 1] = 0.1
        with pytest.raises(ValidationError):
            CovarianceMatrix(matrix)

    def test_rotated_minimum(self):
        V = CovarianceMatrix(np.array([
            [1.0, 0.5, 0.0, 0.0],
            [0.5, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.5, 0.0],
            [0.0, 0.0, 0.0, 0.5],
        ]))
        assert V.min_mechanical_variance() == pytest.approx(0.5)


class TestDrift:
    def test_mode_blocks_of_pure_damping(self):
        A = np.diag([-0.3 + 0j, -0.1 + 0j])
        B = np.zeros((2, 2), dtype=complex)
        np.testing.assert_allclose(mode_to_quadrature(A, B), np.diag([-0.3, -0.3, -0.1, -0.1]))

    @pytest.mark.parametrize('theta', [math.pi, 0.4])
    def test_crt_average_is_rwa_drift(self, theta):
        params = rotating_params(lambda_bar=0.5, theta=theta)
        coupling = matched_coupling(params, cooperativity=1e4, ratio=0.6, sideband_ratio=0.3)
        crt = rotating_crt_drift(coupling, params)
        assert crt.period == pytest.approx(math.pi)
        assert crt.periodicity_residual() < 1e-12
        np.testing.assert_allclose(crt.time_average(), build_tilde_drift(coupling, params).constant, atol=1e-12)

    def test_crt_requires_resonant_frame(self):
        params = rotating_params().with_changes(delta0=1.5)
        with pytest.raises(ConfigurationError):
            rotating_crt_drift(matched_coupling(params), params)

    def test_lab_drift_without_drive_or_gain_is_constant(self):
        params = rotating_params()
        orbit = detect_periodic_orbit(params)
        assert lab_drift(params, orbit).is_constant


class TestCovarianceEvolution:
    def test_relaxes_to_lyapunov_solution(self):
        params = rotating_params(lambda_bar=0.5, gamma_m=1e-3, n_m=5.0)
        coupling = matched_coupling(params, cooperativity=40.0, ratio=0.4)
        drift = build_tilde_drift(coupling, params)
        diffusion = NoiseDiffusion.rotating(params)
        steady = steady_lyapunov(drift, diffusion)
        rate = -np.max(np.linalg.eigvals(drift.constant).real)
        trajectory = evolve_covariance(drift, diffusion, CovarianceMatrix.thermal(params), 40.0 / rate,
                                       tol=1e-10, atol=1e-12, t_eval=np.array([40.0 / rate]))
        np.testing.assert_allclose(trajectory.V[-1], steady.matrix, rtol=1e-6, atol=1e-8)

    def test_divergence_detected(self):
        params = rotating_params(lambda_bar=1.5)
        drift = build_tilde_drift(matched_coupling(params), params)
        with pytest.raises(InstabilityError) as info:
            evolve_covariance(drift, NoiseDiffusion.rotating(params), CovarianceMatrix.vacuum(), 1e4)
        assert info.value.time is not None

    def test_constant_drift_rejected_for_periodic_solve(self):
        params = rotating_params()
        drift = build_tilde_drift(matched_coupling(params), params)
        with pytest.raises(ValidationError):
            periodic_steady_covariance(drift, NoiseDiffusion.rotating(params))

    def test_multipliers_of_constant_drift(self):
        drift = DriftMatrix.from_constant(np.diag([-0.1, -0.2, -0.3, -0.4]))
        multipliers = np.sort(np.abs(floquet_multipliers(drift, period=1.0)))
        np.testing.assert_allclose(multipliers, np.exp([-0.4, -0.3, -0.2, -0.1]), rtol=1e-12)

    def test_multiplier_and_eigenvalue_stability_agree(self):
        rng = np.random.default_rng(42)
        outcomes = set()
        for _ in range(100):
            matrix = rng.normal(scale=0.5, size=(4, 4)) - rng.uniform(-0.5, 2.0) * np.eye(4)
            drift = DriftMatrix.from_constant(matrix)
            eigenvalues = np.linalg.eigvals(matrix)
            largest = float(np.max(eigenvalues.real))
            if abs(largest) < 1e-8:
                continue
            multipliers = floquet_multipliers(drift, period=math.pi)
            np.testing.assert_allclose(np.sort(np.abs(multipliers)), np.sort(np.exp(eigenvalues.real * math.pi)),
                                       rtol=1e-6)
            assert (np.max(np.abs(multipliers)) < 1.0) == (largest < 0.0)
            outcomes.add(largest < 0.0)
        assert outcomes == {True, False}


class TestPeriodicSteadyState:
    def test_crt_close_to_rwa(self):
        params = rotating_params(lambda_bar=0.3, n_m=100.0)
        coupling = matched_coupling(params, cooperativity=1e4, ratio=0.6, sideband_ratio=0.3)
        _, report = periodic_steady_covariance(rotating_crt_drift(coupling, params), NoiseDiffusion.rotating(params),
                                               strategy='monodromy', grid_size=128)
        rwa = steady_covariance(coupling, params)
        assert report.stable
        assert all(m < 1.0 for m in report.multipliers)
        assert report.var_p == pytest.approx(rwa.var_p, rel=0.05)
        assert report.extra['strategy'] == 'monodromy'

    def test_settling_starts_from_thermal_state(self):
        params = rotating_params(lambda_bar=0.3, n_m=100.0)
        drift = rotating_crt_drift(matched_coupling(params, cooperativity=1e4, ratio=0.6), params)
        diffusion = NoiseDiffusion.rotating(params)
        assert np.array_equal(diffusion.equilibrium.matrix, CovarianceMatrix.thermal(params).matrix)

        options = dict(settle_periods=3, tol=1e9, grid_size=16, check_periods=2, max_extensions=0)
        _, default = periodic_steady_covariance(drift, diffusion, **options)
        _, thermal = periodic_steady_covariance(drift, diffusion, V0=CovarianceMatrix.thermal(params), **options)
        _, vacuum = periodic_steady_covariance(drift, diffusion, V0=CovarianceMatrix.vacuum(), **options)
        assert default.var_p == thermal.var_p
        assert default.var_p > 10.0 * vacuum.var_p

    def test_unstable_gain_reports_multipliers(self):
        params = rotating_params(lambda_bar=1.3)
        coupling = matched_coupling(params)
        with pytest.raises(InstabilityError) as info:
            periodic_steady_covariance(rotating_crt_drift(coupling, params), NoiseDiffusion.rotating(params))
        assert max(info.value.multipliers) >= 1.0

    @pytest.mark.slow
    def test_settling_agrees_with_monodromy(self):
        params = rotating_params(lambda_bar=0.3, n_m=10.0)
        coupling = matched_coupling(params, cooperativity=1e4, ratio=0.5)
        drift = rotating_crt_drift(coupling, params)
        diffusion = NoiseDiffusion.rotating(params)
        _, direct = periodic_steady_covariance(drift, diffusion, strategy='monodromy', grid_size=64)
        _, settled = periodic_steady_covariance(drift, diffusion, settle_periods=2000, tol=1e-6, grid_size=64,
                                                V0=CovarianceMatrix.thermal(params))
        assert settled.var_p == pytest.approx(direct.var_p, rel=1e-4)

    @pytest.mark.slow
    @pytest.mark.parametrize('variant,expected', [('opa-only', 0.359), ('mod-only', 0.164)])
    def test_lab_frame_momentum_minimum(self, modulated_params, variant, expected):
        trajectory, report = lab_frame_steady_state(modulated_params, variant)
        assert report.var_p == pytest.approx(expected, abs=0.005)
        assert report.db_p == pytest.approx(squeezing_db(expected), abs=0.2)
        assert np.all(trajectory.var_q * trajectory.var_p >= 0.25 - 1e-9)

    @pytest.mark.slow
    def test_two_fold_beats_either_mechanism(self, modulated_params):
        variances = {variant: lab_frame_steady_state(modulated_params, variant)[1].var_p
                     for variant in ('opa-only', 'mod-only', 'both')}
        assert variances['both'] < 0.15
        assert variances['both'] < variances['mod-only'] < variances['opa-only']


def lab_frame_steady_state(params, variant):
    params = scenario_variant(match_drive_phases(params), variant, rematch=True)
    orbit = detect_periodic_orbit(params, settle_periods=200)
    return periodic_steady_covariance(lab_drift(params, orbit), NoiseDiffusion.lab(params),
                                      strategy='monodromy', grid_size=256)
