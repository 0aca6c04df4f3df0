from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import rotating_params
from simulation.errors import InstabilityError, ValidationError
from simulation.meanfield import (EffectiveCoupling, MeanFieldState, coupling_discrepancy, detect_periodic_orbit,
                                  effective_coupling, fourier_perturbation_coefficients, integrate_mean_field,
                                  match_drive_phases)
from simulation.params import PhysicalParams
from utils.numerics import wrap_phase


def undriven(lambda_bar):
    return PhysicalParams(kappa=0.1, gamma_m=1e-6, delta0=1.06, g=4e-6, lambda_gain=lambda_bar * 0.05,
                          theta=math.pi, omega_mod=2.0, n_m=100.0)


class TestIntegration:
    def test_rest_stays_at_rest_without_drive(self):
        trajectory = integrate_mean_field(undriven(0.6), MeanFieldState(), 20.0)
        assert np.all(trajectory.q == 0.0)
        assert np.all(trajectory.a == 0.0)

    def test_final_state_and_frame(self):
        params = PhysicalParams(kappa=0.1, gamma_m=1e-6, delta0=1.0, g=0.0, drive={0: 1.0})
        trajectory = integrate_mean_field(params, t_end=200.0)
        # steady cavity amplitude E0 / (kappa + i delta0)
        assert trajectory.final.a_mean == pytest.approx(1.0 / (0.1 + 1.0j), rel=1e-6)
        frame = trajectory.to_frame()
        assert list(frame.columns) == ['t', 'q_mean', 'p_mean', 're_a', 'im_a']

    def test_end_before_start_rejected(self):
        with pytest.raises(ValidationError):
            integrate_mean_field(undriven(0.0), MeanFieldState(t=5.0), 1.0)

    def test_non_finite_state_rejected(self):
        with pytest.raises(InstabilityError):
            MeanFieldState(0.0, math.nan, 0.0, 0j)


class TestPeriodicOrbit:
    def test_zero_drive_is_fixed_point(self):
        orbit = detect_periodic_orbit(undriven(0.6))
        assert orbit.periodicity_residual == 0.0
        assert np.all(orbit.a == 0)
        assert orbit.period == pytest.approx(math.pi)

    def test_zero_drive_above_threshold(self):
        with pytest.raises(InstabilityError):
            detect_periodic_orbit(undriven(1.2))

    def test_rejects_short_sampling(self, modulated_params):
        with pytest.raises(ValidationError):
            detect_periodic_orbit(modulated_params, sample_periods=1)

    @pytest.mark.slow
    def test_orbit_matches_perturbative_expansion(self, modulated_params):
        orbit = detect_periodic_orbit(modulated_params, settle_periods=200, sample_periods=2, tol=1e-6)
        assert orbit.periodicity_residual < 1e-6

        tables = fourier_perturbation_coefficients(modulated_params, J=6, N=1)
        q, p, a = tables.reconstruct(orbit.t, modulated_params.g)
        assert np.max(np.abs(np.real(q) - orbit.q)) <= 0.01 * np.max(np.abs(orbit.q))
        assert np.max(np.abs(a - orbit.a)) <= 0.01 * np.max(np.abs(orbit.a))

        numeric = effective_coupling(orbit, modulated_params)
        analytic = effective_coupling(tables, modulated_params)
        assert coupling_discrepancy(numeric, analytic) < 0.02
        assert numeric.squeezable


class TestFourierRecursion:
    def test_zeroth_order_cavity_amplitude(self):
        params = PhysicalParams(kappa=0.1, gamma_m=1e-6, delta0=1.06, g=4e-6, drive={0: 2.0})
        tables = fourier_perturbation_coefficients(params, J=0, N=1)
        assert tables.coefficient('a', 0, 0) == pytest.approx(2.0 / (0.1 + 1.06j), rel=1e-12)
        assert tables.coefficient('a', 1, 0) == 0

    def test_first_order_static_displacement(self):
        params = PhysicalParams(kappa=0.1, gamma_m=1e-6, delta0=1.06, g=4e-6, drive={0: 2.0})
        tables = fourier_perturbation_coefficients(params, J=1, N=1)
        a0 = tables.coefficient('a', 0, 0)
        assert tables.coefficient('q', 0, 1) == pytest.approx(abs(a0) ** 2, rel=1e-12)
        assert tables.coefficient('p', 0, 1) == 0

    def test_requires_half_modulation_pump_detuning(self, modulated_params):
        with pytest.raises(ValidationError):
            fourier_perturbation_coefficients(modulated_params.with_changes(delta_p=0.7))

    def test_harmonic_cutoff_must_cover_drive(self):
        params = PhysicalParams(kappa=0.1, gamma_m=1e-6, delta0=1.0, g=4e-6, drive={0: 1.0, 2: 0.5})
        with pytest.raises(ValidationError):
            fourier_perturbation_coefficients(params, N=1)

    def test_json_keys(self, modulated_params):
        payload = fourier_perturbation_coefficients(modulated_params, J=2, N=1).to_json()
        assert '(a, -1, 0)' in payload
        assert len(payload) == 3 * 3 * 3


class TestEffectiveCoupling:
    def test_momentum_configuration_phases(self):
        params = rotating_params(theta=0.7)
        coupling = EffectiveCoupling.from_ratios(params, 1e4, 0.5)
        assert abs(coupling.phi_r) == pytest.approx(math.pi)
        assert abs(coupling.phi_r0) == pytest.approx(math.pi)
        assert coupling.ratio == pytest.approx(0.5)
        assert coupling.cooperativity(params) == pytest.approx(1e4)

    def test_position_configuration_phases(self):
        params = rotating_params(theta=0.7)
        coupling = EffectiveCoupling.from_ratios(params, 1e4, 0.5, configuration='position')
        assert coupling.phi_r == pytest.approx(0.0)
        assert coupling.phi_r0 == pytest.approx(0.0)

    def test_bogoliubov_coupling(self):
        coupling = EffectiveCoupling(0j, 0.05 + 0j, -0.03 + 0j)
        assert coupling.r == pytest.approx(math.atanh(0.6))
        assert abs(coupling.g_b) == pytest.approx(0.04)

    def test_not_squeezable(self):
        coupling = EffectiveCoupling(0j, 0.03 + 0j, 0.05 + 0j)
        assert not coupling.squeezable
        assert coupling.r == math.inf
        assert math.isnan(coupling.g_b.real)


def analytic_coupling(params):
    return effective_coupling(fourier_perturbation_coefficients(params, J=6, N=1), params)


class TestDrivePhaseMatching:
    def test_real_drive_is_off_the_momentum_configuration(self, modulated_params):
        coupling = analytic_coupling(modulated_params)
        assert abs(wrap_phase(coupling.phi_r0 - math.pi)) > 1.0

    def test_matched_couplings(self, modulated_params):
        params = match_drive_phases(modulated_params)
        coupling = analytic_coupling(params)
        assert coupling.phi_0 == pytest.approx(0.0, abs=1e-8)
        assert abs(coupling.phi_r) == pytest.approx(math.pi, abs=1e-8)
        assert abs(coupling.phi_r0) == pytest.approx(math.pi, abs=1e-8)
        assert dict(params.drive) == dict(modulated_params.drive)

    def test_numeric_orbit_is_phase_matched(self, modulated_params):
        params = match_drive_phases(modulated_params)
        coupling = effective_coupling(detect_periodic_orbit(params, settle_periods=200), params)
        assert abs(wrap_phase(coupling.phi_r0 - math.pi)) < 0.05
        assert abs(wrap_phase(coupling.phi_r - math.pi)) < 0.1

    def test_carrier_only_fixes_laser_phase(self, modulated_params):
        params = match_drive_phases(modulated_params.with_changes(drive={0: 1.4e4}))
        assert params.modulation_phase == 0.0
        assert analytic_coupling(params).phi_0 == pytest.approx(0.0, abs=1e-8)

    def test_undriven_parameters_unchanged(self):
        params = undriven(0.6)
        assert match_drive_phases(params) is params
