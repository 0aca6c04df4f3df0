from __future__ import annotations

import math

import pytest

from simulation.meanfield import EffectiveCoupling
from simulation.params import PhysicalParams


def rotating_params(kappa=0.1, gamma_m=1e-6, lambda_bar=0.0, theta=math.pi, n_m=0.0, n_a=0.0):
    """Rotating-frame parameter set (no drive needed)."""
    return PhysicalParams(kappa=kappa, gamma_m=gamma_m, delta0=1.0, g=0.0,
                          lambda_gain=lambda_bar * kappa / 2.0, theta=theta, n_a=n_a, n_m=n_m)


def matched_coupling(params, cooperativity=1e4, ratio=0.6, sideband_ratio=0.0, configuration='momentum'):
    return EffectiveCoupling.from_ratios(params, cooperativity, ratio, sideband_ratio, configuration)


@pytest.fixture
def modulated_params():
    return PhysicalParams(kappa=0.1, gamma_m=1e-6, delta0=1.06, g=4e-6, lambda_gain=0.03, theta=math.pi,
                          omega_mod=2.0, drive={0: 1.4e4, 1: 0.7e4, -1: 0.7e4}, n_a=0.0, n_m=100.0)


@pytest.fixture
def out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv('SQUEEZE_OUTPUT_DIR', str(tmp_path / 'env-output'))
    return tmp_path / 'out'
