"""Tests for the flat cylinder model."""

from __future__ import annotations

import math

import pytest

from cusp_balance.cylinder import (
    CylinderParams,
    cylinder_norm_sq,
    cylinder_rho,
    neck_deviation,
)
from cusp_balance.exceptions import InvalidParameterError
from cusp_balance.model_kernel import ModelLevel
from cusp_balance.neck import neck_functions


@pytest.fixture
def params() -> CylinderParams:
    return CylinderParams(1.0e4, 100)


def test_params_validation():
    """Test that the neck regime is enforced."""
    with pytest.raises(InvalidParameterError):
        CylinderParams(1.0e4, 5)
    with pytest.raises(InvalidParameterError):
        CylinderParams(1.0e4, 0)
    with pytest.raises(InvalidParameterError):
        CylinderParams(-1.0, 3)


def test_for_level_matches_direct_construction(params):
    """Test that a disk level maps onto its series exponent."""
    assert CylinderParams.for_level(ModelLevel(1.0e4 + 1.0), 100) == params
    assert params.period == pytest.approx(1.0)


def test_norm_sq(params):
    """Test ||z^c||^2 = exp(k c^2 / 2a^2)."""
    assert cylinder_norm_sq(params, 0).to_real() == 1.0
    assert cylinder_norm_sq(params, 1).to_real() == pytest.approx(math.exp(0.5), rel=1e-15)
    assert cylinder_norm_sq(params, -7) == cylinder_norm_sq(params, 7)


def test_rho_three_term_oracle():
    """Test rho(0) = 1 + 2 exp(-k / 2a^2) when the comb is sparse."""
    sparse = CylinderParams(1.0e4, 20)
    expected = 1.0 + 2.0 * math.exp(-12.5)
    assert cylinder_rho(sparse, 0.0).to_real() == pytest.approx(expected, rel=1e-14)


def test_rho_periodic_and_even(rng, params):
    """Test rho(u + k/a^2) = rho(u) and rho(-u) = rho(u)."""
    for u in rng.uniform(-20.0, 20.0, size=50):
        value = cylinder_rho(params, float(u)).logmag
        shifted = cylinder_rho(params, float(u) + params.period).logmag
        mirrored = cylinder_rho(params, -float(u)).logmag
        assert shifted == pytest.approx(value, abs=1e-12)
        assert mirrored == pytest.approx(value, abs=1e-12)


@pytest.mark.parametrize("a", [12, 100])
def test_rho_matches_theta_series(rng, a):
    """Test h_a(u) = rho(u) exp(a^2 u^2 / 2k) on |u| <= (log k)^2."""
    params = CylinderParams(1.0e4, a)
    window = params.level.log_k**2
    for u in rng.uniform(-window, window, size=200):
        u = float(u)
        h = neck_functions(params.level, params.a, u).h
        expected = cylinder_rho(params, u).logmag + params.a**2 * u * u / (2.0 * params.k)
        assert h.logmag == pytest.approx(expected, rel=1e-14, abs=1e-12)


def test_neck_deviation(params):
    """Test that the cylinder reproduces the disk density near t = k/a."""
    assert neck_deviation(params) <= 1e-2
