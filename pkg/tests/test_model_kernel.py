"""Tests for the punctured-disk model kernel."""

from __future__ import annotations

import math

import numpy as np
import pytest

from cusp_balance.const import REGIME_CASE_I, REGIME_CASE_II, REGIME_CASE_III
from cusp_balance.exceptions import InvalidParameterError, OutOfLadderError
from cusp_balance.model_kernel import (
    LadderPartition,
    ModelLevel,
    classify,
    concentration_ratio,
    cusp_volume_closed_form,
    expected_mu,
    ladder_approx,
    ladder_integrals,
    monomial_inner_product,
    monomial_norm_quadrature,
    monomial_norm_sq,
    mu_auto,
    mu_direct,
    mu_ladder,
    mu_partial,
    mu_route,
    omega_volume,
    phi_k,
    psi_coefficient,
    psi_k,
    rho_k0,
    volume_near_cusp,
)
from cusp_balance.neck import mu_neck


def test_level_validation():
    """Test that levels below the positivity threshold are rejected."""
    with pytest.raises(InvalidParameterError):
        ModelLevel(5)
    assert ModelLevel(400).exponent == 399


def test_classify(level_400):
    """Test regime boundaries at sqrt(k)/log k and sqrt(k) log k."""
    assert classify(level_400, 1).regime == REGIME_CASE_II
    assert classify(level_400, 3).regime == REGIME_CASE_II
    assert classify(level_400, 4).regime == REGIME_CASE_III
    assert classify(level_400, 119).regime == REGIME_CASE_III
    assert classify(level_400, 120).regime == REGIME_CASE_I
    with pytest.raises(InvalidParameterError):
        classify(level_400, 0)


def test_monomial_norm_examples():
    """Test 2 pi (k-2)! / a^{k-1} at k = 5."""
    level = ModelLevel(8)
    assert monomial_norm_sq(level, 1).to_real() == pytest.approx(2 * math.pi * 720, rel=1e-13)
    assert monomial_norm_sq(level, 2).to_real() == pytest.approx(
        2 * math.pi * 720 / 2**7, rel=1e-13
    )
    with pytest.raises(InvalidParameterError):
        monomial_norm_sq(level, 0)


@pytest.mark.parametrize("k", [10, 100, 1000])
@pytest.mark.parametrize("a", [1, 7, 50])
def test_monomial_norm_quadrature_matches_closed_form(k, a):
    """Test the radial quadrature against log-Gamma."""
    level = ModelLevel(k)
    exact = monomial_norm_sq(level, a)
    numeric = monomial_norm_quadrature(level, a)
    assert math.exp(numeric.logmag - exact.logmag) == pytest.approx(1.0, rel=1e-10)


def test_monomial_inner_product_orthogonal(rng):
    """Test that distinct monomials are orthogonal without any quadrature."""
    level = ModelLevel(60)
    for _ in range(200):
        a, b = (int(v) for v in rng.choice(np.arange(1, 200), size=2, replace=False))
        assert monomial_inner_product(level, a, b).is_zero
    same = monomial_inner_product(level, 3, 3)
    assert math.exp(same.logmag - monomial_norm_sq(level, 3).logmag) == pytest.approx(
        1.0, rel=1e-10
    )


def test_concentration_ratio():
    """Test the window share of the radial integral."""
    assert 1.0 - 1e-3 < concentration_ratio(ModelLevel(100), 3) <= 1.0
    ratio = concentration_ratio(ModelLevel(20), 1)
    assert 0.0 < ratio <= 1.0
    assert concentration_ratio(ModelLevel(20), 1, width=1e6) == 1.0
    widths = np.linspace(0.05, 2.0, 40)
    ratios = [concentration_ratio(ModelLevel(20), 1, width=float(w)) for w in widths]
    assert all(b >= a for a, b in zip(ratios, ratios[1:], strict=False))


def test_phi_matches_direct_sum():
    """Test the windowed phi series against a plain sum."""
    level = ModelLevel(10)
    a = np.arange(1, 400, dtype=float)
    direct = float(np.sum(np.exp(9.0 * np.log(a) - (a - 1.0) * 1.0)))
    assert phi_k(level, 1.0).to_real() == pytest.approx(direct, rel=1e-12)


def test_phi_psi_on_first_ladder_interval():
    """Test phi = 1 + 2^p x and psi = 2^p + 6^p x^2 at x = 2^{-p}."""
    level = ModelLevel(61)
    t = 60 * math.log(2.0)
    assert phi_k(level, t).to_real() == pytest.approx(2.0, rel=1e-6)
    psi = psi_k(level, t)
    expected = math.log(2.0**60 + 6.0**60 * 4.0**-60)
    assert psi.logmag == pytest.approx(expected, abs=1e-6)


def test_psi_coefficients():
    """Test c_l and the coefficient form of psi."""
    assert psi_coefficient(ModelLevel(11), 3).to_real() == pytest.approx(1024.0, rel=1e-13)
    assert psi_coefficient(ModelLevel(11), 2).is_zero

    level = ModelLevel(10)
    t = 2.0
    logs = [psi_coefficient(level, n).logmag - (n - 3) * t for n in range(3, 600)]
    series = float(np.sum(np.exp(np.array(logs) - max(logs)))) * math.exp(max(logs))
    assert psi_k(level, t).to_real() == pytest.approx(series, rel=1e-9)


def test_ladder_partition(level_400):
    """Test n_max^2 < k / (2 log k) and break ordering."""
    partition = LadderPartition.for_level(level_400)
    assert partition.n_max == 5
    assert list(partition.t_breaks) == sorted(partition.t_breaks, reverse=True)
    with pytest.raises(OutOfLadderError):
        partition.locate(1.0)


def test_ladder_approx_matches_full_series(level_400):
    """Test the two-term forms inside interval n = 2."""
    p = level_400.exponent
    t = 0.5 * (0.5 * p * math.log(2.0) + p * math.log(1.5))
    phi, psi = ladder_approx(level_400, t)
    assert math.exp(phi.logmag - phi_k(level_400, t).logmag) == pytest.approx(1.0, abs=1e-6)
    assert math.exp(psi.logmag - psi_k(level_400, t).logmag) == pytest.approx(1.0, abs=1e-6)


def test_ladder_approx_first_interval(level_400):
    """Test phi = 1 + 2^p x on the first interval."""
    p = level_400.exponent
    t = 0.5 * (0.5 * p * math.log(3.0) + p * math.log(2.0))
    phi, _ = ladder_approx(level_400, t)
    assert phi.logmag == pytest.approx(float(np.logaddexp(0.0, p * math.log(2.0) - t)))


def test_ladder_approx_out_of_range(level_400):
    """Test that points below the last break are refused."""
    with pytest.raises(OutOfLadderError):
        ladder_approx(level_400, 2.0)


def test_rho_bulk_expansion():
    """Test 2 pi rho / k close to 1 in the bulk."""
    for k in (200, 400, 800):
        level = ModelLevel(k)
        t = 1.0 / (level.sqrt_k * level.log_k * 0.5)
        ratio = 2 * math.pi * rho_k0(level, t).rho.to_real() / k
        assert abs(ratio - 1.0) <= 5.0 / k


def test_rho_deep_cusp(level_400):
    """Test that the first term dominates at t = 2k."""
    assert phi_k(level_400, 800.0).to_real() == pytest.approx(1.0, abs=1e-12)


def test_rho_positive(rng):
    """Test positivity of both densities."""
    for _ in range(200):
        level = ModelLevel(float(rng.uniform(8.0, 3000.0)))
        t = float(np.exp(rng.uniform(-4.0, 8.0)))
        value = rho_k0(level, t)
        assert value.rho.sign == 1
        assert value.omega_density.sign == 1


def test_volume_near_cusp():
    """Test the near-cusp volume against k^{-1/2} log k."""
    level = ModelLevel(100)
    volume = volume_near_cusp(level)
    assert 0.0 < volume / (level.log_k / level.sqrt_k) <= 10.0
    with pytest.raises(InvalidParameterError):
        volume_near_cusp(ModelLevel(20))


def test_cusp_volume_closed_form():
    """Test Vol{t >= T} = x phi'/phi against quadrature."""
    level = ModelLevel(100)
    numeric = omega_volume(level, 5.0, math.inf)
    assert numeric == pytest.approx(cusp_volume_closed_form(level, 5.0), rel=1e-8)
    assert omega_volume(level, 3.0, 3.0) == 0.0


def test_mu_sum_reproduces_volume():
    """Test sum_a mu_a(annulus) = omega volume of the annulus."""
    level = ModelLevel(60)
    t_lo, t_hi = 4.0, 9.0
    total = math.fsum(mu_partial(level, a, t_lo, t_hi) for a in range(1, 120))
    assert total == pytest.approx(omega_volume(level, t_lo, t_hi), rel=1e-6)


def test_mu_direct_examples(level_400):
    """Test mu_1 = 1/2 and mu_3 = 1 at k = 400."""
    assert mu_direct(level_400, 1) == pytest.approx(0.5, abs=0.02)
    assert mu_direct(level_400, 3) == pytest.approx(1.0, abs=0.02)


@pytest.mark.parametrize("a", [1, 2])
def test_mu_ladder_route_agrees(level_400, a):
    """Test the ladder-sum route against the direct route."""
    assert mu_ladder(level_400, a) == pytest.approx(mu_direct(level_400, a), abs=1e-4)


def test_mu_ladder_out_of_range(level_400):
    """Test that indices beyond n_max are refused."""
    with pytest.raises(OutOfLadderError):
        mu_ladder(level_400, 6)


@pytest.mark.parametrize("k", [1000.0, 2000.0, 4000.0])
def test_routes_agree_in_regime_overlap(k):
    """Test mu_neck = mu_direct for indices just past the neck threshold."""
    level = ModelLevel(k)
    first = next(a for a in range(1, 100) if classify(level, a).regime == REGIME_CASE_III)
    last = int(level.sqrt_k / math.sqrt(level.log_k))
    assert last > first
    for a in sorted({first, (first + last) // 2, last}):
        assert mu_neck(level, a) == pytest.approx(mu_direct(level, a), abs=1e-3)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_ladder_integral_grid(level_400, n):
    """Test I_{n,n} = 3/8, I_{n-1,n} = 1/8 and I_{n-2,n} = 0 at k = 400."""
    assert ladder_integrals(level_400, n, n)[0] == pytest.approx(0.375, abs=0.01)
    assert ladder_integrals(level_400, n - 1, n)[0] == pytest.approx(0.125, abs=0.01)
    assert abs(ladder_integrals(level_400, n - 2, n)[0]) <= 1e-4


def test_ladder_integrals_validity(level_400):
    """Test the n^2 < k / log k bound."""
    with pytest.raises(OutOfLadderError):
        ladder_integrals(level_400, 9, 9)
    with pytest.raises(InvalidParameterError):
        ladder_integrals(level_400, -1, 2)


def test_mu_auto_routes(level_400):
    """Test route selection and expected leading values."""
    assert mu_route(level_400, 2) == "direct"
    assert mu_route(level_400, 10) == "neck"
    assert mu_route(level_400, 150) == "direct"
    assert expected_mu(1) == 0.5
    assert expected_mu(7) == 1.0
    assert mu_auto(level_400, 1) == mu_direct(level_400, 1)


@pytest.mark.slow
def test_mu_converges_with_k():
    """Test mu_1 -> 1/2 and mu_a -> 1 with shrinking deviations."""
    deviations = []
    for k in (200, 400, 800):
        level = ModelLevel(k)
        deviations.append(
            max(abs(mu_direct(level, a) - expected_mu(a)) for a in range(1, 9))
        )
    assert deviations[-1] <= 0.01
    assert deviations[0] > deviations[1] > deviations[2]
