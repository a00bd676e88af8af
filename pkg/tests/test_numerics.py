"""Tests for log-space arithmetic and quadrature."""

from __future__ import annotations

import math

import numpy as np
import pytest

from cusp_balance.exceptions import InvalidParameterError, NonConvergenceError
from cusp_balance.numerics import (
    ONE,
    ZERO,
    LogArray,
    LogReal,
    QuadratureSpec,
    integrate_adaptive,
    integrate_vector,
    log_factorial,
    log_moments,
    log_sum_exp,
    pointwise,
    term_window,
)


def test_logreal_round_trip():
    """Test conversion to and from floats."""
    assert LogReal.from_real(-2.5).to_real() == pytest.approx(-2.5, rel=1e-15)
    assert LogReal.from_real(0.0) is ZERO
    assert LogReal.from_log(-math.inf).is_zero
    assert float(ONE) == 1.0


def test_logreal_rejects_bad_sign():
    """Test that malformed values are rejected."""
    with pytest.raises(InvalidParameterError):
        LogReal(2, 0.0)
    with pytest.raises(InvalidParameterError):
        LogReal(1, -math.inf)
    with pytest.raises(InvalidParameterError):
        LogReal.from_real(math.nan)


def test_logreal_arithmetic():
    """Test signed arithmetic in log-space."""
    three = LogReal.from_real(3.0)
    five = LogReal.from_real(-5.0)
    assert (three + five).to_real() == pytest.approx(-2.0, rel=1e-14)
    assert (three - five).to_real() == pytest.approx(8.0, rel=1e-14)
    assert (three * five).to_real() == pytest.approx(-15.0, rel=1e-14)
    assert (three / five).to_real() == pytest.approx(-0.6, rel=1e-14)
    assert (five**2).to_real() == pytest.approx(25.0, rel=1e-14)
    assert (ZERO * three).is_zero
    with pytest.raises(ZeroDivisionError):
        three / ZERO


def test_logreal_overflow_saturates():
    """Test that to_real saturates instead of raising."""
    assert LogReal.from_log(1e6).to_real() == math.inf
    assert LogReal.from_log(1e6, sign=-1).to_real() == -math.inf


def test_log_sum_exp_examples():
    """Test the worked log_sum_exp examples."""
    total = log_sum_exp([LogReal.from_log(0.0), LogReal.from_log(0.0)])
    assert total.sign == 1
    assert total.logmag == pytest.approx(math.log(2.0), rel=1e-15)

    single = LogReal.from_log(12.5, sign=-1)
    assert log_sum_exp([single]) == single

    big = log_sum_exp([LogReal.from_log(1000.0), LogReal.from_log(998.0)])
    assert big.logmag == pytest.approx(1000.0 + math.log1p(math.exp(-2.0)), rel=1e-15)


def test_log_sum_exp_empty_and_cancelling():
    """Test the empty sum and exact cancellation."""
    assert log_sum_exp([]).is_zero
    assert log_sum_exp([ZERO, ZERO]).is_zero
    x = LogReal.from_log(1000.0)
    assert (x - x).is_zero


def test_log_sum_exp_permutation_invariant(rng):
    """Test that term order does not change the sum."""
    for _ in range(200):
        logs = rng.normal(scale=300.0, size=12)
        signs = rng.choice([-1, 1], size=12)
        signs[np.argmax(logs)] = 1
        terms = [LogReal.from_log(float(v), int(s)) for v, s in zip(logs, signs, strict=True)]
        forward = log_sum_exp(terms)
        shuffled = log_sum_exp([terms[i] for i in rng.permutation(12)])
        assert shuffled.sign == forward.sign
        assert math.exp(shuffled.logmag - forward.logmag) == pytest.approx(1.0, abs=1e-13)


def test_log_factorial():
    """Test log-Gamma based factorials."""
    assert log_factorial(5) == pytest.approx(math.log(120.0), rel=1e-14)
    assert log_factorial(1000) == pytest.approx(math.lgamma(1001.0), rel=1e-14)
    with pytest.raises(InvalidParameterError):
        log_factorial(-1)


def test_term_window_covers_peak():
    """Test that the window holds every term within drop of the maximum."""

    def log_term(c):
        return -0.5 * (c - 10.3) ** 2

    window = term_window(log_term, 10.3, None, 20.0)
    assert set(range(5, 17)) <= set(window.astype(int))
    assert np.all(np.diff(window) == 1.0)

    clipped = term_window(log_term, 10.3, 8.0, 20.0)
    assert clipped[0] == 8.0
    assert set(range(8, 17)) <= set(clipped.astype(int))


def test_log_moments():
    """Test mean and variance of a two-point distribution."""
    log_total, mean, log_var = log_moments(np.array([0.0, 1.0]), np.log([1.0, 1.0]))
    assert log_total == pytest.approx(math.log(2.0))
    assert mean == pytest.approx(0.5)
    assert math.exp(log_var) == pytest.approx(0.25)

    _, mean, log_var = log_moments(np.array([4.0]), np.array([3.0]))
    assert mean == 4.0
    assert log_var == -math.inf


def test_quadrature_spec_validation():
    """Test spec invariants."""
    with pytest.raises(InvalidParameterError):
        QuadratureSpec(rel_tol=0.0)
    with pytest.raises(InvalidParameterError):
        QuadratureSpec(abs_tol=-1.0)
    with pytest.raises(InvalidParameterError):
        QuadratureSpec(max_depth=0)
    with pytest.raises(InvalidParameterError):
        QuadratureSpec(domain=(1.0, 0.0))


def test_integrate_exponential():
    """Test int_0^inf e^{-t} dt = 1."""
    value = integrate_adaptive(lambda t: LogArray.positive(-t))
    assert value.to_real() == pytest.approx(1.0, rel=1e-10)


def test_integrate_gamma_example():
    """Test int_0^inf t^3 e^{-2t} dt = 3!/2^4."""

    def integrand(t):
        with np.errstate(divide="ignore"):
            return LogArray.positive(3.0 * np.log(t) - 2.0 * t)

    value = integrate_adaptive(integrand, QuadratureSpec().over(0.0, math.inf, 1.5))
    assert value.to_real() == pytest.approx(0.375, rel=1e-10)


def test_integrate_polynomial():
    """Test int_0^1 x^3 dx = 1/4."""

    def integrand(x):
        with np.errstate(divide="ignore"):
            return LogArray.positive(3.0 * np.log(x))

    value = integrate_adaptive(integrand, QuadratureSpec().over(0.0, 1.0))
    assert value.to_real() == pytest.approx(0.25, rel=1e-12)


def test_integrate_signed_and_doubly_infinite():
    """Test a signed integrand and a Gaussian over the whole line."""
    linear = integrate_adaptive(
        pointwise(LogReal.from_real), QuadratureSpec().over(-1.0, 2.0)
    )
    assert linear.to_real() == pytest.approx(1.5, rel=1e-12)

    gauss = integrate_adaptive(
        lambda x: LogArray.positive(-(x**2)), QuadratureSpec().over(-math.inf, math.inf)
    )
    assert gauss.to_real() == pytest.approx(math.sqrt(math.pi), rel=1e-10)


def test_integrate_beyond_double_range():
    """Test that the estimate stays in log-space when the value overflows."""
    value = integrate_adaptive(
        lambda x: LogArray.positive(1000.0 + 2.0 * np.log(x)),
        QuadratureSpec().over(0.0, 1.0),
    )
    assert value.logmag == pytest.approx(1000.0 - math.log(3.0), rel=1e-14)


def test_integrate_additivity():
    """Test that splitting the domain matches one call."""

    def integrand(t):
        return LogArray.positive(np.log1p(t * t) - t)

    whole = integrate_adaptive(integrand, QuadratureSpec().over(0.0, math.inf))
    left = integrate_adaptive(integrand, QuadratureSpec().over(0.0, 2.7))
    right = integrate_adaptive(integrand, QuadratureSpec().over(2.7, math.inf))
    assert (left + right).to_real() == pytest.approx(whole.to_real(), rel=1e-9)


def test_integrate_nonconvergence():
    """Test that a non-integrable singularity exhausts the depth budget."""
    with pytest.raises(NonConvergenceError):
        integrate_adaptive(
            lambda x: LogArray.positive(-np.log(x)),
            QuadratureSpec(max_depth=8).over(0.0, 1.0),
        )


def test_integrate_empty_domain():
    """Test that a degenerate domain integrates to zero."""
    assert integrate_adaptive(
        lambda x: LogArray.positive(x), QuadratureSpec().over(1.0, 1.0)
    ).is_zero


def test_integrate_vector():
    """Test a vector integrand with shared panels."""

    def integrand(x):
        return np.stack([np.ones_like(x), x, x * x], axis=1)

    total = integrate_vector(integrand, QuadratureSpec().over(0.0, 1.0))
    assert total == pytest.approx([1.0, 0.5, 1.0 / 3.0], rel=1e-13)

    with pytest.raises(InvalidParameterError):
        integrate_vector(integrand, QuadratureSpec().over(0.0, math.inf))
