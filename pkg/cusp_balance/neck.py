"""Neck regime: the shifted series f_a, g_a, h_a and the u-integral route for mu_a.

With t = p/a + u the phi series divided by its a-th term becomes

    f_a(u) = sum_{c >= 1-a} exp(p (log(1 + c/a) - c/a) - c u)

and mu_a is the integral of Var_F(c) / f_a over u.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .const import (
    NECK_POLYLOG_POWER,
    NECK_TAIL_TOL,
    NECK_WINDOW_POWER,
    PSI_EXTRA_DROP,
    REGIME_CASE_III,
    SERIES_DROP,
)
from .exceptions import InvalidParameterError
from .model_kernel import ModelLevel, classify, mu_lower_limit
from .numerics import (
    LogArray,
    LogReal,
    QuadratureSpec,
    integrate_adaptive,
    log_moments,
    signed_log_sum,
    term_window,
)

_LOGGER = logging.getLogger(__name__)

_DROP = SERIES_DROP + PSI_EXTRA_DROP


@dataclass(frozen=True, slots=True)
class NeckValues:
    """f_a with its first two u-derivatives, the truncated g_a and the theta h_a."""

    f: LogReal
    fd: LogReal
    fdd: LogReal
    g: LogReal
    h: LogReal


def _f_terms(p: float, a: int, u: float) -> tuple[np.ndarray, np.ndarray]:
    """Return the window of shifts c and log F_c at u."""
    if not p + a * u > 0:
        raise InvalidParameterError(f"u = {u} lies beyond the puncture (t <= 0)")

    def log_term(c: np.ndarray) -> np.ndarray:
        return p * (np.log1p(c / a) - c / a) - c * u

    c = term_window(log_term, a * p / (p + a * u) - a, 1.0 - a, _DROP)
    return c, log_term(c)


def _theta_terms(b: float, u: float) -> tuple[np.ndarray, np.ndarray]:
    """Return the window of c and log exp(-b c^2 - c u)."""

    def log_term(c: np.ndarray) -> np.ndarray:
        return -b * c * c - c * u

    c = term_window(log_term, -u / (2.0 * b), None, _DROP)
    return c, log_term(c)


def _weighted(c: np.ndarray, log_terms: np.ndarray, power: int) -> LogReal:
    """Return sum c^power F_c as a LogReal."""
    if power == 0:
        return LogReal.from_log(float(logsumexp(log_terms)))
    with np.errstate(divide="ignore"):
        log_c = np.log(np.abs(c))
    return signed_log_sum(log_terms + power * log_c, np.sign(c) ** power)


def _neck_window(level: ModelLevel) -> float:
    return level.log_k**NECK_WINDOW_POWER


def _check_neck(level: ModelLevel, a: int) -> None:
    if classify(level, a).regime != REGIME_CASE_III:
        raise InvalidParameterError(
            f"index a = {a} is not in the neck regime at k = {level.k}"
        )


def neck_functions(level: ModelLevel, a: int, u: float) -> NeckValues:
    """Evaluate f_a, f_a', f_a'', g_a and h_a at u.

    g_a keeps the shifts |c| <= (log k)^5 of f_a. h_a is the Gaussian theta
    series sum_c exp(-p c^2 / (2 a^2) - c u).

    Raises:
        InvalidParameterError: a outside the neck regime or |u| > 2 (log k)^2
    """
    _check_neck(level, a)
    if abs(u) > 2.0 * _neck_window(level):
        raise InvalidParameterError(
            f"|u| = {abs(u)} exceeds 2 (log k)^2 = {2.0 * _neck_window(level):.6g}"
        )
    p = level.exponent
    c, log_f = _f_terms(p, a, u)
    keep = np.abs(c) <= level.log_k**NECK_POLYLOG_POWER
    ch, log_h = _theta_terms(p / (2.0 * a * a), u)
    return NeckValues(
        f=_weighted(c, log_f, 0),
        fd=-_weighted(c, log_f, 1),
        fdd=_weighted(c, log_f, 2),
        g=_weighted(c[keep], log_f[keep], 0),
        h=_weighted(ch, log_h, 0),
    )


def _neck_domain(level: ModelLevel, a: int) -> tuple[float, float]:
    window = _neck_window(level)
    cusp_side = mu_lower_limit(level, a) - level.exponent / a
    return max(-window, cusp_side), window


def _mu_neck_integrand(level: ModelLevel, a: int) -> Callable[[np.ndarray], LogArray]:
    p = level.exponent

    def integrand(us: np.ndarray) -> LogArray:
        out = np.empty(us.shape, dtype=float)
        for i, u in enumerate(us):
            c, log_f = _f_terms(p, a, float(u))
            log_total, _, log_var = log_moments(c, log_f)
            out[i] = log_var - log_total
        return LogArray.positive(out)

    return integrand


def mu_neck(
    level: ModelLevel,
    a: int,
    spec: QuadratureSpec | None = None,
    check_tail: bool = True,
) -> float:
    """Return mu_a as the integral of (log f_a)'' / f_a over the neck window.

    The window is |u| <= (log k)^2, clipped on the cusp side where the index
    share vanishes. With check_tail the stretch out to twice the window is
    integrated once and a warning is logged if it is not negligible.

    Raises:
        InvalidParameterError: a outside the neck regime
        NonConvergenceError: Propagated from quadrature
    """
    _check_neck(level, a)
    spec = spec or QuadratureSpec()
    lo, hi = _neck_domain(level, a)
    integrand = _mu_neck_integrand(level, a)
    value = integrate_adaptive(integrand, spec.over(lo, hi, 0.0)).to_real()

    if check_tail:
        cusp_side = mu_lower_limit(level, a) - level.exponent / a
        tail = integrate_adaptive(integrand, spec.over(hi, 2.0 * hi)).to_real()
        if lo > cusp_side:
            tail += integrate_adaptive(
                integrand, spec.over(max(2.0 * lo, cusp_side), lo)
            ).to_real()
        if tail > NECK_TAIL_TOL * abs(value):
            _LOGGER.warning(
                "Neck tail beyond |u| = %.4g carries %.3g of mu_%d at k = %s",
                hi, tail / value, a, level.k,
            )
    _LOGGER.debug("mu_neck(k=%s, a=%s) = %.17g on [%.6g, %.6g]", level.k, a, value, lo, hi)
    return value


def neck_integration_by_parts(
    level: ModelLevel, a: int, spec: QuadratureSpec | None = None
) -> tuple[float, float]:
    """Return (int f''/f^2, 2 int f'^2/f^3) over the neck window.

    They differ by the boundary term [-f'/f^2], which is negligible when the
    window ends are far in the tails of 1/f.
    """
    _check_neck(level, a)
    spec = spec or QuadratureSpec()
    lo, hi = _neck_domain(level, a)
    p = level.exponent

    def lhs(us: np.ndarray) -> LogArray:
        out = np.empty(us.shape, dtype=float)
        for i, u in enumerate(us):
            c, log_f = _f_terms(p, a, float(u))
            out[i] = _weighted(c, log_f, 2).logmag - 2.0 * _weighted(c, log_f, 0).logmag
        return LogArray.positive(out)

    def rhs(us: np.ndarray) -> LogArray:
        out = np.empty(us.shape, dtype=float)
        for i, u in enumerate(us):
            c, log_f = _f_terms(p, a, float(u))
            fd = _weighted(c, log_f, 1)
            f = _weighted(c, log_f, 0)
            out[i] = math.log(2.0) + 2.0 * fd.logmag - 3.0 * f.logmag
        return LogArray.positive(out)

    region = spec.over(lo, hi, 0.0)
    return (
        integrate_adaptive(lhs, region).to_real(),
        integrate_adaptive(rhs, region).to_real(),
    )


def theta_identity(b: float, spec: QuadratureSpec | None = None) -> float:
    """Return int_R h''(u) / h(u)^2 du for h(u) = sum_c exp(-b c^2 - c u).

    The integral equals 2 for every b > 0.
    """
    if not b > 0 or not math.isfinite(b):
        raise InvalidParameterError(f"theta parameter b must be positive, got {b}")

    def integrand(us: np.ndarray) -> LogArray:
        out = np.empty(us.shape, dtype=float)
        for i, u in enumerate(us):
            c, log_h = _theta_terms(b, float(u))
            out[i] = _weighted(c, log_h, 2).logmag - 2.0 * float(logsumexp(log_h))
        return LogArray.positive(out)

    spec = (spec or QuadratureSpec()).over(-math.inf, math.inf, -b, 0.0, b)
    return integrate_adaptive(integrand, spec).to_real()
