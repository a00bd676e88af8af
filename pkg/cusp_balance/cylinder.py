"""Flat cylinder model of the neck."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .const import PSI_EXTRA_DROP, REGIME_CASE_III, SERIES_DROP
from .exceptions import InvalidParameterError
from .model_kernel import ModelLevel, classify, rho_k0
from .numerics import LogReal, term_window

_LOGGER = logging.getLogger(__name__)

DEVIATION_SAMPLES = 201


@dataclass(frozen=True, slots=True)
class CylinderParams:
    """Cylinder with measure exp(-a^2 u^2 / (2k)) du dt around the circle t = k/a.

    k here is the series exponent of the disk level it models, so
    ``CylinderParams.for_level(ModelLevel(k + 1), a)`` and ``CylinderParams(k, a)``
    coincide.
    """

    k: float
    a: int

    def __post_init__(self) -> None:
        """Validate that (k, a) sits in the neck regime."""
        if not self.k > 0:
            raise InvalidParameterError(f"cylinder k must be positive, got {self.k}")
        if int(self.a) != self.a or self.a < 1:
            raise InvalidParameterError(f"cylinder a must be a positive integer, got {self.a}")
        if classify(self.level, self.a).regime != REGIME_CASE_III:
            raise InvalidParameterError(
                f"cylinder model needs a neck index, got a = {self.a} at k = {self.k}"
            )

    @classmethod
    def for_level(cls, level: ModelLevel, a: int) -> CylinderParams:
        return cls(level.exponent, a)

    @property
    def level(self) -> ModelLevel:
        """Disk level whose series exponent is k."""
        return ModelLevel(self.k + 1.0)

    @property
    def period(self) -> float:
        """Spacing k / a^2 of the Gaussian comb."""
        return self.k / (self.a * self.a)


def cylinder_norm_sq(params: CylinderParams, c: int) -> LogReal:
    """Return ||z^c||^2 = exp(k c^2 / (2 a^2)) on the cylinder."""
    return LogReal.from_log(params.k * c * c / (2.0 * params.a * params.a))


def _log_comb(params: CylinderParams, u: float) -> float:
    scale = params.a * params.a / (2.0 * params.k)
    period = params.period

    def log_term(c: np.ndarray) -> np.ndarray:
        return -scale * (u - period * c) ** 2

    c = term_window(log_term, u / period, None, SERIES_DROP + PSI_EXTRA_DROP)
    return float(logsumexp(log_term(c)))


def cylinder_rho(params: CylinderParams, u: float) -> LogReal:
    """Return the Gaussian comb sum_c exp(-(a^2/2k)(u - k c / a^2)^2)."""
    return LogReal.from_log(_log_comb(params, u))


def neck_deviation(params: CylinderParams, samples: int = DEVIATION_SAMPLES) -> float:
    """Return sup |rho_cyl(u) / rho_disk(k/a + u) - 1| over one Gaussian width.

    Both densities are normalized by their value at u = 0; the window is
    |u| <= sqrt(k) / a.
    """
    level = params.level
    t0 = params.k / params.a
    half = math.sqrt(params.k) / params.a
    log_cyl0 = _log_comb(params, 0.0)
    log_disk0 = rho_k0(level, t0).rho.logmag
    worst = 0.0
    for u in np.linspace(-half, half, samples):
        diff = (_log_comb(params, float(u)) - log_cyl0) - (
            rho_k0(level, t0 + float(u)).rho.logmag - log_disk0
        )
        worst = max(worst, abs(math.expm1(diff)))
    _LOGGER.debug("Neck deviation at k=%s, a=%s: %.3g", params.k, params.a, worst)
    return worst
