"""Bergman kernel of the cusp-metric punctured disk and its center-of-mass integrals.

Level convention: ``ModelLevel(k)`` is the Bergman space H_{k,0}. Its series
exponent is ``p = k - 1``:

    phi(x) = sum_{a >= 1} a^p x^{a-1},   x = |z|^2 = exp(-t)

Regime boundaries and ladder validity bounds are stated in k, every series
and break point uses p.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import gammainc, gammaincc, logsumexp

from .const import (
    CONCENTRATION_WIDTH,
    LADDER_INTEGRAL_SLACK,
    LADDER_PARTITION_SLACK,
    MIN_LEVEL,
    MIN_VOLUME_LEVEL,
    PSI_EXTRA_DROP,
    REGIME_CASE_I,
    REGIME_CASE_II,
    REGIME_CASE_III,
    SERIES_DROP,
)
from .exceptions import InvalidParameterError, OutOfLadderError
from .numerics import (
    ZERO,
    LogArray,
    LogReal,
    QuadratureSpec,
    integrate_adaptive,
    log_gamma,
    log_moments,
    term_window,
)

_LOGGER = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, slots=True)
class ModelLevel:
    """Tensor power k of the Bergman space H_{k,0}; real-valued."""

    k: float

    def __post_init__(self) -> None:
        """Validate the level."""
        if math.isnan(self.k) or self.k < MIN_LEVEL:
            raise InvalidParameterError(f"level k must be >= {MIN_LEVEL}, got {self.k}")

    @property
    def exponent(self) -> float:
        """Series exponent p = k - 1."""
        return self.k - 1.0

    @property
    def log_k(self) -> float:
        return math.log(self.k)

    @property
    def sqrt_k(self) -> float:
        return math.sqrt(self.k)


@dataclass(frozen=True, slots=True)
class RegimeIndex:
    """A section index a at a level, with its regime."""

    level: ModelLevel
    a: int
    regime: str


def classify(level: ModelLevel, a: int) -> RegimeIndex:
    """Classify index a at level k into CaseI, CaseII or CaseIII.

    CaseI is the bulk (a >= sqrt(k) log k), CaseIII the neck
    (sqrt(k)/log k <= a < sqrt(k) log k) and CaseII the cusp ladder below it.
    """
    _check_index(a)
    upper = level.sqrt_k * level.log_k
    lower = level.sqrt_k / level.log_k
    if a >= upper:
        regime = REGIME_CASE_I
    elif a >= lower:
        regime = REGIME_CASE_III
    else:
        regime = REGIME_CASE_II
    return RegimeIndex(level, a, regime)


def _check_index(a: int) -> None:
    if int(a) != a or a < 1:
        raise InvalidParameterError(f"section index must be a positive integer, got {a}")


def _check_t(t: float) -> None:
    if not t > 0 or not math.isfinite(t):
        raise InvalidParameterError(f"t = log(1/|z|^2) must be positive and finite, got {t}")


class LadderCell(NamedTuple):
    """Position of t in the ladder: interval n, and which half of it."""

    n: int
    outer: bool  # True on [p log a_{n+1}, p log b_n], False on [p log b_n, p log a_n]


@dataclass(frozen=True)
class LadderPartition:
    """Break points p log a_n, p log b_n in the t coordinate, ordered by n."""

    level: ModelLevel
    n_max: int
    t_breaks: tuple[float, ...]

    @classmethod
    def for_level(cls, level: ModelLevel) -> LadderPartition:
        """Build the partition with n_max^2 < k / (2 log k)."""
        bound = level.k / (LADDER_PARTITION_SLACK * level.log_k)
        n_max = 1
        while (n_max + 1) ** 2 < bound:
            n_max += 1
        p = level.exponent
        breaks: list[float] = []
        for n in range(1, n_max + 1):
            breaks.append(p * math.log((n + 1) / n))
            breaks.append(0.5 * p * math.log((n + 2) / n))
        breaks.append(p * math.log((n_max + 2) / (n_max + 1)))
        return cls(level, n_max, tuple(breaks))

    def locate(self, t: float) -> LadderCell:
        """Return the ladder cell containing t.

        Raises:
            OutOfLadderError: t lies below p log a_{n_max + 1}
        """
        if t < self.t_breaks[-1]:
            raise OutOfLadderError(
                f"t = {t} is below the last ladder break {self.t_breaks[-1]:.6g} "
                f"(n_max = {self.n_max})"
            )
        for n in range(1, self.n_max + 1):
            if t >= self.t_breaks[2 * n - 1]:
                return LadderCell(n, False)
            if t >= self.t_breaks[2 * n]:
                return LadderCell(n, True)
        raise OutOfLadderError(f"t = {t} not located in ladder")  # pragma: no cover


@dataclass(frozen=True, slots=True)
class KernelValue:
    """Bergman density rho_{k,0} and the density of omega_{k,0}."""

    rho: LogReal
    omega_density: LogReal


class _SeriesState(NamedTuple):
    log_phi: float
    mean: float
    log_var: float


def _series_state(p: float, t: float) -> _SeriesState:
    """Sum the phi series at t and its index mean and variance."""

    def log_term(a: np.ndarray) -> np.ndarray:
        return p * np.log(a) - (a - 1.0) * t

    a = term_window(log_term, p / t, 1.0, SERIES_DROP + PSI_EXTRA_DROP)
    log_phi, mean, log_var = log_moments(a, log_term(a))
    return _SeriesState(log_phi, mean, log_var)


def phi_k(level: ModelLevel, t: float) -> LogReal:
    """Return phi(x) = sum a^p x^{a-1} at x = exp(-t)."""
    _check_t(t)
    return LogReal.from_log(_series_state(level.exponent, t).log_phi)


def psi_k(level: ModelLevel, t: float) -> LogReal:
    """Return psi = phi * (x phi')' - x phi'^2 at x = exp(-t).

    Uses psi = (1/x) sum_{a<b} T_a T_b (b - a)^2 with T_a = a^p x^{a-1}, that
    is phi^2 times the T-weighted variance of a, divided by x.
    """
    _check_t(t)
    state = _series_state(level.exponent, t)
    return LogReal.from_log(2.0 * state.log_phi + state.log_var + t)


def psi_coefficient(level: ModelLevel, l: int) -> LogReal:  # noqa: E741
    """Return c_l = sum_{a+b=l, 1<=a<b} (ab)^p (b-a)^2, the x^{l-3} coefficient of psi."""
    p = level.exponent
    a = np.arange(1, (l + 1) // 2, dtype=float)
    if a.size == 0:
        return ZERO
    b = l - a
    return LogReal.from_log(float(logsumexp(p * np.log(a * b) + 2.0 * np.log(b - a))))


def ladder_approx(
    level: ModelLevel, t: float, partition: LadderPartition | None = None
) -> tuple[LogReal, LogReal]:
    """Return the two-term (phi, psi) approximants on the ladder cell of t.

    Raises:
        OutOfLadderError: t is below the last ladder break
    """
    _check_t(t)
    partition = partition or LadderPartition.for_level(level)
    n, outer = partition.locate(t)
    p = level.exponent
    log_x = -t
    if outer:
        phi_terms = (
            p * math.log(n + 1) + n * log_x,
            p * math.log(n + 2) + (n + 1) * log_x,
        )
    else:
        phi_terms = (
            p * math.log(n) + (n - 1) * log_x,
            p * math.log(n + 1) + n * log_x,
        )
    psi_terms = (
        p * math.log(n * (n + 1)) + (2 * n - 2) * log_x,
        p * math.log((n + 1) * (n + 2)) + 2 * n * log_x,
    )
    phi = LogReal.from_log(float(np.logaddexp(*phi_terms)))
    psi = LogReal.from_log(float(np.logaddexp(*psi_terms)))
    return phi, psi


def rho_k0(level: ModelLevel, t: float) -> KernelValue:
    """Evaluate the Bergman density and the omega_{k,0} density at t.

    rho = t^k / (2 pi (k-2)!) * sum_a a^p exp(-a t)
    omega density = psi / (2 pi phi^2)
    """
    _check_t(t)
    state = _series_state(level.exponent, t)
    log_rho = (
        level.k * math.log(t) - LOG_2PI - log_gamma(level.k - 1.0) - t + state.log_phi
    )
    log_psi = 2.0 * state.log_phi + state.log_var + t
    return KernelValue(
        rho=LogReal.from_log(log_rho),
        omega_density=LogReal.from_log(log_psi - LOG_2PI - 2.0 * state.log_phi),
    )


def monomial_norm_sq(level: ModelLevel, a: int) -> LogReal:
    """Return ||z^a||^2 = 2 pi (k-2)! / a^{k-1} via log-Gamma."""
    _check_index(a)
    return LogReal.from_log(
        LOG_2PI + log_gamma(level.k - 1.0) - (level.k - 1.0) * math.log(a)
    )


def monomial_norm_quadrature(
    level: ModelLevel, a: int, spec: QuadratureSpec | None = None
) -> LogReal:
    """Return ||z^a||^2 by the radial integral 2 pi int_0^inf t^{k-2} e^{-a t} dt."""
    _check_index(a)
    spec = (spec or QuadratureSpec()).over(0.0, math.inf, (level.k - 2.0) / a)
    power = level.k - 2.0

    def integrand(t: np.ndarray) -> LogArray:
        with np.errstate(divide="ignore"):
            return LogArray.positive(power * np.log(t) - a * t)

    return integrate_adaptive(integrand, spec) * LogReal(1, LOG_2PI)


def monomial_inner_product(
    level: ModelLevel, a: int, b: int, spec: QuadratureSpec | None = None
) -> LogReal:
    """Return <z^a, z^b>_k.

    The angular integral of exp(i (a - b) theta) vanishes for a != b, so only
    the radial integral is ever evaluated.
    """
    _check_index(a)
    _check_index(b)
    if a != b:
        return ZERO
    return monomial_norm_quadrature(level, a, spec)


def concentration_ratio(
    level: ModelLevel, a: int, width: float = CONCENTRATION_WIDTH
) -> float:
    """Return the share of int_0^inf t^{k-2} e^{-at} dt inside the concentration window.

    The window is |t - (k-2)/a| <= width * sqrt(k) log k / a. Both integrals
    are incomplete Gamma values of shape k - 1.
    """
    _check_index(a)
    if not width > 0:
        raise InvalidParameterError(f"window width must be positive, got {width}")
    centre = (level.k - 2.0) / a
    half = width * level.sqrt_k * level.log_k / a
    t_lo = max(0.0, centre - half)
    t_hi = centre + half
    shape = level.k - 1.0
    below = float(gammainc(shape, a * t_lo)) if t_lo > 0 else 0.0
    above = float(gammaincc(shape, a * t_hi)) if math.isfinite(t_hi) else 0.0
    return 1.0 - below - above


def cusp_volume_closed_form(level: ModelLevel, t: float) -> float:
    """Return the omega_{k,0}-volume of {t' >= t}, which is x phi'/phi at x = e^{-t}."""
    _check_t(t)
    return _series_state(level.exponent, t).mean - 1.0


def _variance_integrand(level: ModelLevel, a: int | None) -> Callable[[np.ndarray], LogArray]:
    """Return t -> Var_t(index), optionally weighted by the share of index a."""
    p = level.exponent

    def integrand(ts: np.ndarray) -> LogArray:
        out = np.empty(ts.shape, dtype=float)
        for i, t in enumerate(ts):
            state = _series_state(p, float(t))
            out[i] = state.log_var
            if a is not None:
                out[i] += p * math.log(a) - (a - 1.0) * t - state.log_phi
        return LogArray.positive(out)

    return integrand


def omega_volume(
    level: ModelLevel, t_lo: float, t_hi: float, spec: QuadratureSpec | None = None
) -> float:
    """Return the omega_{k,0}-volume of the annulus t_lo <= t <= t_hi.

    Radially this is int Var_t(a) dt over the annulus, Var_t being the
    variance of the index under the weights a^p x^{a-1}. Empty annuli give 0.
    """
    if t_lo >= t_hi:
        return 0.0
    _check_t(t_lo)
    spec = (spec or QuadratureSpec()).over(t_lo, t_hi)
    return integrate_adaptive(_variance_integrand(level, None), spec).to_real()


def volume_near_cusp(level: ModelLevel, spec: QuadratureSpec | None = None) -> float:
    """Return (1/k) times the omega_{k,0}-volume of {t >= sqrt(k) / log k}.

    Compare the result against k^{-1/2} log k.
    """
    if level.k < MIN_VOLUME_LEVEL:
        raise InvalidParameterError(
            f"volume_near_cusp needs k >= {MIN_VOLUME_LEVEL}, got {level.k}"
        )
    threshold = level.sqrt_k / level.log_k
    return omega_volume(level, threshold, math.inf, spec) / level.k


def mu_lower_limit(level: ModelLevel, a: int) -> float:
    """Return the t below which the share of index a is negligible."""
    p = level.exponent
    t_star = max(p - 1.0, 1.0) / a
    return min(t_star * math.exp(-8.0 / math.sqrt(p)), 0.5 * p * math.log1p(1.0 / a))


def mu_partial(
    level: ModelLevel,
    a: int,
    t_lo: float,
    t_hi: float,
    spec: QuadratureSpec | None = None,
) -> float:
    """Return the contribution of the annulus t_lo <= t <= t_hi to mu_a."""
    _check_index(a)
    if t_lo >= t_hi:
        return 0.0
    _check_t(t_lo)
    spec = (spec or QuadratureSpec()).over(t_lo, t_hi)
    return integrate_adaptive(_variance_integrand(level, a), spec).to_real()


def mu_direct(level: ModelLevel, a: int, spec: QuadratureSpec | None = None) -> float:
    """Return mu_a = int_0^inf a^p e^{-at} psi / phi^3 dt.

    The integrand is the share of index a at t times the index variance at t.
    Below the returned lower limit the share of index a is beyond double
    precision and the integral starts there.

    Raises:
        NonConvergenceError: Propagated from quadrature
    """
    _check_index(a)
    p = level.exponent
    t_lo = mu_lower_limit(level, a)
    hints = [p * math.log1p(1.0 / a)]
    if a > 1:
        hints.append(p * math.log(a / (a - 1.0)))
    spec = (spec or QuadratureSpec()).over(t_lo, math.inf, *sorted(hints))
    value = integrate_adaptive(_variance_integrand(level, a), spec).to_real()
    _LOGGER.debug("mu_direct(k=%s, a=%s) = %.17g from t >= %.6g", level.k, a, value, t_lo)
    return value


def _check_ladder_n(level: ModelLevel, n: int) -> None:
    if int(n) != n or n < 1:
        raise InvalidParameterError(f"ladder interval n must be >= 1, got {n}")
    if n * n >= level.k / (LADDER_INTEGRAL_SLACK * level.log_k):
        raise OutOfLadderError(
            f"ladder interval n = {n} outside validity n^2 < k / log k at k = {level.k}"
        )


def _ladder_pair(
    level: ModelLevel, a: int, n: int, to_cusp: bool, spec: QuadratureSpec
) -> tuple[float, float]:
    """Integrate the two-term approximants over both halves of ladder interval n.

    In s = log y, with y the ratio of the two dominant phi terms:
        I  = C  int_0^{-log(b)/2} e^{(a+2-n)s} (1 + b e^{2s})  / (1 + e^s)^3 ds
        I' = C' int_{log(b)/2}^0  e^{(a+1-n)s} (1 + b e^{-2s}) / (1 + e^s)^3 ds
    where b = (n(n+2)/(n+1)^2)^p.
    """
    p = level.exponent
    log_b = p * math.log(n * (n + 2) / (n + 1) ** 2)
    log_c = p * (
        math.log(a + 1)
        + math.log(n + 1)
        - 2.0 * math.log(n)
        + (a + 2 - n) * (math.log(n) - math.log(n + 1))
    )
    log_c_prime = p * (
        math.log(a + 1)
        + math.log(n + 2)
        - 2.0 * math.log(n + 1)
        + (a - n + 1) * (math.log(n + 1) - math.log(n + 2))
    )

    def inner(s: np.ndarray) -> LogArray:
        return LogArray.positive(
            log_c
            + (a + 2 - n) * s
            + np.logaddexp(0.0, log_b + 2.0 * s)
            - 3.0 * np.logaddexp(0.0, s)
        )

    def outer(s: np.ndarray) -> LogArray:
        return LogArray.positive(
            log_c_prime
            + (a + 1 - n) * s
            + np.logaddexp(0.0, log_b - 2.0 * s)
            - 3.0 * np.logaddexp(0.0, s)
        )

    s_top = -0.5 * log_b
    s_start = -math.inf if to_cusp else 0.0
    value = integrate_adaptive(inner, spec.over(s_start, s_top, 0.0)).to_real()
    value_prime = integrate_adaptive(outer, spec.over(-s_top, 0.0)).to_real()
    return value, value_prime


def ladder_integrals(
    level: ModelLevel, a: int, n: int, spec: QuadratureSpec | None = None
) -> tuple[float, float]:
    """Return (I_{a,n}, I'_{a,n}) for the section z^{a+1} on ladder interval n.

    I covers [p log b_n, p log a_n] and I' covers [p log a_{n+1}, p log b_n].
    For large k, I_{n,n} and I'_{n,n} tend to 3/8, I_{n-1,n} and I'_{n+1,n}
    to 1/8, and I_{n-2,n} to 0.

    Raises:
        OutOfLadderError: n^2 >= k / log k
    """
    if int(a) != a or a < 0:
        raise InvalidParameterError(f"ladder index a must be >= 0, got {a}")
    _check_ladder_n(level, n)
    return _ladder_pair(level, a, n, False, spec or QuadratureSpec())


def mu_ladder(level: ModelLevel, a: int, spec: QuadratureSpec | None = None) -> float:
    """Return mu_a summed from ladder integrals, the first interval reaching the cusp.

    Raises:
        OutOfLadderError: a exceeds the partition's n_max
    """
    _check_index(a)
    partition = LadderPartition.for_level(level)
    if a > partition.n_max:
        raise OutOfLadderError(
            f"mu_ladder needs a <= n_max = {partition.n_max} at k = {level.k}, got {a}"
        )
    spec = spec or QuadratureSpec()
    total = 0.0
    for n in range(1, partition.n_max + 1):
        value, value_prime = _ladder_pair(level, a - 1, n, n == 1, spec)
        total += value + value_prime
    return total


@lru_cache(maxsize=4096)
def mu_auto(level: ModelLevel, a: int) -> float:
    """Return mu_a by the route suited to its regime, cached per (k, a)."""
    if classify(level, a).regime == REGIME_CASE_III:
        from .neck import mu_neck

        return mu_neck(level, a, check_tail=False)
    return mu_direct(level, a)


def mu_route(level: ModelLevel, a: int) -> str:
    """Name the route mu_auto takes for (k, a)."""
    return "neck" if classify(level, a).regime == REGIME_CASE_III else "direct"


def expected_mu(a: int) -> float:
    """Leading value of mu_a: 1/2 for the first section, 1 otherwise."""
    return 0.5 if a == 1 else 1.0

