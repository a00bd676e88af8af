"""Log-space scalars, stable summation and adaptive Gauss-Legendre quadrature.

Every series term in this package (a^{k-1} x^{a-1}, (k-2)!, ...) overflows double
precision long before the interesting levels k are reached, so values travel as
a sign plus the natural log of the magnitude. Integrands hand back the same
representation for a whole vector of abscissae at once.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import pairwise
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln, logsumexp, roots_legendre

from .const import (
    DEFAULT_ABS_TOL,
    DEFAULT_MAX_DEPTH,
    DEFAULT_REL_TOL,
    DEFAULT_TAIL_STEP,
    GAUSS_ORDER,
    INITIAL_PANELS,
    MAX_PANELS,
    MAX_TAIL_DOUBLINGS,
    TAIL_DROP_FACTOR,
)
from .exceptions import InvalidParameterError, NonConvergenceError

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class LogReal:
    """Signed real stored as (sign, log|value|)."""

    sign: int
    logmag: float

    def __post_init__(self) -> None:
        """Normalize zero and reject malformed values."""
        if self.sign not in (-1, 0, 1):
            raise InvalidParameterError(f"sign must be -1, 0 or 1, got {self.sign}")
        if self.sign == 0:
            object.__setattr__(self, "logmag", -math.inf)
        elif math.isnan(self.logmag) or self.logmag == -math.inf:
            raise InvalidParameterError(
                f"nonzero LogReal needs a finite logmag, got {self.logmag}"
            )

    @classmethod
    def from_real(cls, value: float) -> LogReal:
        """Convert a float, mapping 0.0 to the zero LogReal."""
        if math.isnan(value):
            raise InvalidParameterError("cannot represent NaN as LogReal")
        if value == 0:
            return ZERO
        return cls(1 if value > 0 else -1, math.log(abs(value)))

    @classmethod
    def from_log(cls, logmag: float, sign: int = 1) -> LogReal:
        """Build a LogReal from a log-magnitude; -inf gives zero."""
        if logmag == -math.inf or sign == 0:
            return ZERO
        return cls(sign, float(logmag))

    @property
    def is_zero(self) -> bool:
        """Return True for the zero value."""
        return self.sign == 0

    def to_real(self) -> float:
        """Return the float value, saturating to +-inf on overflow."""
        if self.sign == 0:
            return 0.0
        try:
            return self.sign * math.exp(self.logmag)
        except OverflowError:
            return math.copysign(math.inf, self.sign)

    def __float__(self) -> float:
        return self.to_real()

    def __neg__(self) -> LogReal:
        if self.sign == 0:
            return ZERO
        return LogReal(-self.sign, self.logmag)

    def __abs__(self) -> LogReal:
        if self.sign == 0:
            return ZERO
        return LogReal(1, self.logmag)

    def __mul__(self, other: LogReal) -> LogReal:
        if self.sign == 0 or other.sign == 0:
            return ZERO
        return LogReal(self.sign * other.sign, self.logmag + other.logmag)

    def __truediv__(self, other: LogReal) -> LogReal:
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero LogReal")
        if self.sign == 0:
            return ZERO
        return LogReal(self.sign * other.sign, self.logmag - other.logmag)

    def __pow__(self, exponent: int) -> LogReal:
        if self.sign == 0:
            if exponent < 0:
                raise ZeroDivisionError("negative power of a zero LogReal")
            return ONE if exponent == 0 else ZERO
        sign = self.sign if exponent % 2 else 1
        return LogReal(sign, exponent * self.logmag)

    def __add__(self, other: LogReal) -> LogReal:
        return log_sum_exp((self, other))

    def __sub__(self, other: LogReal) -> LogReal:
        return log_sum_exp((self, -other))


ZERO = LogReal(0, -math.inf)
ONE = LogReal(1, 0.0)


class LogArray(NamedTuple):
    """Vectorized LogReal: element-wise signs and log-magnitudes."""

    sign: np.ndarray
    logmag: np.ndarray

    @classmethod
    def positive(cls, logmag: np.ndarray) -> LogArray:
        """Wrap log-magnitudes of a nonnegative quantity."""
        logmag = np.asarray(logmag, dtype=float)
        return cls(np.where(np.isneginf(logmag), 0.0, 1.0), logmag)


LogIntegrand = Callable[[np.ndarray], LogArray]


def pointwise(func: Callable[[float], LogReal]) -> LogIntegrand:
    """Lift a scalar real -> LogReal function to a vectorized integrand."""

    def integrand(x: np.ndarray) -> LogArray:
        values = [func(float(v)) for v in np.atleast_1d(x)]
        return LogArray(
            np.array([v.sign for v in values], dtype=float),
            np.array([v.logmag for v in values], dtype=float),
        )

    return integrand


def signed_log_sum(logmag: np.ndarray, sign: np.ndarray) -> LogReal:
    """Sum sign * exp(logmag) over arrays, pivoting on the largest term."""
    logmag = np.asarray(logmag, dtype=float)
    sign = np.asarray(sign, dtype=float)
    mask = (sign != 0) & ~np.isneginf(logmag)
    if not mask.any():
        return ZERO
    with np.errstate(divide="ignore"):
        value, out_sign = logsumexp(logmag[mask], b=sign[mask], return_sign=True)
    if out_sign == 0 or not np.isfinite(value):
        return ZERO
    return LogReal(int(out_sign), float(value))


def log_sum_exp(terms: Iterable[LogReal]) -> LogReal:
    """Return the signed sum of LogReal terms without leaving log-space."""
    signs: list[int] = []
    logs: list[float] = []
    for term in terms:
        if term.sign:
            signs.append(term.sign)
            logs.append(term.logmag)
    if not logs:
        return ZERO
    return signed_log_sum(np.asarray(logs), np.asarray(signs))


def log_gamma(x: float) -> float:
    """Return log Gamma(x) for x > 0."""
    if x <= 0:
        raise InvalidParameterError(f"log_gamma needs x > 0, got {x}")
    return float(gammaln(x))


def log_factorial(n: float) -> float:
    """Return log n! (n may be real, n > -1)."""
    return log_gamma(n + 1.0)


def term_window(
    log_term: Callable[[np.ndarray], np.ndarray],
    peak: float,
    lower: float | None,
    drop: float,
) -> np.ndarray:
    """Return the integer indices whose log-concave terms lie within drop of the max.

    The window is grown by doubling on each side of the peak until a term falls
    below max - drop.
    """

    def at(x: float) -> float:
        return float(log_term(np.array([x], dtype=float))[0])

    centre = float(math.floor(peak))
    if lower is not None:
        centre = max(lower, centre)
    top = max(at(centre), at(centre + 1.0))
    threshold = top - drop

    width = 1.0
    while at(centre + width) >= threshold:
        width *= 2.0
    hi = centre + width

    lo = centre
    width = 1.0
    while lower is None or lo > lower:
        lo = centre - width
        if lower is not None:
            lo = max(lower, lo)
        if at(lo) < threshold:
            break
        width *= 2.0
    return np.arange(lo, hi + 1.0)


def log_moments(values: np.ndarray, logw: np.ndarray) -> tuple[float, float, float]:
    """Return log of the total weight, the mean and the log-variance of values.

    values must be sorted ascending. The spread around the first value is
    accumulated in log-space so a distribution concentrated on one value keeps
    its relative precision.
    """
    log_total = float(logsumexp(logw))
    logw = logw - log_total
    if values.size < 2:
        return log_total, float(values[0]), -math.inf
    offset = values - values[0]
    with np.errstate(divide="ignore"):
        log_offset = np.log(offset)
    log_shift = float(logsumexp(logw[1:] + log_offset[1:]))
    shift = math.exp(log_shift)
    with np.errstate(divide="ignore"):
        log_dev = np.log(np.abs(offset - shift))
    log_dev[0] = log_shift
    log_var = float(logsumexp(logw + 2.0 * log_dev))
    return log_total, float(values[0]) + shift, log_var


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and domain for integrate_adaptive.

    Either end of the domain may be infinite. ``points`` are extra panel edges
    (known kinks or peaks), ``tail_step`` is the first probe distance used to
    locate the truncation point of an infinite end.
    """

    abs_tol: float = DEFAULT_ABS_TOL
    rel_tol: float = DEFAULT_REL_TOL
    max_depth: int = DEFAULT_MAX_DEPTH
    domain: tuple[float, float] = (0.0, math.inf)
    points: tuple[float, ...] = field(default=())
    tail_step: float = DEFAULT_TAIL_STEP

    def __post_init__(self) -> None:
        """Validate tolerances and domain."""
        if not self.abs_tol > 0:
            raise InvalidParameterError(f"abs_tol must be > 0, got {self.abs_tol}")
        if not self.rel_tol > 0:
            raise InvalidParameterError(f"rel_tol must be > 0, got {self.rel_tol}")
        if self.max_depth < 1:
            raise InvalidParameterError(
                f"max_depth must be >= 1, got {self.max_depth}"
            )
        lo, hi = self.domain
        if math.isnan(lo) or math.isnan(hi) or lo > hi:
            raise InvalidParameterError(f"invalid domain {self.domain}")
        if not self.tail_step > 0:
            raise InvalidParameterError(
                f"tail_step must be > 0, got {self.tail_step}"
            )

    def over(self, lo: float, hi: float, *points: float) -> QuadratureSpec:
        """Return a copy on another domain with optional panel edges."""
        return replace(self, domain=(lo, hi), points=tuple(points))


@lru_cache(maxsize=8)
def _gauss_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_legendre(order)
    return np.asarray(nodes), np.asarray(weights)


@dataclass
class _Panel:
    lo: float
    hi: float
    depth: int
    value: LogReal
    log_err: float


def _log_panel(f: LogIntegrand, lo: float, hi: float, depth: int) -> _Panel:
    """Integrate one panel with paired Gauss-Legendre rules."""
    coarse_x, coarse_w = _gauss_rule(GAUSS_ORDER)
    fine_x, fine_w = _gauss_rule(2 * GAUSS_ORDER)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    values = f(mid + half * np.concatenate((coarse_x, fine_x)))
    signs = np.asarray(values.sign, dtype=float)
    logs = np.asarray(values.logmag, dtype=float)
    if np.isnan(logs).any() or np.isposinf(logs).any():
        raise NonConvergenceError(f"integrand not finite on panel [{lo}, {hi}]")

    n = GAUSS_ORDER
    coarse = signed_log_sum(logs[:n] + np.log(coarse_w), signs[:n])
    fine = signed_log_sum(logs[n:] + np.log(fine_w), signs[n:])
    log_half = math.log(half)
    value = fine * LogReal(1, log_half) if not fine.is_zero else fine
    diff = fine - coarse
    log_err = diff.logmag + log_half if not diff.is_zero else -math.inf
    return _Panel(lo, hi, depth, value, log_err)


def _probe_tail(
    f: LogIntegrand, anchor: float, direction: int, spec: QuadratureSpec
) -> list[float]:
    """Walk away from anchor geometrically until the integrand has decayed."""
    points = [anchor]
    running = float(f(np.array([anchor])).logmag[0])
    if math.isnan(running):
        running = -math.inf
    drop = math.log(spec.rel_tol * TAIL_DROP_FACTOR)
    for j in range(MAX_TAIL_DOUBLINGS):
        x = anchor + direction * spec.tail_step * 2.0**j
        value = float(f(np.array([x])).logmag[0])
        if math.isnan(value):
            raise NonConvergenceError(f"integrand is NaN at {x}")
        points.append(x)
        if value > running:
            running = value
        elif value < running + drop:
            _LOGGER.debug("Tail from %s truncated at %s", anchor, x)
            return points
        if running == -math.inf and j >= 64:
            return points
    raise NonConvergenceError(
        f"integrand tail from {anchor} did not decay within "
        f"{MAX_TAIL_DOUBLINGS} doublings"
    )


def _panel_edges(
    f: LogIntegrand, spec: QuadratureSpec
) -> tuple[list[float], list[tuple[float, float]]]:
    """Return initial panel edges and the tail stretches that verify truncation."""
    lo, hi = spec.domain
    checks: list[tuple[float, float]] = []
    if math.isfinite(lo) and math.isfinite(hi):
        edges = [float(x) for x in np.linspace(lo, hi, INITIAL_PANELS + 1)]
    else:
        if math.isfinite(lo):
            anchor = lo
        elif math.isfinite(hi):
            anchor = hi
        else:
            anchor = spec.points[len(spec.points) // 2] if spec.points else 0.0
        edges = [anchor]
        if hi == math.inf:
            right = _probe_tail(f, anchor, 1, spec)
            end = right[-1]
            doubled = anchor + 2.0 * (end - anchor)
            edges.extend(right[1:])
            edges.append(doubled)
            checks.append((end, doubled))
        elif hi != anchor:
            edges.append(hi)
        if lo == -math.inf:
            left = _probe_tail(f, anchor, -1, spec)
            end = left[-1]
            doubled = anchor - 2.0 * (anchor - end)
            edges.extend(left[1:])
            edges.append(doubled)
            checks.append((doubled, end))
        elif lo != anchor:
            edges.append(lo)
    first, last = min(edges), max(edges)
    edges.extend(p for p in spec.points if first < p < last)
    return sorted(set(edges)), checks


def integrate_adaptive(f: LogIntegrand, spec: QuadratureSpec | None = None) -> LogReal:
    """Integrate a log-space integrand over spec.domain.

    Panels carry a 10-point and a 20-point Gauss-Legendre estimate; their
    difference is the panel error. Every round bisects the panels whose error
    exceeds their share of the tolerance until the summed error is below
    max(abs_tol, rel_tol * |estimate|).

    Args:
        f: Vectorized integrand returning a LogArray
        spec: Tolerances and domain (defaults to QuadratureSpec())

    Returns:
        The integral as a LogReal

    Raises:
        NonConvergenceError: Depth or panel budget exhausted above tolerance
    """
    spec = spec or QuadratureSpec()
    lo, hi = spec.domain
    if lo == hi:
        return ZERO

    edges, checks = _panel_edges(f, spec)
    panels = [_log_panel(f, a, b, 0) for a, b in pairwise(edges)]
    log_abs_tol = math.log(spec.abs_tol)
    log_rel_tol = math.log(spec.rel_tol)

    while True:
        total = signed_log_sum(
            np.array([p.value.logmag for p in panels]),
            np.array([p.value.sign for p in panels]),
        )
        log_err = _log_total(np.array([p.log_err for p in panels]))
        log_tol = log_abs_tol
        if not total.is_zero:
            log_tol = max(log_abs_tol, log_rel_tol + total.logmag)
        if log_err <= log_tol:
            break

        share = log_tol - math.log(len(panels))
        worst = max(panels, key=lambda p: p.log_err)
        refined: list[_Panel] = []
        for panel in panels:
            if panel.log_err <= share and panel is not worst:
                refined.append(panel)
                continue
            mid = 0.5 * (panel.lo + panel.hi)
            if panel.depth >= spec.max_depth or not panel.lo < mid < panel.hi:
                raise NonConvergenceError(
                    f"max depth {spec.max_depth} exhausted on [{panel.lo}, "
                    f"{panel.hi}] with log error {log_err:.6g} above {log_tol:.6g}"
                )
            refined.append(_log_panel(f, panel.lo, mid, panel.depth + 1))
            refined.append(_log_panel(f, mid, panel.hi, panel.depth + 1))
        if len(refined) > MAX_PANELS:
            raise NonConvergenceError(
                f"panel budget {MAX_PANELS} exhausted with log error {log_err:.6g}"
            )
        panels = refined

    _LOGGER.debug(
        "Integrated over %s with %d panels, log error %.4g", edges[::len(edges) - 1],
        len(panels), log_err,
    )
    _check_tails(panels, checks, total, spec)
    return total


def _log_total(log_errs: np.ndarray) -> float:
    finite = log_errs[~np.isneginf(log_errs)]
    if finite.size == 0:
        return -math.inf
    return float(logsumexp(finite))


def _check_tails(
    panels: list[_Panel],
    checks: list[tuple[float, float]],
    total: LogReal,
    spec: QuadratureSpec,
) -> None:
    """Warn when the doubled truncation stretch is not negligible."""
    for start, end in checks:
        tail = log_sum_exp(
            p.value for p in panels if p.lo >= start and p.hi <= end
        )
        if tail.is_zero or total.is_zero:
            continue
        if tail.logmag - total.logmag > math.log(spec.rel_tol):
            _LOGGER.warning(
                "Tail [%s, %s] carries relative weight %.3g beyond rel_tol %.3g",
                start, end, math.exp(tail.logmag - total.logmag), spec.rel_tol,
            )


def integrate_vector(
    f: Callable[[np.ndarray], np.ndarray], spec: QuadratureSpec
) -> np.ndarray:
    """Integrate a real vector-valued integrand over a finite domain.

    ``f`` maps an array of n abscissae to an (n, m) array. All components share
    the same panels, so linear identities between components (for example a
    column that is the sum of the others) survive quadrature to rounding.

    Raises:
        InvalidParameterError: Domain is not finite
        NonConvergenceError: Depth or panel budget exhausted above tolerance
    """
    lo, hi = spec.domain
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise InvalidParameterError("integrate_vector needs a finite domain")
    edges = sorted(
        {float(x) for x in np.linspace(lo, hi, INITIAL_PANELS + 1)}
        | {p for p in spec.points if lo < p < hi}
    )

    def panel(a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        coarse_x, coarse_w = _gauss_rule(GAUSS_ORDER)
        fine_x, fine_w = _gauss_rule(2 * GAUSS_ORDER)
        half = 0.5 * (b - a)
        values = np.asarray(
            f(0.5 * (a + b) + half * np.concatenate((coarse_x, fine_x))), dtype=float
        )
        coarse = half * (coarse_w @ values[:GAUSS_ORDER])
        fine = half * (fine_w @ values[GAUSS_ORDER:])
        return fine, np.abs(fine - coarse)

    panels = [(a, b, 0, *panel(a, b)) for a, b in pairwise(edges)]
    while True:
        total = np.sum([p[3] for p in panels], axis=0)
        errors = np.array([float(np.max(p[4])) for p in panels])
        tol = max(spec.abs_tol, spec.rel_tol * float(np.max(np.abs(total))))
        if errors.sum() <= tol:
            return total
        share = tol / len(panels)
        worst = int(np.argmax(errors))
        refined = []
        for index, (a, b, depth, value, err) in enumerate(panels):
            if errors[index] <= share and index != worst:
                refined.append((a, b, depth, value, err))
                continue
            mid = 0.5 * (a + b)
            if depth >= spec.max_depth or not a < mid < b:
                raise NonConvergenceError(
                    f"max depth {spec.max_depth} exhausted on [{a}, {b}]"
                )
            refined.append((a, mid, depth + 1, *panel(a, mid)))
            refined.append((mid, b, depth + 1, *panel(mid, b)))
        if len(refined) > MAX_PANELS:
            raise NonConvergenceError(f"panel budget {MAX_PANELS} exhausted")
        panels = refined
