"""lambda-center of mass, torus-reduced balancing flow and balanced degenerations.

All cycles are coordinate-aligned, so under the diagonal torus every moment
matrix stays diagonal. A curve component is parametrized by sigma = log s,
s = |zeta|^2, and carries the Fubini-Study measure of P^1 scaled to its degree

    nu = m ds / (1 + s)^2 = (m / 4) sech^2(sigma / 2) dsigma.

Coordinate j of the curve sits at position pos_j with squared weight w_j^2,
and its share of the curve at sigma is softmax_j(2 log w_j + pos_j sigma).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from .const import (
    BALANCE_LAMBDA_CURVE,
    CHOW_ABS_TOL,
    CHOW_REL_TOL,
    CHOW_SIGMA_MAX,
    DEFAULT_FLOW_MAX_ITER,
    DEFAULT_FLOW_TOL,
    FLOW_ARMIJO,
    FLOW_MIN_STEP,
    FLOW_TAU_LIMIT,
    KIND_LINE,
    KIND_POINT,
    KIND_RNC,
    STRICTNESS_FLOOR,
    STRICTNESS_OFFSET,
)
from .exceptions import InvalidParameterError, MaxIterExceededError
from .numerics import QuadratureSpec, integrate_vector

_LOGGER = logging.getLogger(__name__)

_SIGMA_SPEC = QuadratureSpec(
    abs_tol=CHOW_ABS_TOL,
    rel_tol=CHOW_REL_TOL,
    domain=(-CHOW_SIGMA_MAX, CHOW_SIGMA_MAX),
    points=(0.0,),
)


@dataclass(frozen=True, slots=True)
class Point:
    """Coordinate point q_index."""

    index: int
    kind: str = field(default=KIND_POINT, init=False)

    @property
    def volume(self) -> int:
        return 1

    @property
    def indices(self) -> tuple[int, ...]:
        return (self.index,)


@dataclass(frozen=True, slots=True)
class CoordLine:
    """Coordinate line through q_i and q_j."""

    i: int
    j: int
    kind: str = field(default=KIND_LINE, init=False)

    def __post_init__(self) -> None:
        if self.i == self.j:
            raise InvalidParameterError(f"coordinate line needs i != j, got {self.i}")

    @property
    def volume(self) -> int:
        return 1

    @property
    def indices(self) -> tuple[int, ...]:
        return (self.i, self.j)


@dataclass(frozen=True, slots=True)
class WeightedRNC:
    """Rational normal curve [w_0 : w_1 zeta : ... : w_m zeta^m] on the listed coordinates."""

    indices: tuple[int, ...]
    weights: tuple[float, ...]
    kind: str = field(default=KIND_RNC, init=False)

    def __post_init__(self) -> None:
        if len(self.indices) < 2:
            raise InvalidParameterError("rational normal curve needs at least 2 indices")
        if len(set(self.indices)) != len(self.indices):
            raise InvalidParameterError(f"repeated indices in {self.indices}")
        if len(self.weights) != len(self.indices):
            raise InvalidParameterError(
                f"{len(self.indices)} indices but {len(self.weights)} weights"
            )
        if any(not w > 0 or not math.isfinite(w) for w in self.weights):
            raise InvalidParameterError(f"weights must be positive, got {self.weights}")

    @property
    def degree(self) -> int:
        return len(self.indices) - 1

    @property
    def volume(self) -> int:
        return self.degree

    @classmethod
    def binomial(cls, indices: Sequence[int]) -> WeightedRNC:
        """Return the curve with weights sqrt(C(m, j)), balanced on its own span."""
        m = len(indices) - 1
        return cls(tuple(indices), tuple(math.sqrt(math.comb(m, j)) for j in range(m + 1)))


CycleComponent = Point | CoordLine | WeightedRNC


@dataclass(frozen=True)
class CycleConfig:
    """Weighted cycle V and divisor W in P^N with a lambda weight.

    ``weights`` is the diagonal torus element acting on coordinates, one
    positive entry per coordinate.
    """

    ambient_dim: int
    components: tuple[CycleComponent, ...]
    divisor: tuple[Point, ...] = ()
    lam: float | Fraction = 1.0
    weights: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        """Validate indices, weights and lambda."""
        if self.ambient_dim < 0:
            raise InvalidParameterError(f"ambient dimension must be >= 0, got {self.ambient_dim}")
        if not 0 <= self.lam <= 1:
            raise InvalidParameterError(f"lambda must lie in [0, 1], got {self.lam}")
        size = self.ambient_dim + 1
        if not self.weights:
            object.__setattr__(self, "weights", (1.0,) * size)
        if len(self.weights) != size:
            raise InvalidParameterError(
                f"expected {size} coordinate weights, got {len(self.weights)}"
            )
        if any(not w > 0 or not math.isfinite(w) for w in self.weights):
            raise InvalidParameterError("coordinate weights must be positive and finite")
        for component in (*self.components, *self.divisor):
            if any(not 0 <= i < size for i in component.indices):
                raise InvalidParameterError(
                    f"{component} has an index outside [0, {self.ambient_dim}]"
                )
        if any(not isinstance(point, Point) for point in self.divisor):
            raise InvalidParameterError("divisor may only contain coordinate points")

    @property
    def size(self) -> int:
        return self.ambient_dim + 1

    @property
    def volume_cycle(self) -> int:
        return sum(component.volume for component in self.components)

    @property
    def volume_divisor(self) -> int:
        return len(self.divisor)

    @property
    def total_volume(self) -> float:
        """lambda Vol(V) + (1 - lambda) Vol(W)."""
        lam = float(self.lam)
        return lam * self.volume_cycle + (1.0 - lam) * self.volume_divisor

    def with_weights(self, weights: Iterable[float]) -> CycleConfig:
        return replace(self, weights=tuple(float(w) for w in weights))

    def with_lambda(self, lam: float | Fraction) -> CycleConfig:
        return replace(self, lam=lam)


@dataclass(frozen=True)
class HermitianMoment:
    """Hermitian (N+1) x (N+1) moment matrix.

    With ``diagonal`` set, ``entries`` holds only the diagonal.
    """

    dim: int
    entries: np.ndarray
    diagonal: bool = True

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries)
        expected = (self.dim,) if self.diagonal else (self.dim, self.dim)
        if entries.shape != expected:
            raise InvalidParameterError(f"expected shape {expected}, got {entries.shape}")
        if not self.diagonal and not np.allclose(entries, entries.conj().T, rtol=0, atol=1e-12):
            raise InvalidParameterError("moment matrix is not Hermitian")
        object.__setattr__(self, "entries", entries)

    def matrix(self) -> np.ndarray:
        """Return the full matrix."""
        return np.diag(self.entries) if self.diagonal else self.entries

    def diag(self) -> np.ndarray:
        return self.entries if self.diagonal else np.real(np.diag(self.entries))

    def trace(self) -> float:
        return float(np.sum(self.diag()))

    def norm(self) -> float:
        """Frobenius norm."""
        return float(np.linalg.norm(self.matrix()))

    def sup_norm(self) -> float:
        """Largest diagonal entry in absolute value."""
        return float(np.max(np.abs(self.diag()))) if self.dim else 0.0

    def __add__(self, other: HermitianMoment) -> HermitianMoment:
        if self.diagonal and other.diagonal:
            return HermitianMoment(self.dim, self.entries + other.entries)
        return HermitianMoment(self.dim, self.matrix() + other.matrix(), diagonal=False)

    def scaled(self, factor: float) -> HermitianMoment:
        return HermitianMoment(self.dim, factor * self.entries, self.diagonal)


class BalanceResult(NamedTuple):
    """Outcome of balance_flow."""

    weights: tuple[float, ...]
    residual: float
    iterations: int
    energies: tuple[float, ...] = ()


class _CurveIntegrals(NamedTuple):
    moments: np.ndarray
    energy: float
    covariance: np.ndarray | None


def _fs_density(sigma: np.ndarray) -> np.ndarray:
    return 0.25 / np.cosh(0.5 * sigma) ** 2


def _curve_integrals(
    log_w2: np.ndarray,
    positions: np.ndarray,
    degree: int,
    covariance: bool = False,
) -> _CurveIntegrals:
    """Integrate coordinate shares of one curve against nu of mass ``degree``.

    The measure is normalized by its own quadrature total, so the moments sum
    to the degree up to rounding.
    """
    n = log_w2.size

    def integrand(sigma: np.ndarray) -> np.ndarray:
        logits = log_w2[None, :] + sigma[:, None] * positions[None, :]
        lse = logsumexp(logits, axis=1)
        shares = np.exp(logits - lse[:, None])
        columns = [shares, lse[:, None]]
        if covariance:
            columns.append((shares[:, :, None] * shares[:, None, :]).reshape(sigma.size, -1))
        columns.append(np.ones((sigma.size, 1)))
        return np.hstack(columns) * _fs_density(sigma)[:, None]

    total = integrate_vector(integrand, _SIGMA_SPEC)
    scale = degree / total[-1]
    cov = None
    if covariance:
        cov = total[n + 1 : n + 1 + n * n].reshape(n, n) * scale
    return _CurveIntegrals(total[:n] * scale, 0.5 * float(total[n]) * scale, cov)


def _curve_geometry(
    component: CoordLine | WeightedRNC, tau: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Return coordinates, log squared weights, positions and degree of a curve."""
    if isinstance(component, CoordLine):
        coords = np.array([component.j, component.i])
        intrinsic = np.zeros(2)
    else:
        coords = np.array(component.indices)
        intrinsic = 2.0 * np.log(np.asarray(component.weights, dtype=float))
    positions = np.arange(coords.size, dtype=float)
    return coords, intrinsic + 2.0 * tau[coords], positions, coords.size - 1


def moment_of_point(i: int, ambient_dim: int) -> HermitianMoment:
    """Return e_i e_i^* for the coordinate point q_i in P^N."""
    if not 0 <= i <= ambient_dim:
        raise InvalidParameterError(f"point index {i} outside [0, {ambient_dim}]")
    entries = np.zeros(ambient_dim + 1)
    entries[i] = 1.0
    return HermitianMoment(ambient_dim + 1, entries)


def moment_of_rnc(
    indices: Sequence[int], weights: Sequence[float], ambient_dim: int
) -> HermitianMoment:
    """Return the moment of the curve [w_0 : w_1 zeta : ... : w_m zeta^m].

    Raises:
        InvalidParameterError: Bad indices or weights
        NonConvergenceError: Propagated from quadrature
    """
    curve = WeightedRNC(tuple(indices), tuple(float(w) for w in weights))
    if any(not 0 <= i <= ambient_dim for i in curve.indices):
        raise InvalidParameterError(f"curve indices {curve.indices} outside [0, {ambient_dim}]")
    coords, log_w2, positions, degree = _curve_geometry(curve, np.zeros(ambient_dim + 1))
    entries = np.zeros(ambient_dim + 1)
    entries[coords] = _curve_integrals(log_w2, positions, degree).moments
    return HermitianMoment(ambient_dim + 1, entries)


def moment_of_line(
    i: int, j: int, weights: tuple[float, float], ambient_dim: int
) -> HermitianMoment:
    """Return the moment of the line q_i q_j with weights (w_i, w_j).

    M_ii = int w_i^2 s / (w_i^2 s + w_j^2) ds / (1 + s)^2 and M_jj = 1 - M_ii.
    """
    if i == j:
        raise InvalidParameterError(f"coordinate line needs i != j, got {i}")
    w_i, w_j = weights
    return moment_of_rnc((j, i), (w_j, w_i), ambient_dim)


def line_moment_closed_form(w_i: float, w_j: float) -> float:
    """Return M_ii = r (r - 1 - log r) / (r - 1)^2 with r = w_i^2 / w_j^2."""
    if not w_i > 0 or not w_j > 0:
        raise InvalidParameterError(f"line weights must be positive, got {(w_i, w_j)}")
    r = (w_i / w_j) ** 2
    e = r - 1.0
    if abs(e) < 1e-3:
        return 0.5 + e / 6.0 - e * e / 12.0 + e**3 / 20.0 - e**4 / 30.0
    return r * (e - math.log(r)) / (e * e)


def _assemble(
    config: CycleConfig, tau: np.ndarray, hessian: bool
) -> tuple[np.ndarray, float, np.ndarray | None]:
    """Return diag mu, the Kempf-Ness energy and optionally its Hessian at tau."""
    lam = float(config.lam)
    size = config.size
    grad = np.zeros(size)
    energy = 0.0
    hess = np.zeros((size, size)) if hessian else None
    for component in config.components:
        if isinstance(component, Point):
            grad[component.index] += lam
            energy += lam * tau[component.index]
            continue
        coords, log_w2, positions, degree = _curve_geometry(component, tau)
        result = _curve_integrals(log_w2, positions, degree, covariance=hessian)
        grad[coords] += lam * result.moments
        energy += lam * result.energy
        if hess is not None and result.covariance is not None:
            local = 2.0 * (np.diag(result.moments) - result.covariance)
            hess[np.ix_(coords, coords)] += lam * local
    for point in config.divisor:
        grad[point.index] += 1.0 - lam
        energy += (1.0 - lam) * tau[point.index]
    shift = config.total_volume / size
    grad -= shift
    energy -= shift * float(np.sum(tau))
    return grad, energy, hess


def _tau(config: CycleConfig) -> np.ndarray:
    return np.log(np.asarray(config.weights, dtype=float))


def lambda_center_of_mass(config: CycleConfig) -> HermitianMoment:
    """Return mu(V, W, lambda) at the config's torus weights; its trace is 0."""
    grad, _, _ = _assemble(config, _tau(config), hessian=False)
    return HermitianMoment(config.size, grad)


def kempf_ness_energy(config: CycleConfig) -> float:
    """Return the torus-reduced Kempf-Ness functional at the config's weights.

    Its gradient in tau = log(weights) is the diagonal of lambda_center_of_mass.
    """
    return _assemble(config, _tau(config), hessian=False)[1]


def balance_flow(
    config: CycleConfig,
    tol: float = DEFAULT_FLOW_TOL,
    max_iter: int = DEFAULT_FLOW_MAX_ITER,
) -> BalanceResult:
    """Minimize the Kempf-Ness energy over the diagonal torus.

    Damped Newton steps with Armijo backtracking, falling back to the
    gradient when the Newton direction is not a descent direction. tau is
    kept at sum zero. Stops when ||diag mu||_inf < tol.

    Raises:
        MaxIterExceededError: max_iter reached or |tau| diverging; carries the
            lowest-residual iterate reached
    """
    if not tol > 0:
        raise InvalidParameterError(f"tol must be positive, got {tol}")
    tau = _tau(config)
    tau -= tau.mean()
    grad, energy, hess = _assemble(config, tau, hessian=True)
    residual = float(np.max(np.abs(grad)))
    energies = [energy]
    best = BalanceResult(tuple(np.exp(tau)), residual, 0, tuple(energies))

    for iteration in range(1, max_iter + 1):
        if residual < tol:
            break
        direction = _newton_direction(grad, hess)
        slope = float(grad @ direction)
        step = 1.0
        while True:
            trial = tau + step * direction
            trial -= trial.mean()
            t_grad, t_energy, t_hess = _assemble(config, trial, hessian=True)
            t_residual = float(np.max(np.abs(t_grad)))
            if t_energy <= energy + FLOW_ARMIJO * step * slope:
                break
            # near the optimum energy differences drop below rounding
            slack = 64.0 * np.finfo(float).eps * max(1.0, abs(energy))
            if t_energy <= energy + slack and t_residual < residual:
                break
            step *= 0.5
            if step < FLOW_MIN_STEP:
                raise MaxIterExceededError(
                    f"line search stalled at residual {residual:.3g} after "
                    f"{iteration - 1} iterations",
                    best,
                )
        tau, grad, energy, hess, residual = trial, t_grad, t_energy, t_hess, t_residual
        energies.append(energy)
        _LOGGER.debug(
            "Flow iteration %d: residual %.3g, energy %.17g, step %.3g",
            iteration, residual, energy, step,
        )
        if float(np.max(np.abs(tau))) > FLOW_TAU_LIMIT:
            raise MaxIterExceededError(
                f"torus weights diverge (|tau| > {FLOW_TAU_LIMIT}) with residual "
                f"{best.residual:.3g} at best; the pair may be strictly semistable",
                best,
            )
        if residual < best.residual:
            best = BalanceResult(tuple(np.exp(tau)), residual, iteration, tuple(energies))

    if residual >= tol:
        raise MaxIterExceededError(
            f"residual {residual:.3g} above {tol:.3g} after {max_iter} iterations", best
        )
    _LOGGER.info("Balanced to %.3g in %d iterations", residual, best.iterations)
    return best


def _newton_direction(grad: np.ndarray, hess: np.ndarray | None) -> np.ndarray:
    """Return a descent direction orthogonal to the all-ones vector."""
    size = grad.size
    if hess is not None:
        damping = 1e-10 * max(1.0, float(np.trace(hess)))
        ones = np.ones((size, size)) / size
        try:
            direction = -np.linalg.solve(hess + ones + damping * np.eye(size), grad)
        except np.linalg.LinAlgError:
            direction = None
        if direction is not None:
            direction -= direction.mean()
            if float(grad @ direction) < 0:
                return direction
    _LOGGER.debug("Newton direction rejected, using the gradient")
    direction = -grad.copy()
    return direction - direction.mean()


def balancing_energy(
    config: CycleConfig,
    tol: float = DEFAULT_FLOW_TOL,
    max_iter: int = DEFAULT_FLOW_MAX_ITER,
) -> float:
    """Return the torus infimum of ||mu||_2, from the best point balance_flow reaches."""
    try:
        result = balance_flow(config, tol, max_iter)
    except MaxIterExceededError as err:
        result = err.best
    return lambda_center_of_mass(config.with_weights(result.weights)).norm()


def lambda_k(d: int, k: int) -> Fraction:
    """Return the threshold 2/(d+1) for k = 1 and (2kd+2)/(3kd+d+1) for k >= 2."""
    if d < 2 or k < 1:
        raise InvalidParameterError(f"lambda_k needs d >= 2 and k >= 1, got d={d}, k={k}")
    if k == 1:
        return Fraction(2, d + 1)
    return Fraction(2 * k * d + 2, 3 * k * d + d + 1)


@dataclass(frozen=True)
class DegenerationReport:
    """Balance check of the degenerate pair (X_0, D_0) at lambda_k."""

    d: int
    k: int
    lam: Fraction
    config: CycleConfig
    norm_at_lambda: float
    norm_below: float
    norm_above: float
    tol: float
    flow: BalanceResult | None = None

    @property
    def failures(self) -> list[str]:
        failures = []
        if not self.norm_at_lambda <= self.tol:
            failures.append(
                f"||mu|| = {self.norm_at_lambda:.3g} at lambda = {self.lam} exceeds {self.tol:.3g}"
            )
        for name, value in (("below", self.norm_below), ("above", self.norm_above)):
            if not value > max(self.tol, STRICTNESS_FLOOR):
                failures.append(
                    f"||mu|| = {value:.3g} {name} lambda_k is not above the strictness floor"
                )
        return failures

    @property
    def passed(self) -> bool:
        return not self.failures


def star_configuration(d: int, lam: float | Fraction) -> CycleConfig:
    """Return the lines q_i q_d (i < d) with divisor q_0 .. q_{d-1} in P^d."""
    return CycleConfig(
        ambient_dim=d,
        components=tuple(CoordLine(i, d) for i in range(d)),
        divisor=tuple(Point(i) for i in range(d)),
        lam=lam,
    )


def curve_with_marked_points(
    m: int, d: int, lam: float | Fraction = BALANCE_LAMBDA_CURVE
) -> CycleConfig:
    """Return the binomial curve of degree m in P^m with divisor E = q_0 .. q_{d-1}."""
    return CycleConfig(
        ambient_dim=m,
        components=(WeightedRNC.binomial(range(m + 1)),),
        divisor=tuple(Point(i) for i in range(d)),
        lam=lam,
    )


def verify_balanced_degeneration(d: int, k: int, tol: float) -> DegenerationReport:
    """Build the degenerate pair for (d, k) and check it is balanced exactly at lambda_k.

    k = 1 uses the coordinate star in P^d. For k >= 2 the curve Y of degree
    m = kd with E = q_0 .. q_{d-1} is first balanced at lambda = 2/3; then the
    lines q_i q_{m+1+i} are attached and D_0 = q_{m+1} .. q_{m+d} in P^{m+d}.
    Each new point takes its partner's weight.

    Raises:
        InvalidParameterError: d < 3 or k < 1
        MaxIterExceededError: Propagated from balance_flow
    """
    if d < 3:
        raise InvalidParameterError(f"degeneration check needs d >= 3, got {d}")
    lam = lambda_k(d, k)
    flow: BalanceResult | None = None
    if k == 1:
        config = star_configuration(d, lam)
    else:
        m = k * d
        flow = balance_flow(curve_with_marked_points(m, d), tol=max(1e-12, tol * 1e-2))
        curve = WeightedRNC.binomial(range(m + 1))
        weights = list(flow.weights) + [flow.weights[i] for i in range(d)]
        config = CycleConfig(
            ambient_dim=m + d,
            components=(curve, *(CoordLine(i, m + 1 + i) for i in range(d))),
            divisor=tuple(Point(m + 1 + j) for j in range(d)),
            lam=lam,
            weights=tuple(weights),
        )
    norms = [
        lambda_center_of_mass(config.with_lambda(float(lam) + offset)).norm()
        for offset in (0.0, -STRICTNESS_OFFSET, STRICTNESS_OFFSET)
    ]
    report = DegenerationReport(d, k, lam, config, *norms, tol=tol, flow=flow)
    _LOGGER.info(
        "Degeneration d=%d k=%d at lambda=%s: ||mu|| = %.3g (passed=%s)",
        d, k, lam, norms[0], report.passed,
    )
    return report
