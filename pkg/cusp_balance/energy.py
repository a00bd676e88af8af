"""Deviation model for ||mu_X + (1/2) mu_D - c_k Id||^2 on a cusped surface.

The squared norm is split into diagonal entries for cusp sections, diagonal
entries for bulk sections and off-diagonal entries. Cusp diagonals come from
model-kernel values mu_a at the rescaled level kappa = -2k/S, the rest from
their proven error classes.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .const import (
    BULK_RAW,
    BULK_RESCALED,
    CROSS_CLASS_EPSILON,
    CROSS_CLASS_QUADRATIC,
    DEFAULT_EPSILON_POWER,
    DEFAULT_ERROR_CONSTANT,
)
from .exceptions import InvalidParameterError, MissingMuError
from .model_kernel import ModelLevel, mu_auto

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class SurfaceData:
    """Genus g, deg L = l and d cusps, with d > 2 - 2g."""

    genus: int
    degree: int
    cusps: int

    def __post_init__(self) -> None:
        """Validate the surface."""
        if self.genus < 0 or self.degree < 1 or self.cusps < 1:
            raise InvalidParameterError(
                f"need g >= 0, l >= 1, d >= 1; got g={self.genus}, "
                f"l={self.degree}, d={self.cusps}"
            )
        if self.cusps <= 2 - 2 * self.genus:
            raise InvalidParameterError(
                f"d = {self.cusps} must exceed 2 - 2g = {2 - 2 * self.genus}"
            )

    @property
    def scalar_curvature(self) -> Fraction:
        """S = -(d + 2g - 2) / l."""
        return Fraction(-(self.cusps + 2 * self.genus - 2), self.degree)

    def sections(self, k: int) -> int:
        """Dimension kl - d - g + 1 of the section space at level k."""
        return k * self.degree - self.cusps - self.genus + 1

    def rescaled_level(self, k: int) -> float:
        """kappa = -2k / S."""
        return float(Fraction(-2 * k) / self.scalar_curvature)

    def cusp_cut(self, k: int) -> int:
        """Number of cusp sections per cusp, floor(2 sqrt(k) log k)."""
        return math.floor(2.0 * math.sqrt(k) * math.log(k))


def c_tilde_k(surface: SurfaceData, k: int) -> tuple[Fraction, float]:
    """Return c_k = (kl - d/2) / (kl - d - g + 1) exactly, with its expansion 1 - S/(2k).

    Raises:
        InvalidParameterError: kl - d - g + 1 <= 0
    """
    sections = surface.sections(k)
    if sections <= 0:
        raise InvalidParameterError(
            f"no sections at k = {k}: kl - d - g + 1 = {sections}"
        )
    exact = (k * surface.degree - Fraction(surface.cusps, 2)) / sections
    first_order = 1.0 - float(surface.scalar_curvature) / (2.0 * k)
    return exact, first_order


@dataclass(frozen=True, slots=True)
class DeviationModel:
    """Constants and switches of the error model."""

    error_constant: float = DEFAULT_ERROR_CONSTANT
    epsilon_power: float = DEFAULT_EPSILON_POWER
    cross_class: str = CROSS_CLASS_EPSILON
    bulk_normalization: str = BULK_RESCALED

    def __post_init__(self) -> None:
        if self.cross_class not in (CROSS_CLASS_EPSILON, CROSS_CLASS_QUADRATIC):
            raise InvalidParameterError(f"unknown cross-pair class {self.cross_class!r}")
        if self.bulk_normalization not in (BULK_RESCALED, BULK_RAW):
            raise InvalidParameterError(
                f"unknown bulk normalization {self.bulk_normalization!r}"
            )
        if self.error_constant < 0 or self.epsilon_power <= 0:
            raise InvalidParameterError("error constant must be >= 0, epsilon power > 0")


class OffDiagonalClass(NamedTuple):
    """Off-diagonal entries sharing one bound."""

    name: str
    count: int
    bound: float


@dataclass(frozen=True)
class DeviationLedger:
    """Every entry of the (N_k + 1)^2 moment matrix, by deviation class."""

    k: int
    kappa: float
    cusps: int
    a_cut: int
    sections: int
    c_tilde: float
    diag_neck: tuple[tuple[int, float], ...]
    bulk_count: int
    bulk_deviation: float
    off_diag: tuple[OffDiagonalClass, ...]
    divisor_diag: float = 1.0

    @property
    def entries_accounted(self) -> int:
        diagonal = self.cusps * len(self.diag_neck) + self.bulk_count
        return diagonal + sum(entry.count for entry in self.off_diag)

    @property
    def neck_sum(self) -> float:
        """Squared diagonal deviations of a single cusp."""
        return math.fsum(dev * dev for _, dev in self.diag_neck)

    @property
    def energy(self) -> float:
        return math.fsum(
            (
                self.cusps * self.neck_sum,
                self.bulk_count * self.bulk_deviation**2,
                *(entry.count * entry.bound**2 for entry in self.off_diag),
            )
        )


def build_ledger(
    surface: SurfaceData,
    k: int,
    mus: Mapping[int, float],
    model: DeviationModel | None = None,
) -> DeviationLedger:
    """Sort the entries of the moment matrix at level k into deviation classes.

    mus maps a -> mu_a at the rescaled level kappa for a <= floor(2 sqrt(k) log k).

    Raises:
        InvalidParameterError: The cusp sections do not fit in the section space
        MissingMuError: mus lacks an index
    """
    model = model or DeviationModel()
    exact, _ = c_tilde_k(surface, k)
    c_tilde = float(exact)
    sections = surface.sections(k)
    a_cut = surface.cusp_cut(k)
    cusp_count = surface.cusps * a_cut
    if cusp_count > sections:
        raise InvalidParameterError(
            f"{cusp_count} cusp sections exceed the {sections} sections at k = {k}"
        )
    missing = [a for a in range(1, a_cut + 1) if a not in mus]
    if missing:
        raise MissingMuError(missing)

    divisor_diag = 1.0
    diag_neck = tuple(
        (a, mus[a] + (0.5 * divisor_diag if a == 1 else 0.0) - c_tilde)
        for a in range(1, a_cut + 1)
    )
    kappa = surface.rescaled_level(k)
    scale = kappa if model.bulk_normalization == BULK_RESCALED else float(k)
    bulk_deviation = 1.0 + 1.0 / scale + model.error_constant / scale**2 - c_tilde

    epsilon = float(k) ** -model.epsilon_power
    quadratic = model.error_constant / float(k) ** 2
    bulk_count = sections - cusp_count
    cross = epsilon if model.cross_class == CROSS_CLASS_EPSILON else quadratic
    off_diag = (
        OffDiagonalClass("cusp-cusp", cusp_count * (cusp_count - 1), epsilon),
        OffDiagonalClass("bulk-bulk", bulk_count * (bulk_count - 1), quadratic),
        OffDiagonalClass("cusp-bulk", 2 * cusp_count * bulk_count, cross),
    )
    return DeviationLedger(
        k=k,
        kappa=kappa,
        cusps=surface.cusps,
        a_cut=a_cut,
        sections=sections,
        c_tilde=c_tilde,
        diag_neck=diag_neck,
        bulk_count=bulk_count,
        bulk_deviation=bulk_deviation,
        off_diag=off_diag,
        divisor_diag=divisor_diag,
    )


def assemble_energy(
    surface: SurfaceData,
    k: int,
    mus: Mapping[int, float],
    model: DeviationModel | None = None,
) -> float:
    """Return the modeled ||mu_X + (1/2) mu_D - c_k Id||_2^2 at level k."""
    return build_ledger(surface, k, mus, model).energy


class EnergyRow(NamedTuple):
    """One scan row; slope is None on the first row."""

    k: int
    energy: float
    slope: float | None


def compute_mus(
    surface: SurfaceData,
    k: int,
    mu: Callable[[ModelLevel, int], float] = mu_auto,
    threads: int = 1,
) -> dict[int, float]:
    """Evaluate mu_a at the rescaled level for every cusp index a at level k."""
    level = ModelLevel(surface.rescaled_level(k))
    indices = range(1, surface.cusp_cut(k) + 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            values = list(executor.map(lambda a: mu(level, a), indices))
    else:
        values = [mu(level, a) for a in indices]
    return dict(zip(indices, values, strict=True))


def scan_energy(
    surface: SurfaceData,
    k_list: Sequence[int],
    model: DeviationModel | None = None,
    mu: Callable[[ModelLevel, int], float] = mu_auto,
    threads: int = 1,
) -> list[EnergyRow]:
    """Return (k, energy, local log-log slope) rows over an increasing k grid."""
    if not k_list:
        raise InvalidParameterError("k_list must not be empty")
    if any(b <= a for a, b in zip(k_list, k_list[1:], strict=False)):
        raise InvalidParameterError(f"k_list must be increasing, got {list(k_list)}")
    rows: list[EnergyRow] = []
    for k in k_list:
        energy = assemble_energy(surface, k, compute_mus(surface, k, mu, threads), model)
        slope = None
        if rows:
            prev = rows[-1]
            slope = (math.log(energy) - math.log(prev.energy)) / (
                math.log(k) - math.log(prev.k)
            )
        rows.append(EnergyRow(k, energy, slope))
        _LOGGER.info("Energy at k=%d: %.6g", k, energy)
    return rows


def fit_loglog_slope(rows: Sequence[EnergyRow]) -> float:
    """Least-squares slope of log energy against log k."""
    if len(rows) < 2:
        raise InvalidParameterError("slope fit needs at least two rows")
    log_k = np.log([row.k for row in rows])
    log_e = np.log([row.energy for row in rows])
    return float(np.polyfit(log_k, log_e, 1)[0])
