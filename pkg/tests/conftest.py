"""Fixtures for cusp_balance tests."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np
import pytest

from cusp_balance.chow_balance import CoordLine, CycleConfig, Point, WeightedRNC
from cusp_balance.energy import SurfaceData
from cusp_balance.model_kernel import ModelLevel


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator so property checks are deterministic."""
    return np.random.default_rng(20240611)


@pytest.fixture
def level_400() -> ModelLevel:
    """Level used by most cusp-ladder examples."""
    return ModelLevel(400)


@pytest.fixture
def surface_333() -> SurfaceData:
    """Genus 0 surface with deg L = 3 and three cusps."""
    return SurfaceData(genus=0, degree=3, cusps=3)


@pytest.fixture
def star_d3() -> CycleConfig:
    """Lines q_i q_3 with divisor q_0, q_1, q_2, balanced at lambda 1/2."""
    return CycleConfig(
        ambient_dim=3,
        components=tuple(CoordLine(i, 3) for i in range(3)),
        divisor=tuple(Point(i) for i in range(3)),
        lam=0.5,
    )


@pytest.fixture
def random_config(rng: np.random.Generator) -> Callable[[], CycleConfig]:
    """Factory for random coordinate-aligned configs with random torus weights."""

    def build() -> CycleConfig:
        n = int(rng.integers(2, 7))
        size = n + 1
        components: list[Point | CoordLine | WeightedRNC] = []
        for _ in range(int(rng.integers(1, 4))):
            i, j = rng.choice(size, size=2, replace=False)
            components.append(CoordLine(int(i), int(j)))
        if rng.random() < 0.5:
            m = int(rng.integers(2, size + 1))
            indices = tuple(int(i) for i in rng.choice(size, size=m, replace=False))
            weights = tuple(float(w) for w in np.exp(rng.normal(size=m)))
            components.append(WeightedRNC(indices, weights))
        if rng.random() < 0.5:
            components.append(Point(int(rng.integers(size))))
        divisor = tuple(
            Point(int(i)) for i in rng.choice(size, size=int(rng.integers(0, 3)), replace=False)
        )
        return CycleConfig(
            ambient_dim=n,
            components=tuple(components),
            divisor=divisor,
            lam=float(rng.uniform(0.05, 1.0)),
            weights=tuple(float(w) for w in np.exp(rng.normal(scale=1.5, size=size))),
        )

    return build
