"""Bergman kernel numerics on the cusp and Chow balance checks."""

from __future__ import annotations

__version__ = "0.1.0"

from .chow_balance import (  # noqa: E402
    CycleConfig,
    balance_flow,
    lambda_center_of_mass,
    verify_balanced_degeneration,
)
from .energy import SurfaceData, assemble_energy, scan_energy  # noqa: E402
from .exceptions import CuspBalanceError  # noqa: E402
from .model_kernel import ModelLevel, mu_auto, mu_direct, rho_k0  # noqa: E402
from .neck import mu_neck  # noqa: E402

__all__ = [
    "CuspBalanceError",
    "CycleConfig",
    "ModelLevel",
    "SurfaceData",
    "__version__",
    "assemble_energy",
    "balance_flow",
    "lambda_center_of_mass",
    "mu_auto",
    "mu_direct",
    "mu_neck",
    "rho_k0",
    "scan_energy",
    "verify_balanced_degeneration",
]
