"""Exceptions raised by cusp_balance."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .chow_balance import BalanceResult


class CuspBalanceError(Exception):
    """Base exception for cusp_balance errors."""


class InvalidParameterError(CuspBalanceError, ValueError):
    """Exception for arguments outside an operation's domain."""


class NonConvergenceError(CuspBalanceError):
    """Exception for quadrature that exhausted its depth or panel budget."""


class OutOfLadderError(CuspBalanceError):
    """Exception for points or indices outside the ladder validity range."""


class MaxIterExceededError(CuspBalanceError):
    """Exception for a balancing flow that stopped above tolerance."""

    def __init__(self, message: str, best: BalanceResult) -> None:
        """Initialize the error.

        Args:
            message: Human readable description
            best: Best result reached before stopping
        """
        super().__init__(message)
        self.best = best


class MissingMuError(CuspBalanceError, KeyError):
    """Exception for an energy ledger with μ_a gaps."""

    def __init__(self, missing: list[int]) -> None:
        """Initialize the error with the missing indices."""
        super().__init__(f"missing mu_a for a in {missing[:10]}")
        self.missing = missing

    def __str__(self) -> str:
        return str(self.args[0])


class ConfigError(CuspBalanceError):
    """Exception for unreadable or invalid configuration files."""
