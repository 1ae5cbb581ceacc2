"""Errors raised by the BondMM-A engine."""

from __future__ import annotations


class BondMMError(Exception):
    """Base class for every error raised by this package."""


class DomainError(BondMMError, ValueError):
    """An input lies outside the domain of the requested operation."""


class NoSolutionError(DomainError):
    """The requested quantity does not exist for these inputs."""


class RejectedTradeError(BondMMError):
    """The pool refused a trade."""


class CapacityError(RejectedTradeError):
    """The trade would drive a pool balance below zero."""

    def __init__(self, detail: str | None = None) -> None:
        """Initialize with the standard capacity message."""
        message = "trade exceeds pool capacity"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class LendingHaltedError(RejectedTradeError):
    """New loans are refused while equity sits below the halt threshold."""


class StaleQuoteError(RejectedTradeError):
    """The quote was priced against a pool state that has since changed."""


class InsufficientPositionError(RejectedTradeError):
    """A withdraw or repay exceeds the face left on the position."""


class InvariantViolationError(BondMMError):
    """Internal consistency check failed."""


class SettlementError(BondMMError):
    """A maturing position cannot be settled; the run cannot continue."""


class InsolvencyError(SettlementError):
    """Pool cash cannot honour a maturing loan."""


class BondValueExhaustedError(SettlementError):
    """Pool bond value is too small to absorb a maturing borrow."""


class ConfigError(BondMMError):
    """The experiment configuration is invalid."""
