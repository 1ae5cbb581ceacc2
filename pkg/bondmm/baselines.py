"""Reference pricing rules of the Yield and Notional pools.

These pools exist only as foils: they reproduce the negative-rate and
path-dependence pathologies that the BondMM-A invariant avoids. Each pool
follows its own formulas as published, including the opposite orientation of
the balance ratio (Yield uses y/x, Notional uses x/y).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .exceptions import CapacityError, DomainError, RejectedTradeError
from .ratemath import Rate, Tenor


@dataclass(slots=True)
class YieldPool:
    """Yield pool with bond face x, cash y and maturity horizon T."""

    x: float
    y: float
    T: float

    def __post_init__(self) -> None:
        if self.x <= 0 or self.y <= 0 or self.T <= 0:
            raise DomainError(f"invalid yield pool x={self.x}, y={self.y}, T={self.T}")


@dataclass(slots=True)
class NotionalPool:
    """Notional pool with bond face x, cash y, sensitivity kappa and anchor r*."""

    x: float
    y: float
    kappa: float
    r_star: float

    def __post_init__(self) -> None:
        if self.x <= 0 or self.y <= 0:
            raise DomainError(f"invalid notional pool x={self.x}, y={self.y}")
        if not 0 < self.kappa < 1 or not 0 < self.r_star < 1:
            raise DomainError(
                f"kappa and r* must lie in (0, 1), got {self.kappa}, {self.r_star}"
            )


@dataclass(frozen=True, slots=True)
class NotionalFill:
    """Outcome of a Notional trade."""

    dy: float
    average_price: float


# ---- Yield ----


def yield_price(pool: YieldPool, tenor: Tenor) -> float:
    """Marginal price (y / x)^(t / T)."""
    if not 0 <= tenor <= pool.T:
        raise DomainError(f"tenor {tenor} outside [0, {pool.T}]")
    return (pool.y / pool.x) ** (tenor / pool.T)


def yield_rate(pool: YieldPool) -> Rate:
    """Marginal rate (1 / T) ln(y / x); negative whenever y < x."""
    return math.log(pool.y / pool.x) / pool.T


# ---- Notional ----


def notional_rate(pool: NotionalPool) -> Rate:
    """Marginal rate kappa * ln(x / y) + r*."""
    return pool.kappa * math.log(pool.x / pool.y) + pool.r_star


def notional_marginal_price(pool: NotionalPool, tenor: Tenor) -> float:
    """Simple-interest marginal price 1 / (1 + r t)."""
    return 1.0 / (1.0 + notional_rate(pool) * tenor)


def notional_trade(pool: NotionalPool, tenor: Tenor, dx: float) -> NotionalFill:
    """Price dx at the average price of the post-trade ratio and update the pool."""
    numerator = pool.x + dx
    denominator = pool.y - dx
    if numerator <= 0 or denominator <= 0:
        raise CapacityError(f"dx={dx} leaves a nonpositive balance ratio")
    phi_bar = numerator / denominator
    base = 1.0 + tenor * pool.kappa * math.log(phi_bar) + tenor * pool.r_star
    if base <= 0:
        raise RejectedTradeError(f"dx={dx} has no positive average price")
    average_price = 1.0 / base
    dy = -average_price * dx
    if pool.y + dy <= 0:
        raise CapacityError(f"dx={dx} would empty cash")
    pool.x += dx
    pool.y += dy
    return NotionalFill(dy=dy, average_price=average_price)


def single_maturity_equity(
    y: float, borrowed: float, lent: float, price: float
) -> float:
    """Equity of a single-maturity pool: y + (b - l) * p."""
    return y + (borrowed - lent) * price
