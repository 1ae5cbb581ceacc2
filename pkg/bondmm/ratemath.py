"""Fixed-income arithmetic shared by every other module.

All rates are continuously compounded and annualized; tenors are in years.
"""

from __future__ import annotations

import math

from .exceptions import DomainError, NoSolutionError

# Type aliases used for readability across the package
Rate = float
Tenor = float


def simple_to_continuous(simple_rate: float) -> Rate:
    """Convert a simple annualized rate R into r = ln(1 + R)."""
    if simple_rate <= -1.0:
        raise DomainError(f"simple rate must exceed -1, got {simple_rate}")
    return math.log1p(simple_rate)


def continuous_to_simple(rate: Rate) -> float:
    """Convert a continuously compounded rate r into R = e^r - 1."""
    return math.expm1(rate)


def annualized_rate(face: float, price: float, tenor: Tenor) -> Rate:
    """Return the constant rate r solving face = price * e^(r * tenor)."""
    if face <= 0 or price <= 0:
        raise DomainError(f"face and price must be positive, got {face}, {price}")
    if tenor < 0:
        raise DomainError(f"tenor must be nonnegative, got {tenor}")
    if tenor == 0:
        if face != price:
            raise NoSolutionError(
                f"no rate prices face {face} at {price} with zero tenor"
            )
        return 0.0
    return math.log(face / price) / tenor


def effective_annual_rate(face: float, price: float, tenor: Tenor) -> float:
    """Return the annually compounded rate R with face = price * (1 + R)^tenor."""
    return continuous_to_simple(annualized_rate(face, price, tenor))


def discount(rate: Rate, tenor: Tenor) -> float:
    """Price of one unit of face due in `tenor` years: e^(-rate * tenor)."""
    if tenor < 0:
        raise DomainError(f"tenor must be nonnegative, got {tenor}")
    return math.exp(-rate * tenor)


def present_value(face: float, rate: Rate, tenor: Tenor) -> float:
    """Present value of `face` due in `tenor` years."""
    return face * discount(rate, tenor)
