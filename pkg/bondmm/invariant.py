"""BondMM-A pricing core.

The pool holds cash y and the present value X of its bond inventory. For a
trade of tenor t the marginal rate is r = kappa * ln(X / y) + r*(t), and every
tenor carries its own conserved quantity

    K * x^alpha + y^alpha = C,    equivalently    y^alpha * (X / y + 1) = C,

with alpha = 1 / (1 + kappa * t), K = exp(-t * r*(t) * alpha) and
x = X * exp(r * t) the face value of a t-tenor bond worth X today. A trade at
tenor t moves along that tenor's invariant only; the others break.

Pricing is written in terms of the relative face change z = dx / x and the
relative cash change w = dy / y with log1p/expm1 so small trades keep full
relative precision.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .const import ALGEBRAIC_RTOL
from .exceptions import CapacityError, DomainError, InvariantViolationError
from .ratemath import Rate, Tenor

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class Anchor:
    """Anchor rate r* as a polynomial in tenor (coefficients lowest degree first)."""

    coefficients: tuple[float, ...] = (0.0,)

    def __post_init__(self) -> None:
        if not self.coefficients:
            raise DomainError("anchor needs at least one coefficient")
        if not all(math.isfinite(c) for c in self.coefficients):
            raise DomainError(f"anchor coefficients must be finite: {self.coefficients}")

    @classmethod
    def constant(cls, rate: Rate) -> Anchor:
        """Flat anchor at `rate` for every tenor."""
        return cls((float(rate),))

    @classmethod
    def parse(cls, text: str) -> Anchor:
        """Parse a comma separated coefficient list such as "0.04,0.01"."""
        try:
            coefficients = tuple(float(part) for part in text.split(","))
        except ValueError as err:
            raise DomainError(f"invalid anchor specification: {text!r}") from err
        return cls(coefficients)

    @property
    def is_constant(self) -> bool:
        return len(self.coefficients) == 1

    def __call__(self, tenor: Tenor) -> Rate:
        """Evaluate r*(tenor) by Horner's rule."""
        result = 0.0
        for coefficient in reversed(self.coefficients):
            result = result * tenor + coefficient
        return result

    def evaluate_many(self, tenors: np.ndarray) -> np.ndarray:
        """Evaluate r* over an array of tenors."""
        return P.polyval(np.asarray(tenors, dtype=float), self.coefficients)


@dataclass(frozen=True, slots=True)
class CurveParams:
    """Rate sensitivity kappa and the tenor-dependent anchor."""

    kappa: float
    anchor: Anchor = field(default_factory=Anchor)

    def __post_init__(self) -> None:
        if not 0.0 < self.kappa < 1.0:
            raise DomainError(f"kappa must lie in (0, 1), got {self.kappa}")


@dataclass(frozen=True, slots=True)
class InvariantParams:
    """alpha, K and C of the invariant for one fixed tenor."""

    alpha: float
    K: float
    C: float


@dataclass(frozen=True, slots=True)
class CoreState:
    """Present value of bonds X and cash y held by the pool."""

    X: float
    y: float

    def __post_init__(self) -> None:
        if not (self.X >= 0.0 and self.y > 0.0):
            raise DomainError(f"invalid pool state X={self.X}, y={self.y}")

    @property
    def psi(self) -> float:
        return self.X / self.y


def _alpha(tenor: Tenor, kappa: float) -> float:
    return 1.0 / (1.0 + kappa * tenor)


def _check_tenor(tenor: Tenor) -> None:
    if not tenor >= 0.0:
        raise DomainError(f"tenor must be nonnegative, got {tenor}")


def _log_psi(state: CoreState) -> float:
    if state.X <= 0.0:
        raise DomainError("pool holds no bonds; rate is undefined")
    return math.log(state.X / state.y)


def rate(state: CoreState, tenor: Tenor, params: CurveParams) -> Rate:
    """Marginal rate for tenor t: kappa * ln(X / y) + r*(t)."""
    _check_tenor(tenor)
    return params.kappa * _log_psi(state) + params.anchor(tenor)


def marginal_price(state: CoreState, tenor: Tenor, params: CurveParams) -> float:
    """Marginal price of one unit of face at tenor t."""
    return math.exp(-rate(state, tenor, params) * tenor)


def equivalent_face(state: CoreState, tenor: Tenor, params: CurveParams) -> float:
    """Face value of a t-tenor bond worth the pool's present value X."""
    r = rate(state, tenor, params)
    if tenor == 0.0:
        return state.X
    return state.X * math.exp(r * tenor)


def invariant_params(
    state: CoreState, tenor: Tenor, params: CurveParams
) -> InvariantParams:
    """alpha, K and the conserved C for tenor t, C taken from the current state."""
    _check_tenor(tenor)
    alpha = _alpha(tenor, params.kappa)
    K = math.exp(-tenor * params.anchor(tenor) * alpha)
    C = state.y**alpha * (state.psi + 1.0)
    return InvariantParams(alpha=alpha, K=K, C=C)


def invariant_value(state: CoreState, tenor: Tenor, params: CurveParams) -> float:
    """Value of y^alpha * (X / y + 1) for tenor t."""
    return invariant_params(state, tenor, params).C


def delta_y(state: CoreState, tenor: Tenor, params: CurveParams, dx: float) -> float:
    """Cash change of the pool for a face change dx at tenor t."""
    _check_tenor(tenor)
    if dx == 0.0:
        return 0.0
    if tenor == 0.0:
        # Par redemption
        if state.X + dx < 0.0 or state.y - dx <= 0.0:
            raise CapacityError(f"dx={dx} at zero tenor")
        return -dx

    x = equivalent_face(state, tenor, params)
    z = dx / x
    if z < -1.0:
        raise CapacityError(f"dx={dx} exceeds face {x}")
    alpha = _alpha(tenor, params.kappa)
    psi = state.psi
    # g = (psi^(1/alpha) + e^(-r* t) dx / y)^alpha - psi
    g = -psi if z == -1.0 else psi * math.expm1(alpha * math.log1p(z))
    if g >= 1.0:
        raise CapacityError(f"dx={dx} would empty cash")
    return state.y * math.expm1(math.log1p(-g) / alpha)


def delta_x(state: CoreState, tenor: Tenor, params: CurveParams, dy: float) -> float:
    """Face change of the pool for a cash change dy at tenor t."""
    _check_tenor(tenor)
    if dy == 0.0:
        return 0.0
    w = dy / state.y
    if w <= -1.0:
        raise CapacityError(f"dy={dy} would empty cash")
    if tenor == 0.0:
        if state.X - dy < 0.0:
            raise CapacityError(f"dy={dy} at zero tenor")
        return -dy

    x = equivalent_face(state, tenor, params)
    alpha = _alpha(tenor, params.kappa)
    psi = state.psi
    # h = (1 + dy / y)^alpha - 1
    h = math.expm1(alpha * math.log1p(w))
    if h > psi:
        raise CapacityError(f"dy={dy} exceeds bond inventory")
    if h == psi:
        return -x
    return x * math.expm1(math.log1p(-h / psi) / alpha)


def apply_trade(
    state: CoreState, tenor: Tenor, params: CurveParams, dx: float, dy: float
) -> CoreState:
    """Move the state along the tenor-t invariant by (dx, dy)."""
    if dx == 0.0 and dy == 0.0:
        return state
    expected = delta_y(state, tenor, params, dx)
    if not math.isclose(dy, expected, rel_tol=ALGEBRAIC_RTOL, abs_tol=ALGEBRAIC_RTOL):
        raise InvariantViolationError(
            f"trade (dx={dx}, dy={dy}) is off the tenor-{tenor} invariant "
            f"(expected dy={expected})"
        )

    y_new = state.y + dy
    if y_new <= 0.0:
        raise CapacityError(f"dy={dy} would empty cash")
    if tenor == 0.0:
        X_new = state.X + dx
    else:
        alpha = _alpha(tenor, params.kappa)
        # X' = C * y'^(1 - alpha) - y' with C = y^(alpha - 1) * (X + y)
        X_new = (state.X + state.y) * (y_new / state.y) ** (1.0 - alpha) - y_new
    if X_new < 0.0:
        raise CapacityError(f"dx={dx} would drive bond value below zero")
    return CoreState(X=X_new, y=y_new)


def bondmm_closed_form_rate(
    x: float, y: float, tenor: Tenor, kappa: float, anchor_rate: Rate
) -> Rate:
    """Single-maturity rate from face x and cash y: (kappa ln(x/y) + r*) / (1 + kappa t)."""
    if x <= 0.0 or y <= 0.0:
        raise DomainError(f"balances must be positive, got x={x}, y={y}")
    _check_tenor(tenor)
    return (kappa * math.log(x / y) + anchor_rate) / (1.0 + kappa * tenor)


def bondmm_closed_form_price(
    x: float, y: float, tenor: Tenor, kappa: float, anchor_rate: Rate
) -> float:
    """Single-maturity marginal price [(x/y)^kappa e^(r*)]^(-t / (1 + kappa t))."""
    return math.exp(-tenor * bondmm_closed_form_rate(x, y, tenor, kappa, anchor_rate))


def initial_face(y0: float, r0: Rate, maturity: Tenor) -> float:
    """Face minted by a single-maturity pool so that X0 = y0 at rate r0."""
    return y0 * math.exp(maturity * r0)


def initialize(y0: float, r0: Rate, params: CurveParams) -> CoreState:
    """Fresh pool with X = y = y0, so every tenor quotes its anchor rate."""
    if not y0 > 0.0:
        raise DomainError(f"initial cash must be positive, got {y0}")
    if not math.isclose(params.anchor(0.0), r0, rel_tol=0.0, abs_tol=1e-12):
        _LOGGER.warning(
            "Anchor r*(0)=%s differs from initial rate %s; the pool opens at the anchor",
            params.anchor(0.0),
            r0,
        )
    return CoreState(X=y0, y=y0)


def curve(
    state: CoreState, tenors: Sequence[float] | np.ndarray, params: CurveParams
) -> tuple[np.ndarray, np.ndarray]:
    """Marginal rates and prices over a tenor grid."""
    grid = np.asarray(tenors, dtype=float)
    if np.any(grid < 0.0):
        raise DomainError("tenors must be nonnegative")
    rates = params.kappa * _log_psi(state) + params.anchor.evaluate_many(grid)
    return rates, np.exp(-rates * grid)
