"""BondMM-A pool account: quoting, execution, settlement and solvency."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import invariant
from .const import (
    COLLATERAL_RATIO,
    DEFAULT_HALT_THRESHOLD,
    DEFAULT_LEDGER_CHECK_INTERVAL,
    FLOAT_FORMAT,
    Denomination,
    EquityBasis,
    Side,
    TradeKind,
)
from .exceptions import (
    BondValueExhaustedError,
    DomainError,
    InsolvencyError,
    InsufficientPositionError,
    LendingHaltedError,
    RejectedTradeError,
    StaleQuoteError,
)
from .invariant import Anchor, CoreState, CurveParams
from .ledger import Ledger, Position
from .ratemath import Rate, Tenor

_LOGGER = logging.getLogger(__name__)

# Pool's side of each operation: sign of dx
_DX_SIGN = {
    TradeKind.LEND: -1.0,
    TradeKind.REPAY: -1.0,
    TradeKind.BORROW: 1.0,
    TradeKind.WITHDRAW: 1.0,
}

# Which open position a closing trade draws down
_CLOSES = {TradeKind.WITHDRAW: Side.LOAN, TradeKind.REPAY: Side.BORROW}


@dataclass(frozen=True, slots=True)
class TradeQuote:
    """A priced prospective trade, valid only against the state it was priced on."""

    kind: TradeKind
    tenor: Tenor
    dx: float
    dy: float
    average_price: float
    marginal_rate: Rate
    pre_trade_rate: Rate
    collateral: float
    version: int
    post_state: CoreState
    position_id: int | None = None

    @property
    def realized_rate(self) -> Rate:
        """Rate the trader locks in: (1 / t) ln(face / cash)."""
        if self.tenor == 0.0 or self.dx == 0.0:
            return 0.0
        return math.log(abs(self.dx) / abs(self.dy)) / self.tenor

    def as_dict(self) -> dict[str, object]:
        """Plain representation for JSON output."""
        return {
            "kind": str(self.kind),
            "tenor": self.tenor,
            "dx": self.dx,
            "dy": self.dy,
            "average_price": self.average_price,
            "marginal_rate": self.marginal_rate,
            "pre_trade_rate": self.pre_trade_rate,
            "realized_rate": self.realized_rate,
            "collateral": self.collateral,
        }


@dataclass(frozen=True, slots=True)
class PoolSnapshot:
    """Checkpoint record of a pool."""

    clock: float
    X: float
    y: float
    L: float
    halted: bool
    positions: int

    def to_record(self) -> str:
        """Single-line key=value text record."""
        return " ".join(
            [
                f"clock={self.clock:{FLOAT_FORMAT}}",
                f"X={self.X:{FLOAT_FORMAT}}",
                f"y={self.y:{FLOAT_FORMAT}}",
                f"L={self.L:{FLOAT_FORMAT}}",
                f"halted={int(self.halted)}",
                f"positions={self.positions}",
            ]
        )

    @classmethod
    def from_record(cls, record: str) -> PoolSnapshot:
        """Parse a record produced by `to_record`."""
        try:
            fields = dict(part.split("=", 1) for part in record.split())
            return cls(
                clock=float(fields["clock"]),
                X=float(fields["X"]),
                y=float(fields["y"]),
                L=float(fields["L"]),
                halted=fields["halted"] == "1",
                positions=int(fields["positions"]),
            )
        except (KeyError, ValueError) as err:
            raise DomainError(f"malformed pool record: {record!r}") from err


def price(
    core: CoreState,
    params: CurveParams,
    kind: TradeKind,
    tenor: Tenor,
    size: float,
    denomination: Denomination = Denomination.CASH,
    version: int = 0,
    position_id: int | None = None,
) -> TradeQuote:
    """Price a trade of `size` against a bare pool state."""
    kind = TradeKind(kind)
    if not size > 0.0:
        raise DomainError(f"trade size must be positive, got {size}")
    if not tenor >= 0.0:
        raise DomainError(f"tenor must be nonnegative, got {tenor}")
    sign = _DX_SIGN[kind]
    if Denomination(denomination) == Denomination.FACE:
        dx = sign * size
        dy = invariant.delta_y(core, tenor, params, dx)
    else:
        dy = -sign * size
        dx = invariant.delta_x(core, tenor, params, dy)

    post = invariant.apply_trade(core, tenor, params, dx, dy)
    return TradeQuote(
        kind=kind,
        tenor=tenor,
        dx=dx,
        dy=dy,
        average_price=1.0 if tenor == 0.0 else abs(dy / dx),
        marginal_rate=invariant.rate(post, tenor, params),
        pre_trade_rate=invariant.rate(core, tenor, params),
        collateral=COLLATERAL_RATIO * abs(dy) if kind == TradeKind.BORROW else 0.0,
        version=version,
        post_state=post,
        position_id=position_id,
    )


class PoolAccount:
    """A single BondMM-A liquidity pool and its position ledger.

    Mutations are not synchronized; one owner drives the pool at a time.
    """

    def __init__(
        self,
        y0: float,
        params: CurveParams,
        r0: Rate | None = None,
        halt_threshold: float = DEFAULT_HALT_THRESHOLD,
        ledger_check_interval: int = DEFAULT_LEDGER_CHECK_INTERVAL,
        equity_basis: EquityBasis = EquityBasis.LOCKED,
    ) -> None:
        """Initialize the pool with y0 cash and X0 = y0 bond value."""
        if not 0.0 < halt_threshold < 1.0:
            raise DomainError(f"halt threshold must lie in (0, 1), got {halt_threshold}")
        self.y0 = y0
        self.params = params
        self.core = invariant.initialize(
            y0, params.anchor(0.0) if r0 is None else r0, params
        )
        self.ledger = Ledger()
        self.halted = False
        self.halt_threshold = halt_threshold
        self.ledger_check_interval = ledger_check_interval
        self.equity_basis = EquityBasis(equity_basis)
        # L on the pool-rate basis: cash flows booked in, carried at the short rate
        self._carried = 0.0
        self._version = 0
        self._operations = 0

    @classmethod
    def create(
        cls, y0: float, r0: Rate, kappa: float, anchor: Anchor | None = None, **kwargs
    ) -> PoolAccount:
        """Pool anchored flat at r0 unless another anchor is given."""
        params = CurveParams(kappa=kappa, anchor=anchor or Anchor.constant(r0))
        return cls(y0, params, r0=r0, **kwargs)

    # ---- Read-only views ----

    @property
    def clock(self) -> float:
        return self.ledger.clock

    @property
    def liability(self) -> float:
        return self.ledger.liability

    @property
    def carried_liability(self) -> float:
        """L carried at the pool's short rate, d ln L = r dt."""
        return self._carried

    @property
    def version(self) -> int:
        return self._version

    def rate(self, tenor: Tenor) -> Rate:
        """Marginal rate the pool quotes for tenor t."""
        return invariant.rate(self.core, tenor, self.params)

    def equity(self, basis: EquityBasis | None = None) -> float:
        """Net equity E = y + L on the pool's basis unless another is given."""
        return self.core.y + self._basis_liability(basis)

    def _basis_liability(self, basis: EquityBasis | None = None) -> float:
        if (basis or self.equity_basis) == EquityBasis.LOCKED:
            return self.ledger.liability
        return self._carried

    def curve_marked_equity(self) -> float:
        """Equity with open positions marked to the pool's current curve."""
        def curve_rate(tenors: np.ndarray) -> np.ndarray:
            return invariant.curve(self.core, tenors, self.params)[0]

        return self.core.y + self.ledger.mark_to_curve(curve_rate)

    def position(self, position_id: int) -> Position:
        return self.ledger.position(position_id)

    def snapshot(self) -> PoolSnapshot:
        """Checkpoint of the pool state."""
        return PoolSnapshot(
            clock=self.clock,
            X=self.core.X,
            y=self.core.y,
            L=self._basis_liability(),
            halted=self.halted,
            positions=len(self.ledger),
        )

    # ---- Trading ----

    def quote(
        self,
        kind: TradeKind,
        tenor: Tenor | None,
        size: float,
        denomination: Denomination = Denomination.CASH,
        position_id: int | None = None,
    ) -> TradeQuote:
        """Price a trade without touching the pool.

        Closing trades (withdraw, repay) against a position take the
        position's remaining tenor; `tenor` may then be None.
        """
        kind = TradeKind(kind)
        if kind == TradeKind.LEND and self.halted:
            raise LendingHaltedError(
                f"lending halted: equity {self.equity()} below "
                f"{self.halt_threshold} x {self.y0}"
            )
        if position_id is not None:
            tenor = self._closing_tenor(kind, position_id, tenor)
        if tenor is None:
            raise DomainError(f"{kind} needs a tenor or a position id")

        return price(
            self.core,
            self.params,
            kind,
            tenor,
            size,
            denomination,
            version=self._version,
            position_id=position_id,
        )

    def _closing_tenor(
        self, kind: TradeKind, position_id: int, tenor: Tenor | None
    ) -> Tenor:
        """Remaining tenor of the position a withdraw or repay draws down."""
        if kind not in _CLOSES:
            raise DomainError(f"{kind} trades do not close a position")
        current = self.ledger.position(position_id)
        if current.side != _CLOSES[kind]:
            raise InsufficientPositionError(
                f"{kind} cannot draw down a {current.side.name.lower()} position"
            )
        remaining = max(current.maturity - self.clock, 0.0)
        if tenor is not None and not math.isclose(tenor, remaining, abs_tol=1e-12):
            raise DomainError(
                f"tenor {tenor} does not match position {position_id} ({remaining})"
            )
        return remaining

    def execute(self, quote: TradeQuote) -> int | None:
        """Execute a fresh quote.

        Opening trades return the new position id; closing trades return the
        id of the position drawn down.
        """
        if quote.version != self._version:
            raise StaleQuoteError(
                f"quote priced at version {quote.version}, pool is at {self._version}"
            )
        if quote.kind == TradeKind.LEND and self.halted:
            raise LendingHaltedError("lending halted")

        if quote.kind in _CLOSES:
            return self._execute_closing(quote)
        if quote.tenor <= 0.0:
            raise DomainError("cannot open a position at zero tenor")

        self.core = quote.post_state
        self._carried -= quote.dy
        side = Side.LOAN if quote.kind == TradeKind.LEND else Side.BORROW
        position_id = self.ledger.open(
            side=side,
            face=abs(quote.dx),
            maturity=self.clock + quote.tenor,
            locked_rate=quote.realized_rate,
            present_value=abs(quote.dy),
            disbursed=abs(quote.dy),
        )
        self._after_operation()
        return position_id

    def _execute_closing(self, quote: TradeQuote) -> int:
        """Withdraw or repay against an open position."""
        if quote.position_id is None:
            raise InsufficientPositionError(f"{quote.kind} needs a position id")
        current = self.ledger.position(quote.position_id)
        if abs(quote.dx) > current.face * (1.0 + 1e-12):
            raise InsufficientPositionError(
                f"position {current.id} holds face {current.face}, "
                f"{quote.kind} needs {abs(quote.dx)}"
            )
        self.core = quote.post_state
        self._carried -= quote.dy
        _, collateral = self.ledger.reduce(current.id, abs(quote.dx))
        _LOGGER.debug(
            "%s on position %s: face %s, collateral released %s",
            quote.kind,
            current.id,
            abs(quote.dx),
            collateral,
        )
        self._after_operation()
        return current.id

    # ---- Time and settlement ----

    def advance_time(self, dt: float) -> float:
        """Move the clock forward.

        Every position accrues at its locked rate and the carried L accrues
        at the pool's short rate taken before the step. Returns the change
        in L on the pool's equity basis, which is also the change in equity.
        """
        carried_before = self._carried
        if self._carried != 0.0 and self.core.X > 0.0:
            short_rate = invariant.rate(self.core, 0.0, self.params)
            self._carried += self._carried * math.expm1(short_rate * dt)
        accrued = self.ledger.advance(dt)
        self._version += 1
        if self.equity_basis == EquityBasis.LOCKED:
            return accrued
        return self._carried - carried_before

    def due_positions(self) -> list[int]:
        """Open positions whose maturity has been reached."""
        return self.ledger.due()

    def settle_position(self, position_id: int) -> float:
        """Settle one matured position at par; returns the collateral released."""
        current = self.ledger.position(position_id)
        if current.maturity > self.clock:
            raise DomainError(
                f"position {position_id} matures at {current.maturity}, clock {self.clock}"
            )
        # Loan: pool pays face (dx = +face); borrow: pool receives face
        dx = current.face if current.side == Side.LOAN else -current.face
        try:
            self.core = invariant.apply_trade(self.core, 0.0, self.params, dx, -dx)
        except RejectedTradeError as err:
            _LOGGER.error(
                "Pool cannot settle position %s (%s): %s",
                position_id,
                self.snapshot().to_record(),
                err,
            )
            if current.side == Side.LOAN:
                raise InsolvencyError(
                    f"pool cash {self.core.y} cannot repay loan {position_id} "
                    f"of face {current.face}"
                ) from err
            raise BondValueExhaustedError(
                f"pool bond value {self.core.X} cannot absorb borrow {position_id} "
                f"of face {current.face}"
            ) from err
        self._carried += dx
        _, collateral = self.ledger.close(position_id)
        self._after_operation()
        return collateral

    def settle_maturities(self) -> list[int]:
        """Settle every due position; returns the settled ids."""
        settled = self.due_positions()
        for position_id in settled:
            self.settle_position(position_id)
        return settled

    # ---- Policy ----

    def update_halt(self) -> bool:
        """Re-evaluate the lending halt: halted while E < threshold * y0."""
        halted = self.equity() < self.halt_threshold * self.y0
        if halted != self.halted:
            _LOGGER.info(
                "Lending %s at clock %s (equity %s)",
                "halted" if halted else "resumed",
                self.clock,
                self.equity(),
            )
        self.halted = halted
        return halted

    def set_anchor(self, anchor: Anchor) -> None:
        """Replace the anchor; applies from the next quote."""
        self.params = CurveParams(kappa=self.params.kappa, anchor=anchor)
        self._version += 1

    def check_ledger(self) -> float:
        """Verify incremental L against a full revaluation."""
        return self.ledger.check()

    def _after_operation(self) -> None:
        self._version += 1
        self._operations += 1
        if self.ledger_check_interval and self._operations % self.ledger_check_interval == 0:
            self.ledger.check()
