"""Speculator market experiment against a BondMM-A pool.

Each step advances the clock, settles maturing positions as passive trades,
launches speculator trades that lend when the pool rate beats the market rate
and borrow otherwise, then re-anchors the pool at the step's market rate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Iterator

import numpy as np

from . import market
from .const import (
    DEFAULT_CIR_K,
    DEFAULT_CIR_SIGMA,
    DEFAULT_CIR_THETA,
    DEFAULT_EQUITY_BASIS,
    DEFAULT_HALT_THRESHOLD,
    DEFAULT_HORIZON,
    DEFAULT_KAPPA,
    DEFAULT_LEDGER_CHECK_INTERVAL,
    DEFAULT_R0,
    DEFAULT_SEED,
    DEFAULT_SIZE_MEAN,
    DEFAULT_SIZE_VAR,
    DEFAULT_Y0,
    MIN_TRADE_SIZE,
    SCALE_PRESETS,
    Denomination,
    EquityBasis,
    MaturitySpread,
    Scale,
    TradeKind,
)
from .exceptions import DomainError, RejectedTradeError, SettlementError
from .invariant import Anchor
from .market import CirParams, GaussianStream, MarketPath
from .pool import PoolAccount, PoolSnapshot
from .ratemath import Rate

_LOGGER = logging.getLogger(__name__)


class Slot(Enum):
    """Entry of an execution schedule."""

    ACTIVE = "A"
    PASSIVE = "P"


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one experiment run."""

    y0: float = DEFAULT_Y0
    r0: float = DEFAULT_R0
    kappa: float = DEFAULT_KAPPA
    cir: CirParams = field(
        default_factory=lambda: CirParams(
            k=DEFAULT_CIR_K,
            theta=DEFAULT_CIR_THETA,
            sigma=DEFAULT_CIR_SIGMA,
            r_init=DEFAULT_R0,
        )
    )
    horizon: float = DEFAULT_HORIZON
    n_steps: int = SCALE_PRESETS[Scale.DESK][0]
    trades_per_step: int = SCALE_PRESETS[Scale.DESK][1]
    size_mean: float = DEFAULT_SIZE_MEAN
    size_var: float = DEFAULT_SIZE_VAR
    halt_threshold: float = DEFAULT_HALT_THRESHOLD
    seed: int = DEFAULT_SEED
    maturity_spread: MaturitySpread = MaturitySpread.VARIANCE
    size_denomination: Denomination = Denomination.CASH
    ledger_check_interval: int = DEFAULT_LEDGER_CHECK_INTERVAL
    equity_basis: EquityBasis = DEFAULT_EQUITY_BASIS

    def __post_init__(self) -> None:
        if self.n_steps < 1 or self.trades_per_step < 0 or not self.horizon > 0:
            raise DomainError(
                f"need n_steps >= 1, trades_per_step >= 0, horizon > 0; got "
                f"{self.n_steps}, {self.trades_per_step}, {self.horizon}"
            )
        if not 0 < self.halt_threshold < 1:
            raise DomainError(f"halt threshold must lie in (0, 1), got {self.halt_threshold}")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def with_scale(self, scale: Scale) -> SimConfig:
        """Copy with the step and trade counts of a named preset."""
        n_steps, trades_per_step = SCALE_PRESETS[Scale(scale)]
        return replace(self, n_steps=n_steps, trades_per_step=trades_per_step)

    def as_dict(self) -> dict[str, object]:
        """Plain representation for metadata output."""
        data = asdict(self)
        data["maturity_spread"] = str(self.maturity_spread)
        data["size_denomination"] = str(self.size_denomination)
        data["equity_basis"] = str(self.equity_basis)
        return data


@dataclass(frozen=True, slots=True)
class StepMetrics:
    """One step of the experiment."""

    step: int
    time_years: float
    market_rate: Rate
    mean_pool_rate: Rate
    rate_diff: float
    rate_std: float
    equity_minus_y0: float
    n_active_executed: int
    n_passive_settled: int
    halted: bool


@dataclass(frozen=True, slots=True)
class StepDiagnostics:
    """Secondary per-step measurements kept out of the metrics schema."""

    step: int
    mean_marginal_rate: Rate
    marginal_rate_std: float
    curve_equity_minus_y0: float
    locked_equity_minus_y0: float
    collateral_held: float
    open_positions: int
    n_halt_skipped: int
    n_rejected: int


@dataclass
class SimResult:
    """Everything a run produced."""

    config: SimConfig
    metrics: list[StepMetrics]
    diagnostics: list[StepDiagnostics]
    path: MarketPath
    final: PoolSnapshot
    halt_skipped: int = 0
    rejected: int = 0
    settled: int = 0


# ---- Trade generation ----


def sample_trade(
    now: float,
    horizon: float,
    stream: GaussianStream,
    dt: float,
    size_mean: float = DEFAULT_SIZE_MEAN,
    size_var: float = DEFAULT_SIZE_VAR,
    maturity_spread: MaturitySpread = MaturitySpread.VARIANCE,
) -> tuple[float, float]:
    """Draw (tenor, size) for one speculator trade.

    tenor = |N(T - now, T - now)| floored at dt, size = |N(size_mean, size_var)|
    floored at MIN_TRADE_SIZE.
    """
    if not 0 <= now < horizon:
        raise DomainError(f"time {now} outside [0, {horizon})")
    remaining = horizon - now
    spread = math.sqrt(remaining) if maturity_spread == MaturitySpread.VARIANCE else remaining
    tenor = abs(stream.next() * spread + remaining)
    size = abs(stream.next() * math.sqrt(size_var) + size_mean)
    return max(tenor, dt), max(size, MIN_TRADE_SIZE)


def direction(pool_rate: Rate, market_rate: Rate) -> TradeKind:
    """Lend when the pool pays more than the market, otherwise borrow."""
    return TradeKind.LEND if pool_rate > market_rate else TradeKind.BORROW


def interleave(n_active: int, n_passive: int) -> list[Slot]:
    """Spread passive trades evenly among active ones.

    The k-th passive trade follows the ceil(k * n_active / n_passive)-th active.
    """
    schedule: list[Slot] = []
    placed = 0
    for k in range(1, n_passive + 1):
        target = -(-k * n_active // n_passive)
        schedule.extend([Slot.ACTIVE] * (target - placed))
        placed = target
        schedule.append(Slot.PASSIVE)
    schedule.extend([Slot.ACTIVE] * (n_active - placed))
    return schedule


def _mean_std(values: list[float]) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    array = np.asarray(values)
    return float(array.mean()), float(array.std())


# ---- Driver ----


class Simulator:
    """Drives one pool through one market path."""

    def __init__(self, config: SimConfig) -> None:
        """Initialize pool, market path and trade stream from the config."""
        self.config = config
        market_stream, self._trades = market.spawn_streams(config.seed)
        self.path = market.generate(
            config.cir, config.n_steps, config.dt, seed=config.seed, stream=market_stream
        )
        self.pool = PoolAccount.create(
            config.y0,
            config.r0,
            config.kappa,
            halt_threshold=config.halt_threshold,
            ledger_check_interval=config.ledger_check_interval,
            equity_basis=config.equity_basis,
        )
        self.halt_skipped = 0
        self.rejected = 0
        self.settled = 0

    def steps(self) -> Iterator[tuple[StepMetrics, StepDiagnostics]]:
        """Run the experiment lazily, one step at a time."""
        for step in range(self.config.n_steps):
            yield self._step(step)

    def run(self) -> SimResult:
        """Run every step and collect the results."""
        _LOGGER.info(
            "Starting run: %s steps x %s trades, seed %s",
            self.config.n_steps,
            self.config.trades_per_step,
            self.config.seed,
        )
        metrics: list[StepMetrics] = []
        diagnostics: list[StepDiagnostics] = []
        try:
            for row, diagnostic in self.steps():
                metrics.append(row)
                diagnostics.append(diagnostic)
        except SettlementError:
            _LOGGER.error("Run aborted: %s", self.pool.snapshot().to_record())
            raise
        self.pool.check_ledger()
        _LOGGER.info(
            "Finished run: equity %s, %s open positions, %s halted lends, %s rejected",
            self.pool.equity(),
            len(self.pool.ledger),
            self.halt_skipped,
            self.rejected,
        )
        return SimResult(
            config=self.config,
            metrics=metrics,
            diagnostics=diagnostics,
            path=self.path,
            final=self.pool.snapshot(),
            halt_skipped=self.halt_skipped,
            rejected=self.rejected,
            settled=self.settled,
        )

    def _step(self, step: int) -> tuple[StepMetrics, StepDiagnostics]:
        """Execute one grid step."""
        config = self.config
        pool = self.pool
        now = step * config.dt
        # Clock is snapped to the grid so it never drifts from step * dt
        pool.advance_time(now - pool.clock)
        market_rate = float(self.path.rates[step])

        due = pool.due_positions()
        trades = [
            sample_trade(
                now,
                config.horizon,
                self._trades,
                config.dt,
                config.size_mean,
                config.size_var,
                config.maturity_spread,
            )
            for _ in range(config.trades_per_step)
        ]

        realized: list[float] = []
        marginal: list[float] = []
        halt_skipped = rejected = settled = 0
        active = iter(trades)
        passive = iter(due)
        for slot in interleave(len(trades), len(due)):
            if slot is Slot.PASSIVE:
                pool.settle_position(next(passive))
                settled += 1
                continue

            tenor, size = next(active)
            pool_rate = pool.rate(tenor)
            kind = direction(pool_rate, market_rate)
            if kind == TradeKind.LEND and pool.halted:
                halt_skipped += 1
                continue
            try:
                quote = pool.quote(kind, tenor, size, config.size_denomination)
                pool.execute(quote)
            except RejectedTradeError as err:
                _LOGGER.debug("Step %s: %s of %s at %s rejected: %s", step, kind, size, tenor, err)
                rejected += 1
                continue
            realized.append(quote.realized_rate)
            marginal.append(pool_rate)

        pool.update_halt()
        mean_rate, rate_std = _mean_std(realized)
        mean_marginal, marginal_std = _mean_std(marginal)
        equity = pool.equity()
        row = StepMetrics(
            step=step,
            time_years=now,
            market_rate=market_rate,
            mean_pool_rate=mean_rate,
            rate_diff=mean_rate - market_rate,
            rate_std=rate_std,
            equity_minus_y0=equity - config.y0,
            n_active_executed=len(realized),
            n_passive_settled=settled,
            halted=pool.halted,
        )
        diagnostic = StepDiagnostics(
            step=step,
            mean_marginal_rate=mean_marginal,
            marginal_rate_std=marginal_std,
            curve_equity_minus_y0=pool.curve_marked_equity() - config.y0,
            locked_equity_minus_y0=pool.equity(EquityBasis.LOCKED) - config.y0,
            collateral_held=pool.ledger.collateral_held(),
            open_positions=len(pool.ledger),
            n_halt_skipped=halt_skipped,
            n_rejected=rejected,
        )
        self.halt_skipped += halt_skipped
        self.rejected += rejected
        self.settled += settled

        if _LOGGER.isEnabledFor(logging.DEBUG):
            _LOGGER.debug(
                "Step %s: market %s, pool %s, equity %s, %s active, %s passive",
                step,
                market_rate,
                mean_rate,
                equity,
                len(realized),
                settled,
            )
        pool.set_anchor(self._next_anchor(market_rate))
        return row, diagnostic

    def _next_anchor(self, market_rate: Rate) -> Anchor:
        """Anchor for the next step: the step's market rate.

        While lending is halted the anchor is shifted by -kappa ln psi so the
        pool's short rate restarts at the market rate and borrowers keep
        trading.
        """
        core = self.pool.core
        if self.pool.halted and core.X > 0.0 and core.y > 0.0:
            return Anchor.constant(market_rate - self.config.kappa * math.log(core.X / core.y))
        return Anchor.constant(market_rate)


def run(config: SimConfig) -> SimResult:
    """Run one experiment."""
    return Simulator(config).run()
