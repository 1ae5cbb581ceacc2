"""Tests for the pool account state machine."""

from __future__ import annotations

import math

import pytest

from bondmm.const import Denomination, EquityBasis, Side, TradeKind
from bondmm.exceptions import (
    BondValueExhaustedError,
    CapacityError,
    DomainError,
    InsolvencyError,
    InsufficientPositionError,
    LendingHaltedError,
    SettlementError,
    StaleQuoteError,
)
from bondmm.invariant import Anchor, CoreState
from bondmm.pool import PoolAccount, PoolSnapshot

MARGINAL_CASH = 10 * math.exp(-0.05)


def _open(pool: PoolAccount, kind: TradeKind, size: float = MARGINAL_CASH, tenor=1.0) -> int:
    return pool.execute(pool.quote(kind, tenor, size))


def _halt(pool: PoolAccount, cash: float = 989.0) -> None:
    pool.core = CoreState(X=pool.core.X, y=cash)
    pool.update_halt()


class TestQuote:
    def test_lend_cash_buys_about_ten_face(self, pool):
        quote = pool.quote(TradeKind.LEND, 1.0, MARGINAL_CASH)
        assert quote.dy == MARGINAL_CASH
        assert quote.dx < 0
        assert -quote.dx == pytest.approx(10.0, abs=0.01)
        assert quote.marginal_rate < quote.pre_trade_rate == 0.05
        assert quote.collateral == 0.0

    def test_face_denomination(self, pool):
        quote = pool.quote(TradeKind.BORROW, 1.0, 10.0, Denomination.FACE)
        assert quote.dx == 10.0
        assert quote.dy == pytest.approx(-9.5105, abs=2e-3)
        assert quote.average_price == pytest.approx(-quote.dy / 10.0)

    def test_zero_tenor_is_par(self, pool):
        quote = pool.quote(TradeKind.LEND, 0.0, 5.0)
        assert quote.average_price == 1.0
        assert quote.dx == -5.0

    def test_borrow_collateral(self, pool):
        quote = pool.quote(TradeKind.BORROW, 2.0, 20.0)
        assert quote.collateral == pytest.approx(30.0)
        assert quote.marginal_rate > quote.pre_trade_rate

    def test_does_not_mutate(self, pool):
        before = (pool.core, pool.liability, pool.version)
        pool.quote(TradeKind.BORROW, 1.0, 50.0)
        assert (pool.core, pool.liability, pool.version) == before

    @pytest.mark.parametrize("size", [0.0, -1.0])
    def test_size_must_be_positive(self, pool, size):
        with pytest.raises(DomainError):
            pool.quote(TradeKind.LEND, 1.0, size)

    def test_capacity(self, pool):
        with pytest.raises(CapacityError, match="trade exceeds pool capacity"):
            pool.quote(TradeKind.BORROW, 1.0, 1000.0)

    def test_realized_rate(self, pool):
        quote = pool.quote(TradeKind.BORROW, 2.0, 40.0)
        assert quote.realized_rate == pytest.approx(
            math.log(quote.dx / -quote.dy) / 2.0, rel=1e-12
        )
        # Borrowers lock a rate between the pre- and post-trade marginal rates
        assert quote.pre_trade_rate < quote.realized_rate < quote.marginal_rate


class TestExecute:
    def test_lend(self, pool):
        quote = pool.quote(TradeKind.LEND, 1.0, MARGINAL_CASH)
        position_id = pool.execute(quote)
        position = pool.position(position_id)
        assert position.side == Side.LOAN
        assert position.face == pytest.approx(-quote.dx)
        assert position.maturity == 1.0
        assert pool.core.y == pytest.approx(1000 + MARGINAL_CASH)
        assert pool.core.X < 1000
        assert pool.liability == pytest.approx(-MARGINAL_CASH)
        assert pool.equity() == pytest.approx(1000.0, rel=1e-12)

    def test_borrow(self, pool):
        position_id = _open(pool, TradeKind.BORROW)
        assert pool.equity() == pytest.approx(1000.0, rel=1e-12)
        assert pool.position(position_id).collateral == pytest.approx(1.5 * MARGINAL_CASH)
        assert pool.ledger.collateral_held() == pytest.approx(14.268, abs=1e-3)

    def test_stale_quote(self, pool):
        stale = pool.quote(TradeKind.LEND, 1.0, 1.0)
        _open(pool, TradeKind.BORROW)
        with pytest.raises(StaleQuoteError):
            pool.execute(stale)

    def test_cannot_open_at_maturity(self, pool):
        with pytest.raises(DomainError):
            pool.execute(pool.quote(TradeKind.LEND, 0.0, 1.0))

    def test_reverse_at_same_instant(self, pool):
        start = pool.core
        position_id = _open(pool, TradeKind.LEND, 25.0, tenor=1.5)
        face = pool.position(position_id).face
        quote = pool.quote(
            TradeKind.WITHDRAW, None, face, Denomination.FACE, position_id=position_id
        )
        assert pool.execute(quote) == position_id
        assert position_id not in pool.ledger
        assert pool.core.X == pytest.approx(start.X, rel=1e-9)
        assert pool.core.y == pytest.approx(start.y, rel=1e-9)
        assert pool.equity() == pytest.approx(1000.0, rel=1e-9)

    def test_partial_repay_releases_collateral(self, pool):
        position_id = _open(pool, TradeKind.BORROW, 20.0, tenor=2.0)
        pool.advance_time(0.5)
        held = pool.position(position_id).collateral
        quote = pool.quote(TradeKind.REPAY, 1.5, 8.0, position_id=position_id)
        assert quote.dx < 0 and quote.dy == 8.0
        pool.execute(quote)
        remaining = pool.position(position_id)
        assert remaining.collateral < held
        assert pool.ledger.collateral_held() == pytest.approx(
            1.5 * pool.ledger.outstanding_disbursed()
        )
        assert pool.check_ledger() == pytest.approx(pool.liability, rel=1e-9)

    def test_closing_trade_checks(self, pool):
        loan = _open(pool, TradeKind.LEND)
        borrow = _open(pool, TradeKind.BORROW)
        with pytest.raises(InsufficientPositionError):
            pool.quote(TradeKind.WITHDRAW, None, 1.0, position_id=borrow)
        with pytest.raises(DomainError):
            pool.quote(TradeKind.REPAY, 0.5, 1.0, position_id=borrow)
        with pytest.raises(DomainError):
            pool.quote(TradeKind.LEND, 1.0, 1.0, position_id=loan)
        with pytest.raises(DomainError):
            pool.quote(TradeKind.WITHDRAW, None, 1.0)
        too_much = pool.quote(
            TradeKind.WITHDRAW, None, 50.0, Denomination.FACE, position_id=loan
        )
        with pytest.raises(InsufficientPositionError):
            pool.execute(too_much)


class TestTime:
    def test_accrual_to_face(self, pool):
        position_id = _open(pool, TradeKind.LEND)
        face = pool.position(position_id).face
        pool.advance_time(1.0)
        assert pool.position(position_id).present_value == pytest.approx(face, rel=1e-12)

    def test_empty_pool(self, pool):
        assert pool.advance_time(0.0) == 0.0
        assert pool.advance_time(3.0) == 0.0
        assert pool.liability == 0.0

    def test_negative_step(self, pool):
        with pytest.raises(DomainError):
            pool.advance_time(-1.0)

    def test_equity_moves_only_by_accrual(self, pool):
        accrued = 0.0
        _open(pool, TradeKind.LEND, 30.0, tenor=0.5)
        _open(pool, TradeKind.BORROW, 50.0, tenor=0.8)
        accrued += pool.advance_time(0.25)
        _open(pool, TradeKind.BORROW, 10.0, tenor=1.0)
        accrued += pool.advance_time(0.25)
        assert pool.settle_maturities()
        _open(pool, TradeKind.LEND, 5.0, tenor=0.1)
        accrued += pool.advance_time(0.6)
        assert len(pool.settle_maturities()) == 2
        assert pool.equity() - 1000.0 == pytest.approx(accrued, abs=1e-9)
        assert pool.check_ledger() == pytest.approx(pool.liability, abs=1e-9)


class TestSettlement:
    def test_loan_at_maturity(self, pool):
        position_id = _open(pool, TradeKind.LEND)
        face = pool.position(position_id).face
        pool.advance_time(1.0)
        before = pool.core
        equity = pool.equity()
        assert pool.due_positions() == [position_id]
        assert pool.settle_maturities() == [position_id]
        assert pool.core.y == pytest.approx(before.y - face, rel=1e-15)
        assert pool.core.X == pytest.approx(before.X + face, rel=1e-15)
        assert pool.equity() == pytest.approx(equity, abs=1e-9)
        assert len(pool.ledger) == 0

    def test_borrow_returns_collateral(self, pool):
        position_id = _open(pool, TradeKind.BORROW)
        held = pool.position(position_id).collateral
        pool.advance_time(1.0)
        assert pool.settle_position(position_id) == held
        assert pool.ledger.collateral_held() == 0.0

    def test_nothing_due(self, pool):
        _open(pool, TradeKind.LEND)
        assert pool.settle_maturities() == []

    def test_not_yet_due(self, pool):
        position_id = _open(pool, TradeKind.LEND)
        with pytest.raises(DomainError):
            pool.settle_position(position_id)


    def test_unpayable_loan_is_insolvency(self, pool):
        position_id = _open(pool, TradeKind.LEND)
        pool.advance_time(1.0)
        pool.core = CoreState(X=pool.core.X, y=5.0)
        with pytest.raises(InsolvencyError, match="cannot repay loan"):
            pool.settle_position(position_id)
        assert position_id in pool.ledger

    def test_unabsorbable_borrow_is_not_insolvency(self, pool):
        position_id = _open(pool, TradeKind.BORROW)
        pool.advance_time(1.0)
        pool.core = CoreState(X=5.0, y=pool.core.y)
        with pytest.raises(BondValueExhaustedError, match="cannot absorb borrow") as err:
            pool.settle_position(position_id)
        assert not isinstance(err.value, InsolvencyError)
        assert isinstance(err.value, SettlementError)
        assert position_id in pool.ledger


class TestPoolRateBasis:
    @pytest.fixture
    def carried(self) -> PoolAccount:
        return PoolAccount.create(
            1000.0, 0.05, 0.02, equity_basis=EquityBasis.POOL_RATE, ledger_check_interval=1
        )

    def test_trades_move_cash_into_l(self, carried):
        _open(carried, TradeKind.LEND, 30.0, tenor=0.5)
        _open(carried, TradeKind.BORROW, 50.0, tenor=0.8)
        assert carried.carried_liability == pytest.approx(20.0, abs=1e-9)
        assert carried.equity() == pytest.approx(1000.0, abs=1e-9)
        assert carried.equity(EquityBasis.LOCKED) == pytest.approx(1000.0, abs=1e-9)

    def test_accrues_at_short_rate(self, carried):
        _open(carried, TradeKind.BORROW, 50.0)
        before = carried.carried_liability
        short_rate = carried.rate(0.0)
        assert short_rate > 0.05
        accrued = carried.advance_time(0.5)
        assert accrued == pytest.approx(before * math.expm1(0.5 * short_rate), rel=1e-12)
        assert carried.equity() - 1000.0 == pytest.approx(accrued, abs=1e-9)
        assert carried.liability != pytest.approx(carried.carried_liability, abs=1e-6)

    def test_settlement_leaves_equity(self, carried):
        _open(carried, TradeKind.LEND, 30.0, tenor=0.5)
        _open(carried, TradeKind.BORROW, 50.0, tenor=0.5)
        carried.advance_time(0.5)
        equity = carried.equity()
        assert len(carried.settle_maturities()) == 2
        assert carried.equity() == pytest.approx(equity, abs=1e-9)
        assert carried.liability == pytest.approx(0.0, abs=1e-9)

    def test_snapshot_and_halt_follow_basis(self, carried):
        _open(carried, TradeKind.BORROW, 50.0)
        assert carried.snapshot().L == carried.carried_liability
        carried.core = CoreState(X=carried.core.X, y=945.0)
        assert not carried.update_halt()
        carried.core = CoreState(X=carried.core.X, y=935.0)
        assert carried.update_halt()


class TestPolicy:
    def test_fresh_pool(self, pool):
        assert pool.equity() == 1000.0
        assert pool.curve_marked_equity() == 1000.0
        assert not pool.update_halt()

    def test_threshold_is_strict(self, pool):
        _halt(pool, 990.0)
        assert not pool.halted
        _halt(pool, 989.0)
        assert pool.halted

    def test_halt_lifts(self, pool):
        _halt(pool)
        _halt(pool, 1000.0)
        assert not pool.halted

    def test_halted_pool_refuses_loans(self, pool):
        pending = pool.quote(TradeKind.LEND, 1.0, 1.0)
        _halt(pool)
        with pytest.raises(LendingHaltedError):
            pool.quote(TradeKind.LEND, 1.0, 1.0)
        with pytest.raises(LendingHaltedError):
            pool.execute(pending)
        loans = pool.ledger.side_present_value(Side.LOAN)
        _open(pool, TradeKind.BORROW)
        assert pool.ledger.side_present_value(Side.LOAN) == loans

    def test_set_anchor(self, pool):
        _open(pool, TradeKind.LEND)
        before = (pool.core, pool.liability)
        stale = pool.quote(TradeKind.BORROW, 1.0, 1.0)
        pool.set_anchor(Anchor.parse("0.04,0.01"))
        assert (pool.core, pool.liability) == before
        with pytest.raises(StaleQuoteError):
            pool.execute(stale)

        fresh = PoolAccount.create(1000.0, 0.05, 0.02)
        fresh.set_anchor(Anchor.parse("0.04,0.01"))
        assert fresh.rate(2.0) == pytest.approx(0.06)
        fresh.set_anchor(Anchor.constant(0.05))
        assert fresh.rate(3.0) == 0.05


class TestSnapshot:
    def test_record_fields(self, pool):
        _open(pool, TradeKind.BORROW)
        record = pool.snapshot().to_record()
        assert record.startswith("clock=0 X=")
        assert "halted=0 positions=1" in record
        assert PoolSnapshot.from_record(record) == pool.snapshot()

    def test_malformed(self):
        with pytest.raises(DomainError):
            PoolSnapshot.from_record("clock=0 X=1")
