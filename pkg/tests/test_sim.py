"""Tests for the speculator market experiment."""

from __future__ import annotations

import math
from dataclasses import astuple, replace

import numpy as np
import pytest

from bondmm import sim
from bondmm.const import EquityBasis, MaturitySpread, Scale, Side, TradeKind
from bondmm.exceptions import BondValueExhaustedError, DomainError, InsolvencyError
from bondmm.market import CirParams, GaussianStream
from bondmm.pool import PoolAccount
from bondmm.sim import SimConfig, Simulator, Slot

A, P = Slot.ACTIVE, Slot.PASSIVE


class FixedStream:
    """Stream returning the same deviate forever."""

    def __init__(self, value: float) -> None:
        self.value = value

    def next(self) -> float:
        return self.value


class TestConfig:
    def test_defaults(self):
        config = SimConfig()
        assert (config.n_steps, config.trades_per_step) == (2000, 200)
        assert config.dt == pytest.approx(5e-4)
        assert config.cir.r_init == config.r0

    def test_scale(self):
        config = SimConfig().with_scale(Scale.PAPER)
        assert (config.n_steps, config.trades_per_step) == (100_000, 1000)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n_steps=0),
            dict(trades_per_step=-1),
            dict(horizon=0.0),
            dict(halt_threshold=1.0),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(DomainError):
            SimConfig(**kwargs)

    def test_as_dict(self):
        data = SimConfig().as_dict()
        assert data["maturity_spread"] == "variance"
        assert data["size_denomination"] == "cash"
        assert data["equity_basis"] == "pool_rate"
        assert data["cir"] == {"k": 0.4, "theta": 0.05, "sigma": 0.2, "r_init": 0.05}


class TestTradeSampling:
    def test_degenerate_draw(self):
        assert sim.sample_trade(0.0, 1.0, FixedStream(0.0), 0.01) == (1.0, 0.72)

    def test_spread_readings(self):
        stream = FixedStream(1.0)
        tenor, _ = sim.sample_trade(0.75, 1.0, stream, 0.01)
        assert tenor == pytest.approx(0.75)
        tenor, _ = sim.sample_trade(0.75, 1.0, stream, 0.01, maturity_spread=MaturitySpread.STD)
        assert tenor == pytest.approx(0.5)

    def test_floors(self):
        tenor, _ = sim.sample_trade(0.0, 1.0, FixedStream(-1.0), 0.01)
        assert tenor == 0.01
        _, size = sim.sample_trade(0.0, 1.0, FixedStream(-0.72), 0.01)
        assert size == 1e-6

    def test_mean_size(self):
        stream = GaussianStream(17)
        sizes = [sim.sample_trade(0.0, 1.0, stream, 1e-3)[1] for _ in range(100_000)]
        assert 0.95 <= np.mean(sizes) <= 1.05

    @pytest.mark.parametrize("now", [-0.1, 1.0])
    def test_outside_horizon(self, now):
        with pytest.raises(DomainError):
            sim.sample_trade(now, 1.0, FixedStream(0.0), 0.01)


class TestScheduling:
    def test_direction(self):
        assert sim.direction(0.06, 0.05) == TradeKind.LEND
        assert sim.direction(0.04, 0.05) == TradeKind.BORROW
        assert sim.direction(0.05, 0.05) == TradeKind.BORROW

    def test_interleave(self):
        assert sim.interleave(1000, 500) == [A, A, P] * 500
        assert sim.interleave(4, 0) == [A] * 4
        assert sim.interleave(3, 2) == [A, A, P, A, P]
        assert sim.interleave(0, 2) == [P, P]

    @pytest.mark.parametrize("n_active,n_passive", [(7, 3), (200, 13), (5, 9)])
    def test_interleave_counts(self, n_active, n_passive):
        schedule = sim.interleave(n_active, n_passive)
        assert schedule.count(A) == n_active
        assert schedule.count(P) == n_passive


class TestRun:
    def test_no_trades(self):
        result = sim.run(SimConfig(n_steps=30, trades_per_step=0))
        assert len(result.metrics) == 30
        assert all(row.equity_minus_y0 == 0.0 for row in result.metrics)
        assert all(math.isnan(row.mean_pool_rate) for row in result.metrics)
        assert result.final.X == result.final.y == 1000.0

    def test_rows(self, small_config):
        result = sim.run(small_config)
        assert [row.step for row in result.metrics] == list(range(40))
        assert result.metrics[3].time_years == pytest.approx(3 * small_config.dt)
        assert result.metrics[0].market_rate == small_config.cir.r_init
        for row in result.metrics:
            assert row.n_active_executed <= small_config.trades_per_step
            if row.n_active_executed == 0:
                assert math.isnan(row.rate_std)
            else:
                assert row.rate_std >= 0.0
            assert row.rate_diff == pytest.approx(row.mean_pool_rate - row.market_rate)
        assert result.settled == sum(row.n_passive_settled for row in result.metrics)
        assert len(result.diagnostics) == 40

    def test_deterministic(self, small_config):
        first = sim.run(small_config)
        second = sim.run(small_config)
        np.testing.assert_array_equal(
            np.array([astuple(row) for row in first.metrics], dtype=float),
            np.array([astuple(row) for row in second.metrics], dtype=float),
        )
        assert first.final == second.final

    def test_seed_changes_run(self, small_config):
        first = sim.run(small_config)
        second = sim.run(replace(small_config, seed=small_config.seed + 1))
        assert first.final != second.final

    def test_flat_market_is_tracked(self, flat_config):
        result = sim.run(flat_config)
        gaps = np.abs([row.rate_diff for row in result.metrics[1:]])
        assert np.all(np.array([row.market_rate for row in result.metrics]) == 0.05)
        assert np.nanmean(gaps) < 1e-4
        assert np.nanmax(gaps) < 1e-3

    def test_collateral_and_ledger_every_step(self, small_config):
        simulator = Simulator(replace(small_config, ledger_check_interval=50))
        for row, diagnostic in simulator.steps():
            ledger = simulator.pool.ledger
            assert diagnostic.collateral_held == pytest.approx(
                1.5 * ledger.outstanding_disbursed(), rel=1e-12
            )
            assert ledger.check() == pytest.approx(ledger.liability, rel=1e-6, abs=1e-9)
            assert row.equity_minus_y0 >= -0.01 * small_config.y0

    @pytest.mark.parametrize("error", [InsolvencyError, BondValueExhaustedError])
    def test_settlement_failure_dumps_state(self, small_config, monkeypatch, caplog, error):
        simulator = Simulator(small_config)

        def fail(step):
            raise error("cannot settle")

        monkeypatch.setattr(simulator, "_step", fail)
        with pytest.raises(error):
            simulator.run()
        assert "Run aborted: clock=0" in caplog.text



class TestHalting:
    @staticmethod
    def _held_halted(config: SimConfig) -> Simulator:
        simulator = Simulator(config)
        simulator.pool.halted = True
        simulator.pool.update_halt = lambda: True
        return simulator

    def test_lends_skipped_borrows_execute(self, small_config):
        simulator = self._held_halted(small_config)
        steps = list(simulator.steps())
        first, first_diagnostic = steps[0]
        # Pool opens at the market rate: one borrow, then every trade would lend
        assert first.n_active_executed == 1
        assert first_diagnostic.n_halt_skipped == small_config.trades_per_step - 1
        for row, diagnostic in steps:
            assert row.halted
            assert (
                row.n_active_executed + diagnostic.n_halt_skipped + diagnostic.n_rejected
                == small_config.trades_per_step
            )
        ledger = simulator.pool.ledger
        assert all(ledger.position(pid).side == Side.BORROW for pid in ledger.open_ids())
        assert simulator.halt_skipped == sum(d.n_halt_skipped for _, d in steps)

    def test_halt_is_not_a_freeze(self, small_config):
        simulator = self._held_halted(small_config)
        steps = list(simulator.steps())
        trading = [row.step for row, _ in steps if row.n_active_executed > 0]
        assert len(trading) >= 5
        assert trading[-1] > small_config.n_steps // 2

    def test_halted_anchor_restarts_at_market(self):
        simulator = Simulator(SimConfig(n_steps=10, trades_per_step=0))
        pool = simulator.pool
        pool.execute(pool.quote(TradeKind.BORROW, 1.0, 80.0))
        pool.set_anchor(simulator._next_anchor(0.05))
        assert pool.rate(1.0) > 0.05
        pool.halted = True
        pool.set_anchor(simulator._next_anchor(0.05))
        assert pool.rate(0.0) == pytest.approx(0.05, abs=1e-12)
        assert pool.rate(1.0) == pytest.approx(0.05, abs=1e-12)

    def test_unhalted_run_skips_nothing(self, small_config):
        result = sim.run(small_config)
        assert result.halt_skipped == 0
        assert not any(row.halted for row in result.metrics)


class TestRejections:
    def test_oversized_trades_are_counted(self):
        config = SimConfig(n_steps=20, trades_per_step=10, size_mean=2000.0, seed=3)
        result = sim.run(config)
        assert len(result.metrics) == 20
        assert result.rejected == 200
        assert [d.n_rejected for d in result.diagnostics] == [10] * 20
        for row in result.metrics:
            assert row.n_active_executed == 0
            assert math.isnan(row.mean_pool_rate)
            assert math.isnan(row.rate_std)
            assert row.equity_minus_y0 == 0.0
        assert result.final.X == result.final.y == 1000.0


class TestEquityBasis:
    def test_locked_basis_metrics_match_diagnostic(self, small_config):
        result = sim.run(replace(small_config, equity_basis=EquityBasis.LOCKED))
        for row, diagnostic in zip(result.metrics, result.diagnostics):
            assert row.equity_minus_y0 == diagnostic.locked_equity_minus_y0

    def test_bases_share_trades(self, small_config):
        pool_rate = sim.run(small_config)
        locked = sim.run(replace(small_config, equity_basis=EquityBasis.LOCKED))
        assert [row.mean_pool_rate for row in pool_rate.metrics[:5]] == [
            row.mean_pool_rate for row in locked.metrics[:5]
        ]
        assert [d.locked_equity_minus_y0 for d in pool_rate.diagnostics[:5]] == [
            d.locked_equity_minus_y0 for d in locked.diagnostics[:5]
        ]


def test_speculators_pull_pool_to_market():
    pool = PoolAccount.create(1000.0, 0.05, 0.02)
    pool.execute(pool.quote(TradeKind.BORROW, 1.0, 80.0))
    market_rate = 0.05
    gaps = []
    while pool.rate(1.0) > market_rate:
        gaps.append(pool.rate(1.0) - market_rate)
        pool.execute(pool.quote(sim.direction(pool.rate(1.0), market_rate), 1.0, 1.0))
    assert len(gaps) > 5
    assert all(later <= earlier for earlier, later in zip(gaps, gaps[1:]))
    assert abs(pool.rate(1.0) - market_rate) < 1e-4


def test_run_closes_a_rate_gap():
    config = SimConfig(
        n_steps=100,
        trades_per_step=20,
        seed=11,
        r0=0.06,
        cir=CirParams(k=0.4, theta=0.05, sigma=0.0, r_init=0.05),
    )
    gaps = np.abs([row.rate_diff for row in sim.run(config).metrics])
    opening, settled = gaps[0], np.nanmean(gaps[10:])
    assert opening > 5e-3
    assert settled < 5e-4
    assert np.nanmean(gaps[1:10]) < opening
