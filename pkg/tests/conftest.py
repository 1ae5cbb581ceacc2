"""Shared fixtures for the BondMM-A test suite."""

from __future__ import annotations

import pytest
from hypothesis import settings

from bondmm.invariant import Anchor, CoreState, CurveParams
from bondmm.market import CirParams
from bondmm.pool import PoolAccount
from bondmm.sim import SimConfig

settings.register_profile("default", deadline=None)
settings.load_profile("default")

Y0 = 1000.0
R0 = 0.05
KAPPA = 0.02


@pytest.fixture
def params() -> CurveParams:
    """kappa 0.02 with a flat 5% anchor."""
    return CurveParams(kappa=KAPPA, anchor=Anchor.constant(R0))


@pytest.fixture
def fresh_state() -> CoreState:
    """Balanced pool of 1000 cash and 1000 bond value."""
    return CoreState(X=Y0, y=Y0)


@pytest.fixture
def pool() -> PoolAccount:
    """Fresh pool at y0 = 1000, r0 = 5%, kappa = 0.02."""
    return PoolAccount.create(Y0, R0, KAPPA, ledger_check_interval=1)


@pytest.fixture
def small_config() -> SimConfig:
    """A run small enough for unit tests."""
    return SimConfig(n_steps=40, trades_per_step=25, seed=7)


@pytest.fixture
def flat_config() -> SimConfig:
    """Small run against a constant 5% market."""
    return SimConfig(
        n_steps=100,
        trades_per_step=20,
        seed=11,
        cir=CirParams(k=0.4, theta=R0, sigma=0.0, r_init=R0),
    )
