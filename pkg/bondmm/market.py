"""Exogenous market short rate: a seeded CIR process on the simulation grid."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .const import FLOAT_FORMAT, MARKET_COLUMNS
from .exceptions import DomainError

_LOGGER = logging.getLogger(__name__)

# Normals drawn per refill of a stream's buffer
_BLOCK = 8192

MARKET_STREAM = 0
TRADE_STREAM = 1


class GaussianStream:
    """Buffered standard normal draws from a PCG64 generator."""

    def __init__(self, seed: int | np.random.SeedSequence) -> None:
        """Initialize the stream from a seed or a spawned seed sequence."""
        sequence = (
            seed
            if isinstance(seed, np.random.SeedSequence)
            else np.random.SeedSequence(seed)
        )
        self._generator = np.random.Generator(np.random.PCG64(sequence))
        self._buffer: list[float] = []
        self._index = 0

    def next(self) -> float:
        """Next standard normal deviate."""
        if self._index == len(self._buffer):
            self._buffer = self._generator.standard_normal(_BLOCK).tolist()
            self._index = 0
        value = self._buffer[self._index]
        self._index += 1
        return value

    def draw(self, count: int) -> np.ndarray:
        """`count` deviates, continuing the same sequence as `next`."""
        return np.fromiter((self.next() for _ in range(count)), dtype=float, count=count)


def spawn_streams(seed: int, count: int = 2) -> list[GaussianStream]:
    """Independent streams from one seed; stream 0 is the market, 1 the trades."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [GaussianStream(child) for child in children]


def gaussian(stream: GaussianStream) -> float:
    """One standard normal draw from `stream`."""
    return stream.next()


@dataclass(frozen=True, slots=True)
class CirParams:
    """Cox-Ingersoll-Ross parameters dr = k (theta - r) dt + sigma sqrt(r) dW."""

    k: float
    theta: float
    sigma: float
    r_init: float

    def __post_init__(self) -> None:
        if not self.k > 0:
            raise DomainError(f"mean reversion k must be positive, got {self.k}")
        if self.theta < 0 or self.sigma < 0 or self.r_init < 0:
            raise DomainError(
                f"theta, sigma and r_init must be nonnegative: {self.theta}, "
                f"{self.sigma}, {self.r_init}"
            )


def feller_ratio(params: CirParams) -> float:
    """2 k theta / sigma^2; values below 1 let the exact process touch zero."""
    if params.sigma == 0:
        return math.inf
    return 2.0 * params.k * params.theta / params.sigma**2


@dataclass(frozen=True)
class MarketPath:
    """Short-rate samples r_0..r_N on the grid t_n = n * dt."""

    rates: np.ndarray
    dt: float
    seed: int | None

    @property
    def n_steps(self) -> int:
        return len(self.rates) - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.rates)) * self.dt

    def to_csv(self, path: Path) -> None:
        """Write (step, time_years, rate) rows."""
        with Path(path).open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(MARKET_COLUMNS)
            for step, rate in enumerate(self.rates.tolist()):
                writer.writerow(
                    [step, format(step * self.dt, FLOAT_FORMAT), format(rate, FLOAT_FORMAT)]
                )


def generate(
    params: CirParams,
    n_steps: int,
    dt: float,
    seed: int | None = None,
    stream: GaussianStream | None = None,
) -> MarketPath:
    """Full-truncation Euler path of the CIR short rate.

    r_{n+1} = max(r_n + k (theta - r_n+) dt + sigma sqrt(r_n+) sqrt(dt) Z_n, 0)
    """
    if n_steps < 1:
        raise DomainError(f"need at least one step, got {n_steps}")
    if not dt > 0:
        raise DomainError(f"time step must be positive, got {dt}")
    if stream is None:
        if seed is None:
            raise DomainError("generate needs a seed or a stream")
        stream = spawn_streams(seed)[MARKET_STREAM]

    ratio = feller_ratio(params)
    if ratio < 1.0:
        _LOGGER.debug("CIR parameters violate the Feller condition (ratio %s)", ratio)

    shocks = stream.draw(n_steps) * math.sqrt(dt)
    rates = np.empty(n_steps + 1)
    rates[0] = params.r_init
    r = params.r_init
    k, theta, sigma = params.k, params.theta, params.sigma
    for n, shock in enumerate(shocks.tolist(), start=1):
        r_plus = r if r > 0.0 else 0.0
        r = r + k * (theta - r_plus) * dt + sigma * math.sqrt(r_plus) * shock
        if r < 0.0:
            r = 0.0
        rates[n] = r
    return MarketPath(rates=rates, dt=dt, seed=seed)
