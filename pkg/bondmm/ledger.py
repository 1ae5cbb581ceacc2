"""Position ledger of a BondMM-A pool.

Positions are stored column-wise in growable numpy arrays so that accrual,
maturity scans and revaluation run as vector operations. Position ids are
stable; rows are not. Closed rows are compacted away once they make up more
than half of the table.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .const import COLLATERAL_RATIO, LEDGER_RTOL, Side
from .exceptions import DomainError, InsufficientPositionError, InvariantViolationError

_LOGGER = logging.getLogger(__name__)

_INITIAL_CAPACITY = 1024
# Reductions leaving less than this share of a position close it outright
_CLOSE_FRACTION = 1.0 - 1e-12

_COLUMNS = {
    "_id": np.int64,
    "_side": np.int8,
    "_is_open": np.bool_,
    "_face": np.float64,
    "_maturity": np.float64,
    "_rate": np.float64,
    "_pv": np.float64,
    "_disbursed": np.float64,
    "_collateral": np.float64,
}


@dataclass(frozen=True, slots=True)
class Position:
    """One outstanding loan or borrow."""

    id: int
    side: Side
    face: float
    maturity: float
    locked_rate: float
    present_value: float
    disbursed: float
    collateral: float


class Ledger:
    """Open positions, the net present value L and the clock."""

    def __init__(self, clock: float = 0.0) -> None:
        """Initialize an empty ledger."""
        self.clock = clock
        self._count = 0
        self._next_id = 0
        self._rows: dict[int, int] = {}
        self._liability = 0.0
        self._allocate(_INITIAL_CAPACITY)

    def _allocate(self, capacity: int) -> None:
        """Grow the column arrays to `capacity` rows."""
        for name, dtype in _COLUMNS.items():
            column = np.zeros(capacity, dtype=dtype)
            old = getattr(self, name, None)
            if old is not None:
                column[: self._count] = old[: self._count]
            setattr(self, name, column)
        self._capacity = capacity

    def _compact(self) -> None:
        """Drop closed rows, keeping open ones in id order."""
        n = self._count
        keep = np.flatnonzero(self._is_open[:n])
        kept = keep.size
        for name in _COLUMNS:
            column = getattr(self, name)
            column[:kept] = column[keep]
            column[kept:n] = 0
        self._count = kept
        self._rows = {position_id: row for row, position_id in enumerate(self._id[:kept].tolist())}
        _LOGGER.debug("Compacted ledger from %s to %s rows", n, kept)

    def _row(self, position_id: int) -> int:
        try:
            return self._rows[position_id]
        except KeyError:
            raise InsufficientPositionError(f"no open position {position_id}") from None

    # ---- Aggregates ----

    @property
    def liability(self) -> float:
        """Incrementally maintained L: borrow PV minus loan PV."""
        return self._liability

    @property
    def rows(self) -> int:
        """Rows in use, closed ones awaiting compaction included."""
        return self._count

    def __len__(self) -> int:
        return len(self._rows)

    def __contains__(self, position_id: int) -> bool:
        return position_id in self._rows

    def _side_mask(self, side: Side) -> np.ndarray:
        n = self._count
        return self._is_open[:n] & (self._side[:n] == side)

    def collateral_held(self) -> float:
        """Collateral escrowed against open borrows."""
        return float(np.sum(self._collateral[: self._count][self._side_mask(Side.BORROW)]))

    def outstanding_disbursed(self) -> float:
        """Cash disbursed to borrowers on open borrows."""
        return float(np.sum(self._disbursed[: self._count][self._side_mask(Side.BORROW)]))

    def side_present_value(self, side: Side) -> float:
        """Accrued present value of every open position on one side."""
        return float(np.sum(self._pv[: self._count][self._side_mask(side)]))

    def revalue(self) -> float:
        """Full revaluation of L from face, locked rate and remaining tenor."""
        n = self._count
        remaining = np.maximum(self._maturity[:n] - self.clock, 0.0)
        pv = self._face[:n] * np.exp(-self._rate[:n] * remaining)
        return float(np.sum(self._side[:n] * pv * self._is_open[:n]))

    def check(self) -> float:
        """Compare incremental L with a full revaluation; return the revalued L."""
        revalued = self.revalue()
        scale = max(abs(revalued), self.side_present_value(Side.LOAN), 1.0)
        if abs(self._liability - revalued) > LEDGER_RTOL * scale:
            raise InvariantViolationError(
                f"ledger drift: incremental L={self._liability!r}, revalued L={revalued!r}"
            )
        return revalued

    # ---- Positions ----

    def open(
        self,
        side: Side,
        face: float,
        maturity: float,
        locked_rate: float,
        present_value: float,
        disbursed: float = 0.0,
    ) -> int:
        """Record a new position and return its id."""
        if face <= 0.0:
            raise DomainError(f"position face must be positive, got {face}")
        if maturity <= self.clock:
            raise DomainError(
                f"maturity {maturity} must lie after the clock {self.clock}"
            )
        if self._count == self._capacity:
            _LOGGER.debug("Growing ledger to %s rows", self._capacity * 2)
            self._allocate(self._capacity * 2)

        position_id = self._next_id
        row = self._count
        self._id[row] = position_id
        self._side[row] = side
        self._is_open[row] = True
        self._face[row] = face
        self._maturity[row] = maturity
        self._rate[row] = locked_rate
        self._pv[row] = present_value
        if side == Side.BORROW:
            self._disbursed[row] = disbursed
            self._collateral[row] = COLLATERAL_RATIO * disbursed
        self._rows[position_id] = row
        self._next_id += 1
        self._count += 1
        self._liability += int(side) * present_value
        return position_id

    def position(self, position_id: int) -> Position:
        """Return a snapshot of an open position."""
        row = self._row(position_id)
        return Position(
            id=position_id,
            side=Side(int(self._side[row])),
            face=float(self._face[row]),
            maturity=float(self._maturity[row]),
            locked_rate=float(self._rate[row]),
            present_value=float(self._pv[row]),
            disbursed=float(self._disbursed[row]),
            collateral=float(self._collateral[row]),
        )

    def open_ids(self) -> list[int]:
        """Ids of every open position."""
        return self._id[: self._count][self._is_open[: self._count]].tolist()

    def due(self) -> list[int]:
        """Ids of open positions whose maturity has been reached, earliest first."""
        n = self._count
        rows = np.flatnonzero(self._is_open[:n] & (self._maturity[:n] <= self.clock))
        if rows.size > 1:
            rows = rows[np.argsort(self._maturity[rows], kind="stable")]
        return self._id[rows].tolist()

    def reduce(self, position_id: int, face: float) -> tuple[float, float]:
        """Take `face` off a position pro rata.

        Returns the present value and collateral released.
        """
        current = self.position(position_id)
        if face > current.face * (1.0 + 1e-12):
            raise InsufficientPositionError(
                f"position {position_id} holds face {current.face}, asked for {face}"
            )
        fraction = min(face / current.face, 1.0)
        if fraction >= _CLOSE_FRACTION:
            return self.close(position_id)

        row = self._rows[position_id]
        pv_released = current.present_value * fraction
        collateral_released = current.collateral * fraction
        keep = 1.0 - fraction
        self._face[row] *= keep
        self._pv[row] *= keep
        self._disbursed[row] *= keep
        self._collateral[row] *= keep
        self._liability -= int(current.side) * pv_released
        return pv_released, collateral_released

    def close(self, position_id: int) -> tuple[float, float]:
        """Remove a position entirely; returns its present value and collateral."""
        current = self.position(position_id)
        row = self._rows.pop(position_id)
        self._is_open[row] = False
        self._face[row] = 0.0
        self._pv[row] = 0.0
        self._disbursed[row] = 0.0
        self._collateral[row] = 0.0
        self._liability -= int(current.side) * current.present_value
        if self._count - len(self._rows) > max(self._count // 2, _INITIAL_CAPACITY // 2):
            self._compact()
        return current.present_value, current.collateral

    # ---- Time ----

    def advance(self, dt: float) -> float:
        """Accrue every open position at its locked rate up to its maturity.

        Returns the change in L.
        """
        if dt < 0.0 or not math.isfinite(dt):
            raise DomainError(f"time step must be nonnegative, got {dt}")
        old_clock = self.clock
        new_clock = old_clock + dt
        self.clock = new_clock
        n = self._count
        if dt == 0.0 or not self._rows:
            return 0.0

        elapsed = np.clip(np.minimum(self._maturity[:n], new_clock) - old_clock, 0.0, None)
        pv = self._pv[:n]
        accrued = pv * np.expm1(self._rate[:n] * elapsed)
        pv += accrued
        delta = float(np.dot(self._side[:n], accrued))
        self._liability += delta
        return delta

    def mark_to_curve(self, curve_rate) -> float:
        """Signed present value of open positions discounted on a rate curve.

        `curve_rate` maps an array of remaining tenors to marginal rates.
        """
        rows = np.flatnonzero(self._is_open[: self._count])
        if rows.size == 0:
            return 0.0
        remaining = np.maximum(self._maturity[rows] - self.clock, 0.0)
        pv = self._face[rows] * np.exp(-curve_rate(remaining) * remaining)
        return float(np.dot(self._side[rows], pv))
