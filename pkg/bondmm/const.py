"""Constants for the BondMM-A engine and simulator."""

from __future__ import annotations

from enum import IntEnum

try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        """Backport of enum.StrEnum: str() and format() give the value."""

        __str__ = str.__str__
        __format__ = str.__format__

DOMAIN = "bondmm"

# Configuration keys (exact SimConfig field names)
CONF_Y0 = "y0"
CONF_R0 = "r0"
CONF_KAPPA = "kappa"
CONF_CIR = "cir"
CONF_HORIZON = "horizon"
CONF_N_STEPS = "n_steps"
CONF_TRADES_PER_STEP = "trades_per_step"
CONF_SIZE_MEAN = "size_mean"
CONF_SIZE_VAR = "size_var"
CONF_HALT_THRESHOLD = "halt_threshold"
CONF_SEED = "seed"
CONF_MATURITY_SPREAD = "maturity_spread"
CONF_SIZE_DENOMINATION = "size_denomination"
CONF_LEDGER_CHECK_INTERVAL = "ledger_check_interval"
CONF_EQUITY_BASIS = "equity_basis"

CONF_CIR_K = "k"
CONF_CIR_THETA = "theta"
CONF_CIR_SIGMA = "sigma"
CONF_CIR_R_INIT = "r_init"

# Experiment defaults
DEFAULT_Y0 = 1000.0
DEFAULT_R0 = 0.05
DEFAULT_KAPPA = 0.02
DEFAULT_CIR_K = 0.4
DEFAULT_CIR_THETA = 0.05
DEFAULT_CIR_SIGMA = 0.2
DEFAULT_HORIZON = 1.0
DEFAULT_SIZE_MEAN = 0.72
DEFAULT_SIZE_VAR = 1.0
DEFAULT_HALT_THRESHOLD = 0.99
DEFAULT_SEED = 42
DEFAULT_LEDGER_CHECK_INTERVAL = 1000

COLLATERAL_RATIO = 1.5
MIN_TRADE_SIZE = 1e-6

# Tolerances
ALGEBRAIC_RTOL = 1e-9
LEDGER_RTOL = 1e-6

RNG_IDENTIFIER = "numpy.random.PCG64"


class Scale(StrEnum):
    """Named experiment sizes."""

    DESK = "desk"
    PAPER = "paper"


# (n_steps, trades_per_step)
SCALE_PRESETS: dict[Scale, tuple[int, int]] = {
    Scale.DESK: (2000, 200),
    Scale.PAPER: (100_000, 1000),
}


class TradeKind(StrEnum):
    """User-facing pool operations."""

    LEND = "lend"
    WITHDRAW = "withdraw"
    BORROW = "borrow"
    REPAY = "repay"


class Side(IntEnum):
    """Position side; the value is the sign the position carries in L."""

    LOAN = -1
    BORROW = 1


class Denomination(StrEnum):
    """Whether a trade size is cash (Δy) or face (Δx)."""

    CASH = "cash"
    FACE = "face"


class MaturitySpread(StrEnum):
    """How the second parameter of the maturity distribution is read."""

    VARIANCE = "variance"
    STD = "std"


class EquityBasis(StrEnum):
    """How open positions enter the net equity E = y + L.

    POOL_RATE carries one L at the pool's short rate (d ln L = r dt) and
    books cash flows into it; LOCKED sums every position accrued at its own
    locked rate.
    """

    POOL_RATE = "pool_rate"
    LOCKED = "locked"


DEFAULT_EQUITY_BASIS = EquityBasis.POOL_RATE


class ExitCode(IntEnum):
    """Process exit status for the command line."""

    OK = 0
    USAGE = 2
    REJECTED = 3
    INSOLVENT = 4
    BOND_VALUE_EXHAUSTED = 5


METRICS_COLUMNS = (
    "step",
    "time_years",
    "market_rate",
    "mean_pool_rate",
    "rate_diff",
    "rate_std",
    "equity_minus_y0",
    "n_active_executed",
    "n_passive_settled",
    "halted",
)

DIAGNOSTICS_COLUMNS = (
    "step",
    "mean_marginal_rate",
    "marginal_rate_std",
    "curve_equity_minus_y0",
    "locked_equity_minus_y0",
    "collateral_held",
    "open_positions",
    "n_halt_skipped",
    "n_rejected",
)

MARKET_COLUMNS = ("step", "time_years", "rate")
CURVE_COLUMNS = ("tenor", "rate", "price")

METRICS_FILE = "metrics.csv"
DIAGNOSTICS_FILE = "diagnostics.csv"
MARKET_FILE = "market.csv"
METADATA_FILE = "metadata.json"

FLOAT_FORMAT = ".17g"
