"""Experiment configuration files."""

from __future__ import annotations

import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any

import voluptuous as vol

from .const import (
    CONF_CIR,
    CONF_CIR_K,
    CONF_CIR_R_INIT,
    CONF_CIR_SIGMA,
    CONF_CIR_THETA,
    CONF_EQUITY_BASIS,
    CONF_HALT_THRESHOLD,
    CONF_HORIZON,
    CONF_KAPPA,
    CONF_LEDGER_CHECK_INTERVAL,
    CONF_MATURITY_SPREAD,
    CONF_N_STEPS,
    CONF_R0,
    CONF_SEED,
    CONF_SIZE_DENOMINATION,
    CONF_SIZE_MEAN,
    CONF_SIZE_VAR,
    CONF_TRADES_PER_STEP,
    CONF_Y0,
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
    SCALE_PRESETS,
    Denomination,
    EquityBasis,
    MaturitySpread,
    Scale,
)
from .exceptions import BondMMError, ConfigError
from .market import CirParams
from .sim import SimConfig

_LOGGER = logging.getLogger(__name__)

_Real = vol.Coerce(float)
_Positive = vol.All(_Real, vol.Range(min=0, min_included=False))
_NonNegative = vol.All(_Real, vol.Range(min=0))
_Fraction = vol.All(_Real, vol.Range(min=0, max=1, min_included=False, max_included=False))

CIR_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_CIR_K, default=DEFAULT_CIR_K): _Positive,
        vol.Optional(CONF_CIR_THETA, default=DEFAULT_CIR_THETA): _NonNegative,
        vol.Optional(CONF_CIR_SIGMA, default=DEFAULT_CIR_SIGMA): _NonNegative,
        # Missing r_init falls back to r0
        vol.Optional(CONF_CIR_R_INIT): _NonNegative,
    }
)

SIM_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_Y0, default=DEFAULT_Y0): _Positive,
        vol.Optional(CONF_R0, default=DEFAULT_R0): _NonNegative,
        vol.Optional(CONF_KAPPA, default=DEFAULT_KAPPA): _Fraction,
        vol.Optional(CONF_CIR, default=dict): CIR_SCHEMA,
        vol.Optional(CONF_HORIZON, default=DEFAULT_HORIZON): _Positive,
        vol.Optional(CONF_N_STEPS, default=SCALE_PRESETS[Scale.DESK][0]): vol.All(
            int, vol.Range(min=1)
        ),
        vol.Optional(
            CONF_TRADES_PER_STEP, default=SCALE_PRESETS[Scale.DESK][1]
        ): vol.All(int, vol.Range(min=0)),
        vol.Optional(CONF_SIZE_MEAN, default=DEFAULT_SIZE_MEAN): _Real,
        vol.Optional(CONF_SIZE_VAR, default=DEFAULT_SIZE_VAR): _NonNegative,
        vol.Optional(CONF_HALT_THRESHOLD, default=DEFAULT_HALT_THRESHOLD): _Fraction,
        vol.Optional(CONF_SEED, default=DEFAULT_SEED): vol.All(int, vol.Range(min=0)),
        vol.Optional(CONF_MATURITY_SPREAD, default=str(MaturitySpread.VARIANCE)): vol.All(
            vol.In([str(item) for item in MaturitySpread]), MaturitySpread
        ),
        vol.Optional(
            CONF_SIZE_DENOMINATION, default=str(Denomination.CASH)
        ): vol.All(vol.In([str(item) for item in Denomination]), Denomination),
        vol.Optional(
            CONF_LEDGER_CHECK_INTERVAL, default=DEFAULT_LEDGER_CHECK_INTERVAL
        ): vol.All(int, vol.Range(min=0)),
        vol.Optional(CONF_EQUITY_BASIS, default=str(DEFAULT_EQUITY_BASIS)): vol.All(
            vol.In([str(item) for item in EquityBasis]), EquityBasis
        ),
    },
    extra=vol.PREVENT_EXTRA,
)


def build_config(data: dict[str, Any]) -> SimConfig:
    """Validate a raw mapping and turn it into a SimConfig."""
    try:
        validated = SIM_SCHEMA(data)
    except vol.Invalid as err:
        raise ConfigError(f"invalid configuration: {err}") from err

    cir = dict(validated.pop(CONF_CIR))
    cir.setdefault(CONF_CIR_R_INIT, validated[CONF_R0])
    try:
        return SimConfig(cir=CirParams(**cir), **validated)
    except BondMMError as err:
        raise ConfigError(f"invalid configuration: {err}") from err


def load_config(path: str | Path) -> SimConfig:
    """Read and validate a TOML experiment file."""
    path = Path(path)
    try:
        with path.open("rb") as handle:
            data = tomllib.load(handle)
    except FileNotFoundError as err:
        raise ConfigError(f"config file not found: {path}") from err
    except (OSError, tomllib.TOMLDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    _LOGGER.debug("Loaded config %s: %s", path, data)
    return build_config(data)
