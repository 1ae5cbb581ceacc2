"""CSV and JSON writers for simulation output."""

from __future__ import annotations

import csv
import json
import logging
import platform
import subprocess
from dataclasses import astuple
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .const import (
    DIAGNOSTICS_COLUMNS,
    DIAGNOSTICS_FILE,
    FLOAT_FORMAT,
    MARKET_FILE,
    METADATA_FILE,
    METRICS_COLUMNS,
    METRICS_FILE,
    RNG_IDENTIFIER,
)
from .sim import SimResult

_LOGGER = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    """Render a cell with full round-trip precision."""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, FLOAT_FORMAT)
    return str(value)


def write_rows(path: Path, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """Write a header and rows as CSV."""
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(value) for value in row])


def build_identifier() -> str:
    """Short git revision of the source tree, or the package version."""
    try:
        revision = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            check=True,
            timeout=5,
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        return f"v{__version__}"
    return f"v{__version__}-g{revision}" if revision else f"v{__version__}"


def write_result(result: SimResult, out_dir: Path, elapsed: float | None = None) -> Path:
    """Write metrics, diagnostics, market path and metadata into `out_dir`."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    write_rows(out_dir / METRICS_FILE, METRICS_COLUMNS, (astuple(m) for m in result.metrics))
    write_rows(
        out_dir / DIAGNOSTICS_FILE,
        DIAGNOSTICS_COLUMNS,
        (astuple(d) for d in result.diagnostics),
    )
    result.path.to_csv(out_dir / MARKET_FILE)

    rate_diff = np.array([m.rate_diff for m in result.metrics])
    metadata = {
        "config": result.config.as_dict(),
        "seed": result.config.seed,
        "rng": RNG_IDENTIFIER,
        "build": build_identifier(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "elapsed_seconds": elapsed,
        "final_state": result.final.to_record(),
        "summary": {
            "mean_abs_rate_diff": float(np.nanmean(np.abs(rate_diff)))
            if np.any(np.isfinite(rate_diff))
            else None,
            "halt_skipped": result.halt_skipped,
            "rejected": result.rejected,
            "settled": result.settled,
        },
    }
    (out_dir / METADATA_FILE).write_text(
        json.dumps(metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _LOGGER.info("Wrote %s rows to %s", len(result.metrics), out_dir)
    return out_dir / METRICS_FILE
