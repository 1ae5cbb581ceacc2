"""Command line front door: simulate, quote and curve."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import colorlog

from . import __version__, export, invariant, ratemath, sim
from .config import load_config
from .const import (
    CURVE_COLUMNS,
    DOMAIN,
    FLOAT_FORMAT,
    Denomination,
    ExitCode,
    Scale,
    TradeKind,
)
from .exceptions import (
    BondValueExhaustedError,
    ConfigError,
    DomainError,
    RejectedTradeError,
    SettlementError,
)
from .invariant import Anchor, CoreState, CurveParams
from .pool import price

_LOGGER = logging.getLogger(__name__)

LOG_FORMAT = "%(log_color)s%(levelname)-8s%(reset)s %(name)s: %(message)s"


@dataclass(frozen=True)
class RunManifest:
    """What `simulate` was asked to do."""

    config_path: Path | None
    out_dir: Path
    seeds: tuple[int, ...] = ()
    scale: Scale | None = None


def setup_logging(level: int) -> None:
    """Attach a colored stream handler to the package logger."""
    handler = colorlog.StreamHandler(sys.stderr)
    handler.setFormatter(colorlog.ColoredFormatter(LOG_FORMAT))
    logger = logging.getLogger(DOMAIN)
    logger.handlers[:] = [handler]
    logger.setLevel(level)


def _seed_list(text: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"invalid seed list: {text!r}") from err
    if not seeds:
        raise argparse.ArgumentTypeError("seed list is empty")
    return seeds


def _anchor(text: str) -> Anchor:
    try:
        return Anchor.parse(text)
    except DomainError as err:
        raise argparse.ArgumentTypeError(str(err)) from err


def build_parser() -> argparse.ArgumentParser:
    """Argument parser for every command."""
    parser = argparse.ArgumentParser(
        prog=DOMAIN, description="BondMM-A fixed-income AMM engine and simulator"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    commands = parser.add_subparsers(dest="command", required=True)

    # ---- simulate ----
    simulate = commands.add_parser("simulate", help="run the market experiment")
    simulate.add_argument("--config", type=Path, help="TOML experiment file")
    simulate.add_argument("--out", type=Path, required=True, help="output directory")
    simulate.add_argument("--scale", choices=[str(s) for s in Scale], help="size preset")
    seeds = simulate.add_mutually_exclusive_group()
    seeds.add_argument("--seed", type=int, help="override the configured seed")
    seeds.add_argument(
        "--seeds", type=_seed_list, help="comma separated seeds run concurrently"
    )

    # ---- quote ----
    quote = commands.add_parser("quote", help="price one trade")
    _add_state_arguments(quote)
    quote.add_argument("--r-star", type=float, required=True, help="anchor rate")
    quote.add_argument("--tenor", type=float, required=True, help="years to maturity")
    quote.add_argument("--kind", choices=[str(k) for k in TradeKind], required=True)
    quote.add_argument("--size", type=float, required=True)
    quote.add_argument(
        "--denomination",
        choices=[str(d) for d in Denomination],
        default=str(Denomination.CASH),
    )

    # ---- curve ----
    curve = commands.add_parser("curve", help="print the rate curve")
    _add_state_arguments(curve)
    curve.add_argument(
        "--anchor", type=_anchor, required=True, help='polynomial r*(t), e.g. "0.04,0.01"'
    )
    curve.add_argument("--t-min", type=float, default=0.0)
    curve.add_argument("--t-max", type=float, required=True)
    curve.add_argument("--n-points", type=int, default=11)
    return parser


def _add_state_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--X", dest="X", type=float, required=True, help="bond present value")
    parser.add_argument("--y", dest="y", type=float, required=True, help="cash")
    parser.add_argument("--kappa", type=float, required=True)


# ---- Commands ----


def _simulate_to(config: sim.SimConfig, out_dir: Path) -> ExitCode:
    """Run one seed into one directory."""
    started = time.perf_counter()
    try:
        result = sim.run(config)
    except SettlementError as err:
        _LOGGER.error("Seed %s aborted: %s", config.seed, err)
        if isinstance(err, BondValueExhaustedError):
            return ExitCode.BOND_VALUE_EXHAUSTED
        return ExitCode.INSOLVENT
    export.write_result(result, out_dir, elapsed=time.perf_counter() - started)
    return ExitCode.OK


def cmd_simulate(manifest: RunManifest) -> ExitCode:
    """Load the config, run every requested seed and write the outputs."""
    try:
        config = (
            load_config(manifest.config_path)
            if manifest.config_path is not None
            else sim.SimConfig()
        )
    except ConfigError as err:
        _LOGGER.error("%s", err)
        return ExitCode.USAGE
    if manifest.scale is not None:
        config = config.with_scale(manifest.scale)
    if manifest.scale == Scale.PAPER:
        _LOGGER.warning(
            "Paper scale executes %s trades; expect a run of many hours",
            config.n_steps * config.trades_per_step,
        )

    if len(manifest.seeds) <= 1:
        if manifest.seeds:
            config = replace(config, seed=manifest.seeds[0])
        return _simulate_to(config, manifest.out_dir)

    jobs = {
        seed: (replace(config, seed=seed), manifest.out_dir / f"seed-{seed}")
        for seed in manifest.seeds
    }
    workers = min(len(jobs), os.cpu_count() or 1)
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = {
            seed: executor.submit(_simulate_to, job_config, out_dir)
            for seed, (job_config, out_dir) in jobs.items()
        }
        codes = {seed: future.result() for seed, future in futures.items()}
    return max(codes.values(), default=ExitCode.OK)


def cmd_quote(
    X: float,
    y: float,
    kappa: float,
    r_star: float,
    tenor: float,
    kind: TradeKind,
    size: float,
    denomination: Denomination = Denomination.CASH,
) -> ExitCode:
    """Print one quote as a JSON object."""
    try:
        core = CoreState(X=X, y=y)
        params = CurveParams(kappa=kappa, anchor=Anchor.constant(r_star))
        quote = price(core, params, kind, tenor, size, denomination)
    except RejectedTradeError as err:
        print(f"rejected: {err}", file=sys.stderr)
        return ExitCode.REJECTED
    except DomainError as err:
        print(f"invalid input: {err}", file=sys.stderr)
        return ExitCode.USAGE
    print(json.dumps(quote.as_dict()))
    return ExitCode.OK


def cmd_curve(
    X: float,
    y: float,
    kappa: float,
    anchor: Anchor,
    t_min: float,
    t_max: float,
    n_points: int,
) -> ExitCode:
    """Print (tenor, rate, price) rows over an even tenor grid."""
    if t_min < 0 or n_points < 2 or t_max < t_min:
        print(
            f"invalid grid: t_min={t_min}, t_max={t_max}, n_points={n_points}",
            file=sys.stderr,
        )
        return ExitCode.USAGE
    try:
        core = CoreState(X=X, y=y)
        params = CurveParams(kappa=kappa, anchor=anchor)
        step = (t_max - t_min) / (n_points - 1)
        rows = []
        for i in range(n_points):
            tenor = t_min + i * step
            rate = invariant.rate(core, tenor, params)
            rows.append((tenor, rate, ratemath.discount(rate, tenor)))
    except DomainError as err:
        print(f"invalid input: {err}", file=sys.stderr)
        return ExitCode.USAGE

    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(CURVE_COLUMNS)
    for row in rows:
        writer.writerow([format(value, FLOAT_FORMAT) for value in row])
    return ExitCode.OK


def main(argv: Sequence[str] | None = None) -> int:
    """Parse arguments and dispatch."""
    args = build_parser().parse_args(argv)
    setup_logging(
        logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    )

    if args.command == "simulate":
        manifest = RunManifest(
            config_path=args.config,
            out_dir=args.out,
            seeds=args.seeds or ((args.seed,) if args.seed is not None else ()),
            scale=Scale(args.scale) if args.scale else None,
        )
        return int(cmd_simulate(manifest))
    if args.command == "quote":
        return int(
            cmd_quote(
                args.X,
                args.y,
                args.kappa,
                args.r_star,
                args.tenor,
                TradeKind(args.kind),
                args.size,
                Denomination(args.denomination),
            )
        )
    return int(
        cmd_curve(
            args.X, args.y, args.kappa, args.anchor, args.t_min, args.t_max, args.n_points
        )
    )
