"""Command-line driver: ingest, synth, sweep, stats.

Every failure prints one line ``fptrade-error: <category>: <message>`` to
stderr and exits non-zero.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from decimal import Decimal, InvalidOperation
from pathlib import Path

import numpy as np

from . import __version__
from .indicators import InsufficientHistory, VOLATILITY_MODES
from .market_data import (
    DEFAULT_TAU,
    GapPolicy,
    MarketDataError,
    PriceUniverse,
    SyntheticSpec,
    generate_synthetic,
    load_universe,
    write_universe,
)
from .pairgame import BP, FilterParams
from .report import binned_csv, format_table, write_report
from .sweep import GridSpec, cross_section, run_sweep

log = logging.getLogger("fptrade")

UNIVERSE_FILE = "universe.csv"


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


def threshold(text: str) -> float:
    """A fraction ('0.2') or a percent ('20%'), exact to 0.01 percent."""
    raw = text.strip()
    try:
        value = Decimal(raw[:-1]) / 100 if raw.endswith("%") else Decimal(raw)
    except InvalidOperation:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    bp = value * BP
    if bp != bp.to_integral_value():
        raise argparse.ArgumentTypeError(f"{text!r} is finer than 0.01 percent")
    return int(bp) / BP


def _add_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", type=Path, help="long-format CSV: date,ticker,adj_close")
    src.add_argument("--synthetic-spec", type=Path, help="JSON synthetic universe spec")
    p.add_argument("--seed", type=int, help="override the synthetic spec's seed")


def _add_out(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, help="output directory (fallback: $FPTRADE_OUT)")


def _add_filters(p: argparse.ArgumentParser) -> None:
    d = FilterParams()
    p.add_argument("--rho0", type=float, default=d.rho_0)
    p.add_argument("--sigma-min", type=float, default=d.sigma_min)
    p.add_argument("--sigma-max", type=float, default=d.sigma_max)
    p.add_argument("--tau", type=int, default=d.tau)
    p.add_argument("--tau-max", type=int, default=d.tau_max)
    p.add_argument("--volatility-mode", choices=VOLATILITY_MODES, default=d.volatility_mode)
    p.add_argument("--warm-up", type=int, help="leading days before evaluation (default 2*tau-2)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fptrade", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a price CSV and write the aligned cache")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--tau", type=int, default=DEFAULT_TAU)
    p.add_argument("--warm-up", type=int)
    p.add_argument("--max-missing", type=float, default=GapPolicy().max_missing_fraction)
    _add_out(p)

    p = sub.add_parser("synth", help="generate a synthetic universe CSV")
    p.add_argument("--synthetic-spec", type=Path, required=True)
    p.add_argument("--seed", type=int)
    _add_out(p)

    p = sub.add_parser("sweep", help="run the threshold sweep and write reports")
    _add_source(p)
    _add_filters(p)
    _add_out(p)
    p.add_argument("--theta", type=threshold, help="single starting threshold")
    p.add_argument("--epsilon", type=threshold, help="single profit-taking threshold")
    p.add_argument("--grid", choices=("default", "coarse", "fine"), default="default")
    p.add_argument("--workers", type=int, help="threads (default: all cores)")
    p.add_argument("--bin-width", type=int, default=1, help="histogram bin width in days")

    p = sub.add_parser("stats", help="correlation and volatility distributions on one day")
    _add_source(p)
    _add_filters(p)
    _add_out(p)
    p.add_argument("--day", type=int, default=0, help="evaluation day index")
    p.add_argument("--rho-bin", type=float, default=0.05)
    p.add_argument("--sigma-bin", type=float, default=0.005)
    return parser


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("FPTRADE_OUT")
    if not out:
        raise CliError("config", "no output directory: pass --out or set FPTRADE_OUT")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _synthetic(args, tau: int, warm_up: int | None) -> tuple[PriceUniverse, int]:
    try:
        raw = json.loads(Path(args.synthetic_spec).read_text())
    except FileNotFoundError:
        raise CliError("io", f"no such file: {args.synthetic_spec}") from None
    except json.JSONDecodeError as e:
        raise CliError("data", f"{args.synthetic_spec}: invalid JSON ({e})") from None
    if args.seed is not None:
        raw["seed"] = args.seed
    raw.setdefault("tau", tau)
    if warm_up is not None:
        raw["warm_up"] = warm_up
    try:
        spec = SyntheticSpec.from_dict(raw)
    except TypeError as e:
        raise CliError("data", f"{args.synthetic_spec}: {e}") from None
    return generate_synthetic(spec), spec.seed


def _universe(args) -> tuple[PriceUniverse, int | None]:
    tau, warm_up = args.tau, args.warm_up
    if args.synthetic_spec is not None:
        return _synthetic(args, tau, warm_up)
    if not Path(args.input).is_file():
        raise CliError("io", f"no such file: {args.input}")
    return load_universe(args.input, tau=tau, warm_up=warm_up), None


def _filters(args) -> FilterParams:
    return FilterParams(
        rho_0=args.rho0,
        sigma_min=args.sigma_min,
        sigma_max=args.sigma_max,
        tau=args.tau,
        tau_max=args.tau_max,
        volatility_mode=args.volatility_mode,
    )


def _summary(universe: PriceUniverse) -> str:
    days = universe.calendar.days
    lines = [
        f"tickers: {universe.n_tickers}",
        f"days: {universe.n_days} ({days[0].isoformat()} .. {days[-1].isoformat()})",
        f"warm-up days: {universe.warm_up}",
        f"evaluation days: {universe.evaluation_days} (from {days[universe.warm_up].isoformat()})",
        f"dropped: {', '.join(universe.dropped) if universe.dropped else 'none'}",
    ]
    return "\n".join(lines)


def cmd_ingest(args) -> int:
    if not Path(args.input).is_file():
        raise CliError("io", f"no such file: {args.input}")
    universe = load_universe(
        args.input, GapPolicy(args.max_missing), tau=args.tau, warm_up=args.warm_up
    )
    out = _out_dir(args)
    write_universe(universe, out / UNIVERSE_FILE)
    print(_summary(universe))
    return 0


def cmd_synth(args) -> int:
    universe, seed = _synthetic(args, DEFAULT_TAU, None)
    out = _out_dir(args)
    write_universe(universe, out / UNIVERSE_FILE)
    print(_summary(universe))
    print(f"seed: {seed}")
    return 0


def cmd_sweep(args) -> int:
    filters = _filters(args)
    if args.epsilon is not None and args.theta is None:
        raise CliError("config", "--epsilon requires --theta")
    try:
        if args.theta is not None and args.epsilon is not None:
            grid = GridSpec.single(args.theta, args.epsilon)
        elif args.theta is not None:
            grid = GridSpec.for_theta(args.theta)
        else:
            grid = GridSpec.named(args.grid)
    except ValueError as e:
        raise CliError("grid", str(e)) from None
    if args.workers is not None and args.workers < 1:
        raise CliError("config", "--workers must be at least 1")
    universe, seed = _universe(args)
    out = _out_dir(args)
    report = run_sweep(universe, filters, grid, args.workers, args.bin_width, seed)
    write_report(report, out)
    print(format_table(report.cells))
    return 0


def cmd_stats(args) -> int:
    filters = _filters(args)
    universe, _ = _universe(args)
    out = _out_dir(args)
    try:
        rho, sigma = cross_section(universe, filters, args.day)
    except ValueError as e:
        raise CliError("day", str(e)) from None
    rho_edges = np.linspace(-1.0, 1.0, int(round(2.0 / args.rho_bin)) + 1)
    top = max(float(sigma.max()) if sigma.size else 0.0, args.sigma_bin)
    n_sigma = int(np.ceil(top / args.sigma_bin - 1e-9)) + 1
    sigma_edges = np.arange(n_sigma + 1) * args.sigma_bin
    lines = ["bin_start,bin_width,count,kind"]
    lines += binned_csv(rho, rho_edges, "rho")
    lines += binned_csv(sigma, sigma_edges, "sigma")
    (out / "distributions.csv").write_text("\n".join(lines) + "\n")
    print(f"day {args.day}: {rho.size} pair correlations, {sigma.size} volatilities")
    if rho.size:
        print(f"rho mean {rho.mean():.4f}, median {np.median(rho):.4f}")
    if sigma.size:
        print(f"sigma mean {sigma.mean():.4f}, median {np.median(sigma):.4f}")
    return 0


COMMANDS = {"ingest": cmd_ingest, "synth": cmd_synth, "sweep": cmd_sweep, "stats": cmd_stats}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except CliError as e:
        category, message = e.category, str(e)
    except MarketDataError as e:
        category, message = "data", str(e)
    except InsufficientHistory as e:
        category, message = "history", str(e)
    except ValueError as e:
        category, message = "config", str(e)
    except OSError as e:
        category, message = "io", str(e)
    print(f"fptrade-error: {category}: {' '.join(message.split())}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
