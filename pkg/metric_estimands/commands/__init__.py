"""
Subcommands. Each module exposes `register(subparsers, parents)` and handlers
that return the path they wrote.
"""

import argparse
import logging
from pathlib import Path
from typing import List, Optional

import numpy as np

from metric_estimands.config import settings
from metric_estimands.exceptions import DomainError
from metric_estimands.schemas import ScenarioConfig, load_config, parse_grid

logger = logging.getLogger(__name__)


def common_parser() -> argparse.ArgumentParser:
    """Flags every subcommand accepts"""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", type=Path, default=None, help="Scenario JSON file")
    parser.add_argument(
        "--builtin", default=None, help="Built-in scenario: dgp1, dgp2, example2 or fig3"
    )
    parser.add_argument("--seed", type=int, default=None, help="Master random seed (unsigned 64-bit)")
    parser.add_argument("--reps", type=int, default=None, help="Monte Carlo replications")
    parser.add_argument("--out", type=Path, default=None, help="Output file (directory for figures)")
    parser.add_argument("--grid", default=None, help="Analysis times as start:stop:step, inclusive")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a config value by dotted path; VALUE is parsed as JSON when possible",
    )
    parser.add_argument(
        "--log-level",
        default=None,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help=f"Logging verbosity (default {settings.log_level})",
    )
    return parser


def scenario_from_args(args: argparse.Namespace) -> ScenarioConfig:
    """Config file or built-in, then --set overrides, then --seed and --reps"""
    overrides: List[str] = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.reps is not None:
        overrides.append(f"replications={args.reps}")
    return load_config(
        path=args.config,
        builtin=args.builtin,
        overrides=overrides,
        full_fidelity=getattr(args, "full_fidelity", False),
    )


def grid_from_args(args: argparse.Namespace, config: Optional[ScenarioConfig]) -> np.ndarray:
    if args.grid:
        return parse_grid(args.grid)
    if config is None:
        raise DomainError("No analysis grid: pass --grid")
    return config.grid()


def reject_grid(args: argparse.Namespace, command: str) -> None:
    """Simulations always analyse days 1..horizon_days"""
    if args.grid:
        raise DomainError(
            f"{command} analyses every day from 1 to horizon_days; --grid does not apply",
            diagnostics={"grid": args.grid},
        )


def output_path(
    args: argparse.Namespace, config: Optional[ScenarioConfig], default_name: str
) -> Path:
    if args.out is not None:
        return Path(args.out)
    if config is not None and config.output.path:
        return Path(config.output.path)
    return Path(settings.output_dir) / default_name


def register_all(subparsers) -> None:
    from metric_estimands.commands import analytic, analyze, estimands, figures, simulate

    parents = [common_parser()]
    for module in (estimands, analytic, simulate, figures, analyze):
        module.register(subparsers, parents)
