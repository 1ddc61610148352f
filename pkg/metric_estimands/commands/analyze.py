import argparse
import logging
from pathlib import Path

import numpy as np

from metric_estimands import reporting
from metric_estimands.commands import output_path, scenario_from_args
from metric_estimands.exceptions import DomainError
from metric_estimands.metrics import analyze_panel, read_panel_csv, strategy_from_label
from metric_estimands.models import VarianceMode, ZConvention
from metric_estimands.schemas import parse_grid

logger = logging.getLogger(__name__)

DEFAULT_STRATEGIES = ["cumulative", "cumulative_windowed_7", "windowed_7"]


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "analyze", parents=parents, help="Difference-in-means tests on a recorded panel"
    )
    parser.add_argument("--panel", type=Path, required=True, help="Long-format panel CSV")
    parser.add_argument("--strategies", nargs="+", default=DEFAULT_STRATEGIES)
    parser.add_argument(
        "--variance-mode",
        choices=[mode.value for mode in VarianceMode],
        default=VarianceMode.ESTIMATED.value,
        help="known needs --config/--builtin for the variance model",
    )
    parser.add_argument(
        "--z-convention",
        choices=[convention.value for convention in ZConvention],
        default=ZConvention.STANDARD_DEVIATION.value,
    )
    parser.set_defaults(handler=cmd_analyze)


def cmd_analyze(args: argparse.Namespace) -> Path:
    panel = read_panel_csv(args.panel)
    mode = VarianceMode(args.variance_mode)

    config = None
    if args.config is not None or args.builtin is not None:
        config = scenario_from_args(args)
    if mode == VarianceMode.KNOWN and config is None:
        raise DomainError("Known-variance analysis needs --config or --builtin")

    days = parse_grid(args.grid) if args.grid else np.arange(1, panel.horizon + 1, dtype=float)
    frame = analyze_panel(
        panel,
        [strategy_from_label(label) for label in args.strategies],
        days,
        variance_mode=mode,
        scenario=None if config is None else config.analytic(),
        convention=ZConvention(args.z_convention),
    )
    return reporting.write_csv(
        frame, output_path(args, config, "analysis.csv"), reporting.ANALYSIS_COLUMNS
    )
