import argparse
import logging
from pathlib import Path

import pandas as pd

from metric_estimands import estimands, reporting
from metric_estimands.commands import grid_from_args, output_path, scenario_from_args
from metric_estimands.metrics import strategy_from_label

logger = logging.getLogger(__name__)


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "estimands",
        parents=parents,
        help="Estimand curves of each measurement strategy over a time grid",
    )
    parser.add_argument(
        "--strategies",
        nargs="+",
        default=None,
        help="Strategy labels such as cumulative windowed_7 cumulative_windowed_7 (default: config)",
    )
    parser.set_defaults(handler=cmd_estimands)


def cmd_estimands(args: argparse.Namespace) -> Path:
    """
    Write t,strategy,nu,value,defined for every requested strategy

    - **value**: blank where the estimand is undefined (no exposed users, or a
      windowed metric before its window has elapsed)
    """
    config = scenario_from_args(args)
    grid = grid_from_args(args, config)
    strategies = (
        [strategy_from_label(label) for label in args.strategies]
        if args.strategies
        else config.strategies
    )

    rows = []
    for strategy in strategies:
        result = estimands.estimand_curve(
            config.curve, config.exposure, strategy.strategy_kind, strategy.window, grid
        )
        for t, value in zip(result.times, result.values):
            rows.append(
                {
                    "t": t,
                    "strategy": strategy.kind,
                    "nu": strategy.window,
                    "value": value,
                    "defined": value is not None,
                }
            )

    frame = pd.DataFrame(rows, columns=list(reporting.ESTIMAND_COLUMNS))
    return reporting.write_csv(
        frame, output_path(args, config, "estimands.csv"), reporting.ESTIMAND_COLUMNS
    )
