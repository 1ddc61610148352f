import argparse
import logging
from pathlib import Path

from metric_estimands import reporting, simulator
from metric_estimands.commands import output_path, reject_grid, scenario_from_args
from metric_estimands.metrics import write_panel_csv

logger = logging.getLogger(__name__)


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "simulate", parents=parents, help="Monte Carlo power curves for a scenario"
    )
    parser.add_argument(
        "--full-fidelity",
        action="store_true",
        help="Use the full replication count for built-in scenarios instead of the desk scale",
    )
    parser.add_argument("--workers", type=int, default=None, help="Worker processes for replications")
    parser.add_argument(
        "--export-panel",
        type=Path,
        default=None,
        help="Also write the first replication's panel as user_id,w,e,day,increment",
    )
    parser.add_argument(
        "--with-mean-z",
        action="store_true",
        help="Append replications_defined, mean_z and mean_z_se columns",
    )
    parser.set_defaults(handler=cmd_simulate)


def cmd_simulate(args: argparse.Namespace) -> Path:
    reject_grid(args, "simulate")
    config = scenario_from_args(args)

    if args.export_panel is not None:
        panel = simulator.simulate_panel(config, simulator.replication_rng(config.seed, 0))
        write_panel_csv(panel, args.export_panel)

    result = simulator.power_curve(config, workers=args.workers)
    columns = reporting.SIMULATION_COLUMNS
    if args.with_mean_z:
        columns = columns + reporting.MEAN_Z_COLUMNS
    return reporting.write_csv(
        result.to_frame(), output_path(args, config, f"power_{config.name}.csv"), columns
    )
