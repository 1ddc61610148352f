"""Closed-form and quadrature power commands: expected-z, power-analytic, decompose"""

import argparse
import logging
from pathlib import Path

import pandas as pd

from metric_estimands import power, reporting
from metric_estimands.commands import grid_from_args, output_path, scenario_from_args
from metric_estimands.exceptions import DomainError, EstimandsError
from metric_estimands.models import Sidedness
from metric_estimands.schemas import ScenarioConfig

logger = logging.getLogger(__name__)


def _add_power_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--critical",
        type=float,
        default=None,
        help="Critical value c (default: from the config's alpha and sidedness)",
    )
    parser.add_argument(
        "--with-variance",
        action="store_true",
        help="Append variance and n_t columns",
    )


def register(subparsers, parents) -> None:
    expected = subparsers.add_parser(
        "expected-z", parents=parents, help="E(Z_t) of the cumulative metric over a time grid"
    )
    _add_power_flags(expected)
    expected.set_defaults(handler=cmd_expected_z)

    analytic = subparsers.add_parser(
        "power-analytic", parents=parents, help="Normal-approximation power over a time grid"
    )
    _add_power_flags(analytic)
    analytic.set_defaults(handler=cmd_power_analytic)

    decompose = subparsers.add_parser(
        "decompose", parents=parents, help="Three-term decomposition of the change in E(Z_t)"
    )
    decompose.add_argument("--t", dest="t", type=float, nargs="+", required=True)
    decompose.add_argument("--t-prime", dest="t_prime", type=float, nargs="+", required=True)
    decompose.set_defaults(handler=cmd_decompose)


def _power_table(args: argparse.Namespace, config: ScenarioConfig) -> pd.DataFrame:
    """One row per grid time: E(Z_t), its power and the Z convention"""
    scenario = config.analytic()
    critical = (
        args.critical
        if args.critical is not None
        else power.critical_value(config.alpha, config.sidedness)
    )
    power_at = (
        power.power_two_sided if config.sidedness == Sidedness.TWO else power.power_one_sided
    )
    logger.info(
        f"Analytic power with critical value {critical:.6g} ({config.z_convention.value})"
    )

    rows = []
    for t in grid_from_args(args, config):
        t = float(t)
        n1, n0 = power.exposed_counts(scenario, t)
        row = {
            "t": t,
            "expected_z": None,
            "power": None,
            "convention": config.z_convention.value,
            "variance": None,
            "n_t": n1 + n0,
        }
        try:
            row["variance"] = power.estimator_variance(scenario, t, n1, n0)
            row["expected_z"] = power.expected_z(scenario, t)
            row["power"] = power_at(row["expected_z"], critical)
        except EstimandsError as exc:
            logger.debug(f"E(Z) undefined at t={t}: {exc}")
        rows.append(row)
    return pd.DataFrame(rows, columns=list(reporting.POWER_COLUMNS + reporting.VARIANCE_COLUMNS))


def _write_power_table(args: argparse.Namespace, default_name: str) -> Path:
    config = scenario_from_args(args)
    columns = reporting.POWER_COLUMNS
    if args.with_variance:
        columns = columns + reporting.VARIANCE_COLUMNS
    return reporting.write_csv(
        _power_table(args, config), output_path(args, config, default_name), columns
    )


def cmd_expected_z(args: argparse.Namespace) -> Path:
    return _write_power_table(args, "expected_z.csv")


def cmd_power_analytic(args: argparse.Namespace) -> Path:
    return _write_power_table(args, "power_analytic.csv")


def cmd_decompose(args: argparse.Namespace) -> Path:
    if len(args.t) != len(args.t_prime):
        raise DomainError(
            "--t and --t-prime need the same number of values",
            diagnostics={"t": len(args.t), "t_prime": len(args.t_prime)},
        )
    config = scenario_from_args(args)
    scenario = config.analytic()

    rows = []
    for t, t_prime in zip(args.t, args.t_prime):
        terms = power.theorem2_decomposition(scenario, t, t_prime)
        rows.append(
            {
                "t": terms.t,
                "t_prime": terms.t_prime,
                "term1": terms.term_variance_reweight,
                "term2": terms.term_new_time_old_users,
                "term3": terms.term_new_users,
                "total": terms.total,
                "direct": terms.direct,
                "gap": terms.gap,
            }
        )
        logger.info(f"Decomposed ({t}, {t_prime}): gap {terms.gap:.3e}")
    frame = pd.DataFrame(rows, columns=list(reporting.DECOMPOSITION_COLUMNS))
    return reporting.write_csv(
        frame, output_path(args, config, "decomposition.csv"), reporting.DECOMPOSITION_COLUMNS
    )
