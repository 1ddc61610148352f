"""
Data behind every figure, written as a CSV bundle with fixed file names.

Rendering is left to whatever plotting tool reads the bundle.
"""

import argparse
import logging
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from metric_estimands import curves, estimands, exposure, power, reporting, simulator
from metric_estimands.config import settings
from metric_estimands.commands import reject_grid
from metric_estimands.exceptions import EstimandsError
from metric_estimands.metrics import Cumulative, CumulativeWindowed, Windowed

logger = logging.getLogger(__name__)

ESTIMAND_RATES = (0.1, 0.4, 1.0)
NAMED_CURVES = {"fast": curves.FAST_DECAY, "slow": curves.SLOW_RESPONSE}
TWO_BATCH_C = 0.05
TWO_BATCH_SIGMA2 = 2.0


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "figures", parents=parents, help="Regenerate the figure CSV bundle"
    )
    parser.add_argument(
        "--full-fidelity",
        action="store_true",
        help="Simulate the power figures with the full replication count",
    )
    parser.set_defaults(handler=cmd_figures)


def _fine_grid(step: float = 0.1, stop: float = 21.0) -> np.ndarray:
    return np.round(np.arange(0.0, stop + step / 2, step), 10)


def effects_frame() -> pd.DataFrame:
    """delta and Delta of the fast-decaying example curve"""
    t = _fine_grid()
    return pd.DataFrame(
        {
            "t": t,
            "incremental": curves.incremental(curves.FAST_DECAY, t),
            "cumulative": curves.cumulative(curves.FAST_DECAY, t),
        }
    )


def curves_frame() -> pd.DataFrame:
    """
    Exposure laws and effect curves over the first three weeks.

    Effect rows hold delta and Delta; exposure rows hold the density and CDF
    of Exp(rate) for each rate in ESTIMAND_RATES.
    """
    t = _fine_grid()
    frames = []
    for rate in ESTIMAND_RATES:
        dist = exposure.Exponential(rate=rate)
        frames.append(
            pd.DataFrame(
                {
                    "t": t,
                    "family": "exposure",
                    "curve": f"exponential_{rate:g}",
                    "density": exposure.pdf(dist, t),
                    "cumulative": exposure.cdf(dist, t),
                }
            )
        )
    frames.extend(
        pd.DataFrame(
            {
                "t": t,
                "family": "effect",
                "curve": name,
                "density": curves.incremental(curve, t),
                "cumulative": curves.cumulative(curve, t),
            }
        )
        for name, curve in NAMED_CURVES.items()
    )
    return pd.concat(frames, ignore_index=True)


def estimands_frame(nu: float = 7.0) -> pd.DataFrame:
    """Estimands of all strategies for each exposure rate and effect curve"""
    grid = _fine_grid(step=0.5)
    rows: List[Dict] = []
    for rate in ESTIMAND_RATES:
        dist = exposure.Exponential(rate=rate)
        for name, curve in NAMED_CURVES.items():
            for strategy in (Cumulative(), CumulativeWindowed(nu=nu), Windowed(nu=nu)):
                result = estimands.estimand_curve(
                    curve, dist, strategy.strategy_kind, strategy.window, grid
                )
                rows.extend(
                    {
                        "rate": rate,
                        "curve": name,
                        "t": t,
                        "strategy": strategy.kind,
                        "nu": strategy.window,
                        "value": value,
                        "defined": value is not None,
                    }
                    for t, value in zip(result.times, result.values)
                )
    return pd.DataFrame(rows)


def expected_z_frame() -> pd.DataFrame:
    """E(Z_t) for the two-batch example by quadrature and in closed form"""
    scenario = simulator.builtin_example2().analytic()
    rows = []
    for t in _fine_grid():
        row = {
            "t": t,
            "expected_z": None,
            "closed_form": power.example2_expected_z(TWO_BATCH_C, TWO_BATCH_SIGMA2, t),
            "variance": power.example2_variance(TWO_BATCH_C, TWO_BATCH_SIGMA2, t),
        }
        try:
            row["expected_z"] = power.expected_z(scenario, t)
        except EstimandsError as exc:
            logger.debug(f"Quadrature E(Z) undefined at t={t}: {exc}")
        rows.append(row)
    return pd.DataFrame(rows)


def power_frame(scenario: simulator.Scenario) -> pd.DataFrame:
    return simulator.power_curve(scenario).to_frame()


def cmd_figures(args: argparse.Namespace) -> Path:
    reject_grid(args, "figures")
    out_dir = Path(args.out) if args.out is not None else Path(settings.output_dir)
    replications = args.reps or (
        settings.full_replications if args.full_fidelity else settings.desk_replications
    )
    seed = settings.default_seed if args.seed is None else args.seed
    logger.info(f"Regenerating figure data into {out_dir} with {replications} replications")

    power_scenarios = {
        "fig4_power_dgp1.csv": simulator.builtin_dgp1(replications),
        "fig5_power_dgp2.csv": simulator.builtin_dgp2(replications),
    }
    bundle: List[Tuple[str, pd.DataFrame, Tuple[str, ...]]] = [
        ("fig1_effects.csv", effects_frame(), ("t", "incremental", "cumulative")),
        (
            "fig2_curves.csv",
            curves_frame(),
            ("t", "family", "curve", "density", "cumulative"),
        ),
        (
            "fig3_estimands.csv",
            estimands_frame(),
            ("rate", "curve") + reporting.ESTIMAND_COLUMNS,
        ),
    ]
    for name, scenario in power_scenarios.items():
        bundle.append(
            (
                name,
                power_frame(scenario.model_copy(update={"seed": seed})),
                reporting.SIMULATION_COLUMNS + reporting.MEAN_Z_COLUMNS,
            )
        )
    bundle.append(
        ("fig6_expected_z.csv", expected_z_frame(), ("t", "expected_z", "closed_form", "variance"))
    )

    for name, frame, columns in bundle:
        reporting.write_csv(frame, out_dir / name, columns)
    return out_dir
