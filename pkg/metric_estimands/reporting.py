"""
CSV output shared by every command.

Files are written to a temporary sibling and renamed into place, so a reader
never sees a partial table.
"""

import contextlib
import logging
import os
import tempfile
from pathlib import Path
from typing import Sequence, Union

import pandas as pd

from metric_estimands.config import settings

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

ESTIMAND_COLUMNS = ("t", "strategy", "nu", "value", "defined")
POWER_COLUMNS = ("t", "expected_z", "power", "convention")
VARIANCE_COLUMNS = ("variance", "n_t")
DECOMPOSITION_COLUMNS = ("t", "t_prime", "term1", "term2", "term3", "total", "direct", "gap")
SIMULATION_COLUMNS = ("day", "strategy", "rejection_rate", "se", "defined")
MEAN_Z_COLUMNS = ("replications_defined", "mean_z", "mean_z_se")
ANALYSIS_COLUMNS = ("t", "strategy", "diff", "variance", "z", "n1", "n0")
PANEL_COLUMNS = ("user_id", "w", "e", "day", "increment")


def write_csv(frame: pd.DataFrame, path: PathLike, columns: Sequence[str]) -> Path:
    """Write `columns` of `frame` atomically; missing values become empty fields"""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    missing = [column for column in columns if column not in frame.columns]
    if missing:
        raise KeyError(f"Output table lacks columns: {missing}")

    fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            frame.to_csv(
                handle,
                columns=list(columns),
                index=False,
                float_format=settings.csv_float_format,
                na_rep="",
                lineterminator="\n",
            )
        os.replace(tmp_name, target)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp_name)
        raise

    logger.info(f"Wrote {len(frame)} rows to {target}")
    return target
