"""
Measurement strategies applied to per-user daily panels.

Panel semantics: day d covers (d, d+1]. For the exposure day only the observed
span (max(d, e), d+1] is stored, and earlier days hold nothing. A measurement
over (e, end] takes whole days up to floor(end) and prorates the last day by
the share of its observed span that falls before `end`. A user counts as
exposed at t only when e < t.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter

from metric_estimands import power, reporting
from metric_estimands.exceptions import (
    DegenerateVarianceError,
    DomainError,
    EstimandsError,
    InsufficientDataError,
    OutOfRangeError,
)
from metric_estimands.models import StrategyKind, VarianceMode, ZConvention

logger = logging.getLogger(__name__)


class _Strategy(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    @property
    def strategy_kind(self) -> StrategyKind:
        return StrategyKind(self.kind)

    @property
    def window(self) -> Optional[float]:
        return getattr(self, "nu", None)

    @property
    def label(self) -> str:
        if self.window is None:
            return self.kind
        return f"{self.kind}_{self.window:g}"


class Cumulative(_Strategy):
    kind: Literal["cumulative"] = "cumulative"


class Windowed(_Strategy):
    kind: Literal["windowed"] = "windowed"
    nu: float = Field(..., gt=0, description="Window length in days")


class CumulativeWindowed(_Strategy):
    kind: Literal["cumulative_windowed"] = "cumulative_windowed"
    nu: float = Field(..., gt=0, description="Window length in days")


MeasurementStrategy = Annotated[
    Union[Cumulative, Windowed, CumulativeWindowed],
    Field(discriminator="kind"),
]

strategy_adapter = TypeAdapter(MeasurementStrategy)


def strategy_from_label(label: str) -> MeasurementStrategy:
    """Inverse of `label`: "cumulative", "windowed_7", "cumulative_windowed_7" """
    label = label.strip()
    if label == Cumulative().label:
        return Cumulative()
    for kind in (StrategyKind.CUMULATIVE_WINDOWED, StrategyKind.WINDOWED):
        prefix = f"{kind.value}_"
        if label.startswith(prefix):
            try:
                nu = float(label[len(prefix):])
            except ValueError:
                break
            return strategy_adapter.validate_python({"kind": kind.value, "nu": nu})
    raise DomainError(f"Unknown measurement strategy '{label}'")


@dataclass(frozen=True, eq=False)
class UserPanel:
    """Immutable per-user daily increments over days 0..horizon-1"""

    user_id: np.ndarray
    w: np.ndarray
    e: np.ndarray
    increments: np.ndarray
    horizon: int

    def __post_init__(self):
        n = len(self.user_id)
        if self.horizon < 1:
            raise DomainError("Panel horizon must be at least one day")
        if not (len(self.w) == len(self.e) == n):
            raise DomainError("user_id, w and e must have one entry per user")
        if self.increments.shape != (n, self.horizon):
            raise DomainError(
                "increments must be users x horizon",
                diagnostics={"shape": self.increments.shape, "horizon": self.horizon},
            )
        if len(np.unique(self.user_id)) != n:
            raise DomainError("User ids must be unique")
        if np.any((self.w != 0) & (self.w != 1)):
            raise DomainError("Assignments must be 0 or 1")
        if n and (np.any(self.e < 0) or np.any(self.e > self.horizon)):
            raise DomainError("Exposure times must lie in [0, horizon]")

    @property
    def n_users(self) -> int:
        return len(self.user_id)

    @cached_property
    def running_totals(self) -> np.ndarray:
        """Observed outcome accumulated to the start of each day, users x (horizon + 1)"""
        days = np.arange(self.horizon)
        observed = np.where(days[None, :] + 1 > self.e[:, None], self.increments, 0.0)
        return np.concatenate(
            (np.zeros((self.n_users, 1)), np.cumsum(observed, axis=1)), axis=1
        )


class GroupMeans(BaseModel):
    mean1: float
    mean0: float
    n1: int
    n0: int


class ZStatistic(BaseModel):
    diff: float
    variance: float
    z: float
    n1: int
    n0: int


@dataclass(frozen=True, eq=False)
class GroupStatistics:
    """Per-column treated and control summaries of a users x days measurement matrix"""

    n1: np.ndarray
    n0: np.ndarray
    mean1: np.ndarray
    mean0: np.ndarray
    var1: np.ndarray
    var0: np.ndarray

    @property
    def diff(self) -> np.ndarray:
        return self.mean1 - self.mean0


def _check_days(panel: UserPanel, days: Sequence[float]) -> np.ndarray:
    days = np.atleast_1d(np.asarray(days, dtype=float))
    if np.any(np.isnan(days)) or np.any(days < 0):
        raise DomainError("Analysis times must be non-negative")
    if np.any(days > panel.horizon):
        raise OutOfRangeError(
            "Analysis time beyond the panel horizon",
            diagnostics={"t": float(days.max()), "horizon": panel.horizon},
        )
    return days


def _accumulated(panel: UserPanel, rows: np.ndarray, end: np.ndarray) -> np.ndarray:
    """Observed outcome over (e, end] for each row of `end`"""
    e = panel.e[rows][:, None]
    last = np.clip(np.floor(end), 0, panel.horizon).astype(int)
    day = np.minimum(last, panel.horizon - 1)
    start = np.maximum(last, e)
    span = last + 1 - start
    with np.errstate(divide="ignore", invalid="ignore"):
        share = np.where(
            (last < panel.horizon) & (span > 0), np.clip((end - start) / span, 0.0, 1.0), 0.0
        )
    totals = np.take_along_axis(panel.running_totals[rows], last, axis=1)
    partial = np.take_along_axis(panel.increments[rows], day, axis=1)
    return totals + share * partial


def _measurements(
    panel: UserPanel, strategy: MeasurementStrategy, days: np.ndarray, rows: np.ndarray
) -> np.ndarray:
    e = panel.e[rows][:, None]
    t = np.broadcast_to(days[None, :], (len(rows), len(days)))
    available = e < t
    if strategy.strategy_kind == StrategyKind.CUMULATIVE:
        end = t
    elif strategy.strategy_kind == StrategyKind.WINDOWED:
        end = np.broadcast_to(e + strategy.nu, t.shape)
        available = available & (e + strategy.nu <= t)
    else:
        end = np.minimum(t, e + strategy.nu)
    values = _accumulated(panel, rows, end)
    return np.where(available, values, np.nan)


def measure_matrix(
    panel: UserPanel, strategy: MeasurementStrategy, days: Sequence[float]
) -> np.ndarray:
    """Measurements for every user (rows) at every analysis time (columns); NaN where absent"""
    days = _check_days(panel, days)
    return _measurements(panel, strategy, days, np.arange(panel.n_users))


def measure(
    panel: UserPanel, user_id: int, strategy: MeasurementStrategy, t: float
) -> Optional[float]:
    """One user's measurement at t, or None when the strategy has nothing for them yet"""
    days = _check_days(panel, [t])
    rows = np.flatnonzero(panel.user_id == user_id)
    if rows.size == 0:
        raise DomainError(f"Unknown user {user_id}")
    value = _measurements(panel, strategy, days, rows)[0, 0]
    return None if np.isnan(value) else float(value)


def group_statistics(matrix: np.ndarray, w: np.ndarray) -> GroupStatistics:
    """Counts, means and sample variances (ddof=1) per column, skipping NaN"""
    measured = ~np.isnan(matrix)
    values = np.where(measured, matrix, 0.0)
    summaries = []
    for in_group in (w[:, None] == 1, w[:, None] == 0):
        mask = measured & in_group
        count = mask.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            mean = np.where(count > 0, (values * mask).sum(axis=0) / count, np.nan)
            squares = (np.where(mask, values - mean, 0.0) ** 2).sum(axis=0)
            var = np.where(count > 1, squares / (count - 1), np.nan)
        summaries.append((count, mean, var))
    (n1, mean1, var1), (n0, mean0, var0) = summaries
    return GroupStatistics(n1=n1, n0=n0, mean1=mean1, mean0=mean0, var1=var1, var0=var0)


def z_values(
    stats: GroupStatistics,
    variance_mode: VarianceMode = VarianceMode.ESTIMATED,
    unit_variance: Optional[np.ndarray] = None,
    convention: ZConvention = ZConvention.STANDARD_DEVIATION,
):
    """
    Vectorized (diff, variance, z) per column, NaN where the test is undefined.

    Estimated mode uses s1^2/n1 + s0^2/n0 and needs two users per group.
    Known mode needs `unit_variance`, the model variance of one measurement,
    and one user per group.
    """
    n1 = stats.n1.astype(float)
    n0 = stats.n0.astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if variance_mode == VarianceMode.KNOWN:
            if unit_variance is None:
                raise DomainError("Known-variance mode needs the model variance")
            unit = np.asarray(unit_variance, dtype=float)
            variance = unit / n1 + unit / n0
            usable = (stats.n1 >= 1) & (stats.n0 >= 1) & np.isfinite(variance)
        else:
            variance = stats.var1 / n1 + stats.var0 / n0
            usable = (stats.n1 >= 2) & (stats.n0 >= 2)
        usable = usable & (variance > 0)
        scale = variance if convention == ZConvention.VARIANCE else np.sqrt(variance)
        z = np.where(usable, stats.diff / scale, np.nan)
    diff = np.where((stats.n1 >= 1) & (stats.n0 >= 1), stats.diff, np.nan)
    return diff, np.where(usable, variance, np.nan), z


def _column(panel: UserPanel, strategy: MeasurementStrategy, t: float) -> GroupStatistics:
    return group_statistics(measure_matrix(panel, strategy, [t]), panel.w)


def _means(stats: GroupStatistics, t: float) -> GroupMeans:
    n1, n0 = int(stats.n1[0]), int(stats.n0[0])
    if n1 == 0:
        raise InsufficientDataError("No measured treated users", group=1, diagnostics={"t": t})
    if n0 == 0:
        raise InsufficientDataError("No measured control users", group=0, diagnostics={"t": t})
    return GroupMeans(mean1=float(stats.mean1[0]), mean0=float(stats.mean0[0]), n1=n1, n0=n0)


def group_means(panel: UserPanel, strategy: MeasurementStrategy, t: float) -> GroupMeans:
    return _means(_column(panel, strategy, t), t)


def z_statistic(
    panel: UserPanel,
    strategy: MeasurementStrategy,
    t: float,
    variance_mode: VarianceMode = VarianceMode.ESTIMATED,
    scenario: Optional[power.AnalyticScenario] = None,
    convention: ZConvention = ZConvention.STANDARD_DEVIATION,
) -> ZStatistic:
    """
    Difference-in-means test at t. Known-variance mode takes the model variance
    from `scenario` with the realised group counts.
    """
    stats = _column(panel, strategy, t)
    means = _means(stats, t)
    diff = means.mean1 - means.mean0

    if VarianceMode(variance_mode) == VarianceMode.KNOWN:
        if scenario is None:
            raise DomainError("Known-variance mode needs an analytic scenario")
        variance = power.estimator_variance(
            scenario, t, means.n1, means.n0, strategy.strategy_kind, strategy.window
        )
    else:
        for group, count in ((1, means.n1), (0, means.n0)):
            if count < 2:
                raise InsufficientDataError(
                    "Need two measured users per group to estimate a variance",
                    group=group,
                    diagnostics={"t": t, "n": count},
                )
        variance = float(stats.var1[0] / means.n1 + stats.var0[0] / means.n0)

    if variance <= 0:
        raise DegenerateVarianceError(
            "All measurements are identical", diagnostics={"t": t, "strategy": strategy.label}
        )
    scale = variance if ZConvention(convention) == ZConvention.VARIANCE else math.sqrt(variance)
    return ZStatistic(diff=diff, variance=variance, z=diff / scale, n1=means.n1, n0=means.n0)


def analyze_panel(
    panel: UserPanel,
    strategies: Sequence[MeasurementStrategy],
    days: Sequence[float],
    variance_mode: VarianceMode = VarianceMode.ESTIMATED,
    scenario: Optional[power.AnalyticScenario] = None,
    convention: ZConvention = ZConvention.STANDARD_DEVIATION,
) -> pd.DataFrame:
    """Analysis table with columns t,strategy,diff,variance,z,n1,n0; blanks where undefined"""
    days = _check_days(panel, days)
    if VarianceMode(variance_mode) == VarianceMode.KNOWN and scenario is None:
        raise DomainError("Known-variance mode needs an analytic scenario")

    frames: List[pd.DataFrame] = []
    for strategy in strategies:
        stats = group_statistics(measure_matrix(panel, strategy, days), panel.w)
        unit = None
        if VarianceMode(variance_mode) == VarianceMode.KNOWN:
            unit = np.array([_unit_variance(scenario, strategy, t) for t in days])
        diff, variance, z = z_values(stats, variance_mode, unit, convention)
        frames.append(
            pd.DataFrame(
                {
                    "t": days,
                    "strategy": strategy.label,
                    "diff": diff,
                    "variance": variance,
                    "z": z,
                    "n1": stats.n1,
                    "n0": stats.n0,
                }
            )
        )
    logger.info(f"Analysed {panel.n_users} users over {len(days)} times")
    return pd.concat(frames, ignore_index=True)


def _unit_variance(
    scenario: power.AnalyticScenario, strategy: MeasurementStrategy, t: float
) -> float:
    try:
        return power.strategy_mixture_variance(scenario, strategy.strategy_kind, t, strategy.window)
    except EstimandsError as exc:
        logger.debug(f"No model variance for {strategy.label} at t={t}: {exc}")
        return math.nan


def write_panel_csv(panel: UserPanel, path: Union[str, Path]) -> Path:
    """Long format user_id,w,e,day,increment with every day of every user"""
    frame = pd.DataFrame(
        {
            "user_id": np.repeat(panel.user_id, panel.horizon),
            "w": np.repeat(panel.w, panel.horizon),
            "e": np.repeat(panel.e, panel.horizon),
            "day": np.tile(np.arange(panel.horizon), panel.n_users),
            "increment": panel.increments.ravel(),
        }
    )
    return reporting.write_csv(frame, path, reporting.PANEL_COLUMNS)


def read_panel_csv(path: Union[str, Path], horizon: Optional[int] = None) -> UserPanel:
    """
    Load a long-format panel. Days missing for a user read as zero increments;
    the horizon defaults to one past the last recorded day.
    """
    frame = pd.read_csv(path)
    missing = [column for column in reporting.PANEL_COLUMNS if column not in frame.columns]
    if missing:
        raise DomainError(f"Panel file lacks columns: {missing}", diagnostics={"path": str(path)})
    if frame.empty:
        raise DomainError("Panel file has no rows", diagnostics={"path": str(path)})

    per_user = frame.groupby("user_id", sort=True).agg(
        w=("w", "first"), e=("e", "first"), w_levels=("w", "nunique"), e_levels=("e", "nunique")
    )
    if (per_user["w_levels"] > 1).any() or (per_user["e_levels"] > 1).any():
        raise DomainError("Each user needs a single assignment and exposure time")
    if frame.duplicated(["user_id", "day"]).any():
        raise DomainError("Duplicate (user_id, day) rows in panel file")

    last_day = int(frame["day"].max())
    horizon = last_day + 1 if horizon is None else int(horizon)
    if frame["day"].min() < 0 or last_day >= horizon:
        raise DomainError("Panel days must lie in [0, horizon)", diagnostics={"horizon": horizon})

    grid = frame.pivot(index="user_id", columns="day", values="increment")
    grid = grid.reindex(index=per_user.index, columns=range(horizon), fill_value=0.0).fillna(0.0)
    panel = UserPanel(
        user_id=per_user.index.to_numpy(dtype=np.int64),
        w=per_user["w"].to_numpy(dtype=np.int64),
        e=per_user["e"].to_numpy(dtype=float),
        increments=grid.to_numpy(dtype=float),
        horizon=horizon,
    )
    logger.info(f"Loaded panel of {panel.n_users} users over {horizon} days from {path}")
    return panel
