"""
Monte Carlo experiments: panel generation, power curves and estimand oracles.

Replication r draws from SeedSequence(seed, spawn_key=(r,)). Replications run
in fixed-size blocks that are reduced in block order, so results do not depend
on how many worker processes share the work.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from metric_estimands import curves, exposure, metrics, power
from metric_estimands.config import settings
from metric_estimands.curves import EffectCurve
from metric_estimands.exceptions import ConfigurationError, EstimandsError
from metric_estimands.exposure import ExposureDistribution
from metric_estimands.metrics import MeasurementStrategy, UserPanel
from metric_estimands.models import Sidedness, VarianceMode, ZConvention

logger = logging.getLogger(__name__)

BLOCK_SIZE = 50
MIN_HORIZON_MASS = 1e-6
MAX_RESAMPLE_ROUNDS = 10_000


class BernoulliAssignment(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["bernoulli"] = "bernoulli"
    p: float = Field(0.5, gt=0, lt=1, description="Treatment probability")


class ExactSplit(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["exact_split"] = "exact_split"
    treated_fraction: float = Field(0.5, gt=0, lt=1)


Assignment = Annotated[Union[BernoulliAssignment, ExactSplit], Field(discriminator="kind")]


class Scenario(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_users: int = Field(..., ge=2)
    assignment: Assignment = Field(default_factory=ExactSplit)
    exposure: ExposureDistribution
    curve: EffectCurve
    noise_sigma: float = Field(1.0, gt=0, description="Standard deviation of a full day's increment")
    horizon_days: int = Field(..., ge=1)
    strategies: List[MeasurementStrategy] = Field(..., min_length=1)
    alpha: float = Field(0.10, gt=0, lt=1)
    sidedness: Sidedness = Sidedness.TWO
    replications: int = Field(..., ge=1)
    seed: int = Field(settings.default_seed, ge=0, lt=2**64)
    variance_mode: VarianceMode = VarianceMode.ESTIMATED
    z_convention: ZConvention = ZConvention.STANDARD_DEVIATION

    def expected_group_sizes(self) -> Tuple[int, int]:
        share = (
            self.assignment.p
            if isinstance(self.assignment, BernoulliAssignment)
            else self.assignment.treated_fraction
        )
        treated = int(math.floor(self.n_users * share + 0.5))
        return max(treated, 1), max(self.n_users - treated, 1)

    def analytic(self) -> power.AnalyticScenario:
        """Model-based view used for known-variance tests"""
        n1, n0 = self.expected_group_sizes()
        return power.AnalyticScenario(
            curve=self.curve,
            dist=self.exposure,
            variance=power.LinearGrowth(sigma2=self.noise_sigma**2),
            n1=n1,
            n0=n0,
            z_convention=self.z_convention,
        )


class PowerCurvePoint(BaseModel):
    day: int
    strategy: str
    rejection_rate: Optional[float] = None
    se: Optional[float] = None
    defined: bool
    replications: int
    replications_defined: int
    mean_z: Optional[float] = None
    mean_z_se: Optional[float] = None


class PowerCurveResult(BaseModel):
    scenario: Scenario
    points: List[PowerCurvePoint]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([point.model_dump() for point in self.points])

    def point(self, strategy: str, day: int) -> PowerCurvePoint:
        for candidate in self.points:
            if candidate.strategy == strategy and candidate.day == day:
                return candidate
        raise KeyError((strategy, day))


class MonteCarloEstimate(BaseModel):
    mean_diff: float
    se: float
    n1: int
    n0: int


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replication,)))


def _assign(assignment: Assignment, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(assignment, BernoulliAssignment):
        return (rng.random(n) < assignment.p).astype(np.int64)
    treated = int(math.floor(n * assignment.treated_fraction + 0.5))
    w = np.zeros(n, dtype=np.int64)
    w[rng.permutation(n)[:treated]] = 1
    return w


def _exposure_times(
    dist: ExposureDistribution, horizon: int, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Exposure times conditioned on E <= horizon by rejection"""
    mass = exposure.cdf(dist, horizon)
    if mass < MIN_HORIZON_MASS:
        raise ConfigurationError(
            "Exposure distribution puts no mass inside the horizon",
            diagnostics={"horizon": horizon, "mass": mass},
        )
    if mass < 0.5:
        logger.warning(f"Only {mass:.3f} of exposures fall inside the horizon; resampling the rest")

    times = exposure.sample(dist, rng, n)
    outside = times > horizon
    rounds = 0
    while outside.any():
        rounds += 1
        if rounds > MAX_RESAMPLE_ROUNDS:
            raise ConfigurationError("Rejection sampling of exposure times did not finish")
        times[outside] = exposure.sample(dist, rng, int(outside.sum()))
        outside = times > horizon
    return times


def simulate_panel(scenario: Scenario, rng: np.random.Generator) -> UserPanel:
    """
    One experiment. Day d's increment for a user exposed at e is
    N(0, sigma^2 * s) + w * (Delta(d+1-e) - Delta(d-e)) on the observed span
    s = clip(d+1 - max(d, e), 0, 1).
    """
    n, horizon = scenario.n_users, scenario.horizon_days
    w = _assign(scenario.assignment, n, rng)
    e = _exposure_times(scenario.exposure, horizon, n, rng)

    days = np.arange(horizon, dtype=float)[None, :]
    lag = days - e[:, None]
    span = np.clip(lag + 1.0, 0.0, 1.0)
    noise = rng.standard_normal((n, horizon)) * (scenario.noise_sigma * np.sqrt(span))
    effect = curves.cumulative(scenario.curve, np.maximum(lag + 1.0, 0.0)) - curves.cumulative(
        scenario.curve, np.maximum(lag, 0.0)
    )
    return UserPanel(
        user_id=np.arange(n, dtype=np.int64),
        w=w,
        e=e,
        increments=noise + w[:, None] * effect,
        horizon=horizon,
    )


def _unit_variances(scenario: Scenario, days: np.ndarray) -> Optional[np.ndarray]:
    """Model variance of one measurement per (strategy, day); NaN where undefined"""
    if scenario.variance_mode != VarianceMode.KNOWN:
        return None
    analytic = scenario.analytic()
    table = np.full((len(scenario.strategies), len(days)), np.nan)
    for i, strategy in enumerate(scenario.strategies):
        for j, t in enumerate(days):
            try:
                table[i, j] = power.strategy_mixture_variance(
                    analytic, strategy.strategy_kind, float(t), strategy.window
                )
            except EstimandsError as exc:
                logger.debug(f"{strategy.label} has no model variance at day {t}: {exc}")
    return table


def _run_block(
    scenario: Scenario,
    replications: range,
    unit_variances: Optional[np.ndarray],
    critical: float,
) -> Dict[str, np.ndarray]:
    days = np.arange(1, scenario.horizon_days + 1, dtype=float)
    shape = (len(scenario.strategies), len(days))
    totals = {
        "rejections": np.zeros(shape, dtype=np.int64),
        "defined": np.zeros(shape, dtype=np.int64),
        "z_sum": np.zeros(shape),
        "z_squares": np.zeros(shape),
    }
    for replication in replications:
        panel = simulate_panel(scenario, replication_rng(scenario.seed, replication))
        for i, strategy in enumerate(scenario.strategies):
            stats = metrics.group_statistics(metrics.measure_matrix(panel, strategy, days), panel.w)
            _, _, z = metrics.z_values(
                stats,
                scenario.variance_mode,
                None if unit_variances is None else unit_variances[i],
                scenario.z_convention,
            )
            defined = ~np.isnan(z)
            if scenario.sidedness == Sidedness.TWO:
                rejected = defined & (np.abs(np.nan_to_num(z)) > critical)
            else:
                rejected = defined & (np.nan_to_num(z) > critical)
            totals["rejections"][i] += rejected
            totals["defined"][i] += defined
            totals["z_sum"][i] += np.where(defined, z, 0.0)
            totals["z_squares"][i] += np.where(defined, z, 0.0) ** 2
    return totals


def _blocks(replications: int) -> List[range]:
    return [
        range(start, min(start + BLOCK_SIZE, replications))
        for start in range(0, replications, BLOCK_SIZE)
    ]


def power_curve(scenario: Scenario, workers: Optional[int] = None) -> PowerCurveResult:
    """Rejection rates and mean Z per strategy for days 1..horizon"""
    workers = settings.workers if workers is None else workers
    days = np.arange(1, scenario.horizon_days + 1, dtype=float)
    critical = power.critical_value(scenario.alpha, scenario.sidedness)
    unit_variances = _unit_variances(scenario, days)
    blocks = _blocks(scenario.replications)
    logger.info(
        f"Simulating {scenario.replications} replications of {scenario.n_users} users "
        f"over {scenario.horizon_days} days with {workers} worker(s)"
    )

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_block, scenario, block, unit_variances, critical)
                for block in blocks
            ]
            partials = [future.result() for future in futures]
    else:
        partials = [_run_block(scenario, block, unit_variances, critical) for block in blocks]

    totals = partials[0]
    for partial in partials[1:]:
        for key in totals:
            totals[key] = totals[key] + partial[key]

    points: List[PowerCurvePoint] = []
    for i, strategy in enumerate(scenario.strategies):
        for j, day in enumerate(days):
            count = int(totals["defined"][i, j])
            point = PowerCurvePoint(
                day=int(day),
                strategy=strategy.label,
                defined=count > 0,
                replications=scenario.replications,
                replications_defined=count,
            )
            if count > 0:
                rate = totals["rejections"][i, j] / count
                mean_z = totals["z_sum"][i, j] / count
                spread = max(totals["z_squares"][i, j] / count - mean_z**2, 0.0)
                point.rejection_rate = float(rate)
                point.se = math.sqrt(rate * (1.0 - rate) / count)
                point.mean_z = float(mean_z)
                point.mean_z_se = math.sqrt(spread / count)
            points.append(point)

    logger.info(f"Finished power curve for {len(scenario.strategies)} strategies")
    return PowerCurveResult(scenario=scenario, points=points)


def monte_carlo_estimand(
    scenario: Scenario,
    strategy: MeasurementStrategy,
    t: float,
    n_users_override: Optional[int] = None,
    replication: int = 0,
) -> MonteCarloEstimate:
    """Mean difference of one large simulated panel, with its standard error"""
    if n_users_override is not None:
        scenario = scenario.model_copy(update={"n_users": n_users_override})
    panel = simulate_panel(scenario, replication_rng(scenario.seed, replication))
    result = metrics.z_statistic(panel, strategy, t)
    return MonteCarloEstimate(
        mean_diff=result.diff, se=math.sqrt(result.variance), n1=result.n1, n0=result.n0
    )


def _default_strategies(nu: float = 7.0) -> List[MeasurementStrategy]:
    return [metrics.Cumulative(), metrics.CumulativeWindowed(nu=nu), metrics.Windowed(nu=nu)]


def builtin_dgp1(replications: Optional[int] = None) -> Scenario:
    """Exponential(0.4) exposure with a fast-decaying effect"""
    return Scenario(
        n_users=700,
        assignment=ExactSplit(),
        exposure=exposure.Exponential(rate=0.4),
        curve=curves.DGP1_EFFECT,
        noise_sigma=1.0,
        horizon_days=21,
        strategies=_default_strategies(),
        alpha=0.10,
        sidedness=Sidedness.TWO,
        replications=replications or settings.full_replications,
        seed=settings.default_seed,
    )


def builtin_dgp2(replications: Optional[int] = None) -> Scenario:
    """Late exposure (density proportional to t^3) with an effect peaking near day 6"""
    return builtin_dgp1(replications).model_copy(
        update={
            "exposure": exposure.PowerLawDensity(k=3, horizon=21),
            "curve": curves.DGP2_EFFECT,
        }
    )


def builtin_example2(replications: Optional[int] = None) -> Scenario:
    """Two batches of 500 users exposed on days 0 and 7, constant effect for 7 days"""
    return Scenario(
        n_users=1000,
        assignment=ExactSplit(),
        exposure=exposure.TwoPoint(times=[0.0, 7.0], probs=[0.5, 0.5]),
        curve=curves.StepConstant(c=0.05, t_end=7),
        noise_sigma=math.sqrt(2.0),
        horizon_days=21,
        strategies=[metrics.Cumulative()],
        alpha=0.10,
        sidedness=Sidedness.TWO,
        replications=replications or 5000,
        seed=settings.default_seed,
        variance_mode=VarianceMode.KNOWN,
        z_convention=ZConvention.VARIANCE,
    )


def builtin_fig3(
    rate: float = 0.4, curve: Optional[EffectCurve] = None, n_users: int = 200_000
) -> Scenario:
    """Large single-panel configuration for comparing simulated and quadrature estimands"""
    return Scenario(
        n_users=n_users,
        assignment=ExactSplit(),
        exposure=exposure.Exponential(rate=rate),
        curve=curve if curve is not None else curves.FAST_DECAY,
        noise_sigma=1.0,
        horizon_days=21,
        strategies=_default_strategies(),
        replications=1,
        seed=settings.default_seed,
    )


BUILTIN_SCENARIOS = {
    "dgp1": builtin_dgp1,
    "dgp2": builtin_dgp2,
    "example2": builtin_example2,
    "fig3": builtin_fig3,
}


def builtin_scenario(name: str) -> Scenario:
    try:
        factory = BUILTIN_SCENARIOS[name]
    except KeyError:
        raise ConfigurationError(
            f"Unknown built-in scenario '{name}'",
            diagnostics={"available": ", ".join(sorted(BUILTIN_SCENARIOS))},
        ) from None
    return factory()
