"""
What the difference-in-means estimator targets under each measurement strategy.

All values come from quadrature against the exposure distribution.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from metric_estimands import curves, exposure
from metric_estimands.curves import EffectCurve
from metric_estimands.exceptions import (
    DomainError,
    UndefinedEstimandError,
    UnsupportedDistributionError,
)
from metric_estimands.exposure import ExposureDistribution
from metric_estimands.models import StrategyKind

logger = logging.getLogger(__name__)


class EstimandCurve(BaseModel):
    times: List[float]
    values: List[Optional[float]] = Field(..., description="None where the estimand is undefined")
    strategy: StrategyKind
    window: Optional[float] = None

    @property
    def defined(self) -> List[bool]:
        return [value is not None for value in self.values]


def _exposed_mass(dist: ExposureDistribution, t: float) -> float:
    mass = exposure.cdf(dist, t)
    if mass <= 0:
        raise UndefinedEstimandError(
            "Estimand undefined before any exposure", diagnostics={"t": t}
        )
    return mass


def _check_window(nu: float) -> None:
    if nu <= 0:
        raise DomainError("Window length must be positive", diagnostics={"nu": nu})


def exposure_weighted_effect(
    curve: EffectCurve,
    dist: ExposureDistribution,
    t: float,
    lower: Optional[float] = None,
) -> float:
    """Integral of Delta(t - e) dF_E(e) over [0, t], or (lower, t] when given"""

    def lagged_effect(e):
        return curves.cumulative(curve, np.maximum(t - np.asarray(e, dtype=float), 0.0))

    kinks = [t - p for p in curves.breakpoints(curve)]
    return exposure.integrate_against(dist, lagged_effect, t, lower=lower, points=kinks)


def tau_cumulative(curve: EffectCurve, dist: ExposureDistribution, t: float) -> float:
    """Estimand of a cumulative metric analysed at time t"""
    mass = _exposed_mass(dist, t)
    return exposure_weighted_effect(curve, dist, t) / mass


def tau_windowed(curve: EffectCurve, nu: float) -> float:
    """Estimand of a windowed metric: Delta(nu), whatever the exposure or analysis time"""
    _check_window(nu)
    return curves.cumulative(curve, nu)


def tau_cumulative_windowed(
    curve: EffectCurve, dist: ExposureDistribution, nu: float, t: float
) -> float:
    """Estimand of a cumulative metric capped at nu days after exposure"""
    _check_window(nu)
    mass = _exposed_mass(dist, t)
    completed = curves.cumulative(curve, nu) * exposure.cdf(dist, t - nu)
    in_window = exposure_weighted_effect(curve, dist, t, lower=t - nu)
    return (completed + in_window) / mass


def estimand_curve(
    curve: EffectCurve,
    dist: ExposureDistribution,
    strategy: StrategyKind,
    nu: Optional[float],
    grid: Sequence[float],
) -> EstimandCurve:
    times = [float(t) for t in grid]
    if any(later < earlier for earlier, later in zip(times, times[1:])):
        raise DomainError("Analysis grid must be sorted ascending")
    strategy = StrategyKind(strategy)
    if strategy != StrategyKind.CUMULATIVE:
        if nu is None:
            raise DomainError(f"{strategy.value} estimand needs a window length")
        _check_window(nu)

    values: List[Optional[float]] = []
    for t in times:
        if strategy == StrategyKind.WINDOWED:
            values.append(tau_windowed(curve, nu) if t > nu else None)
        elif exposure.cdf(dist, t) <= 0:
            values.append(None)
        elif strategy == StrategyKind.CUMULATIVE:
            values.append(tau_cumulative(curve, dist, t))
        else:
            values.append(tau_cumulative_windowed(curve, dist, nu, t))

    logger.debug(f"Evaluated {strategy.value} estimand on {len(times)} grid points")
    return EstimandCurve(
        times=times,
        values=values,
        strategy=strategy,
        window=None if strategy == StrategyKind.CUMULATIVE else nu,
    )


def att(curve: EffectCurve, e: float, t: float) -> float:
    """Group-time effect at time t for the cohort exposed at e"""
    if e >= t:
        return 0.0
    return curves.cumulative(curve, t - e)


def group_time_weight(dist: ExposureDistribution, e: float, s: float, t: float) -> float:
    """
    Weight the cumulative estimand puts on ATT(e, s) when summarised at t.
    Only discrete exposure distributions have atoms to weight.
    """
    if not dist.is_discrete:
        raise UnsupportedDistributionError(
            f"Group-time weights need a discrete exposure distribution, got {dist.kind}"
        )
    if s != t:
        return 0.0
    values, probs = dist.atoms()
    hits = np.flatnonzero(values == e)
    if hits.size == 0 or e > t:
        return 0.0
    return float(probs[hits[0]]) / _exposed_mass(dist, s)


def tate(curve: EffectCurve, t: float) -> float:
    """Time-averaged effect Delta(t) / t"""
    if t <= 0:
        raise DomainError("TATE needs a positive horizon", diagnostics={"t": t})
    return curves.cumulative(curve, t) / t


def lte(curve: EffectCurve, t_large: float) -> float:
    """Long-term effect rate delta(t) at a large time since exposure"""
    if t_large <= 0:
        raise DomainError("LTE needs a positive time", diagnostics={"t": t_large})
    return curves.incremental(curve, t_large)
