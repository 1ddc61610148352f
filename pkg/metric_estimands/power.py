"""
Analytic power for difference-in-means tests on time-dependent metrics.

Measurements are modelled with variance growing linearly in time since exposure,
Var[Y(t) | E = e] = sigma2 * (t - e); heterogeneity in Delta(t - E) among the
exposed adds to that through the law of total variance.
"""

import logging
import math
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats

from metric_estimands import curves, estimands, exposure
from metric_estimands.curves import EffectCurve
from metric_estimands.exceptions import (
    DegenerateVarianceError,
    DomainError,
    InsufficientDataError,
    NumericalError,
    UndefinedConditionalError,
)
from metric_estimands.exposure import ExposureDistribution
from metric_estimands.models import Sidedness, StrategyKind, ZConvention

logger = logging.getLogger(__name__)

# Var[Delta(t - E) | E <= t] may come out slightly negative from roundoff
NEGATIVE_VARIANCE_SLACK = 1e-12


class LinearGrowth(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["linear_growth"] = "linear_growth"
    sigma2: float = Field(..., gt=0, description="Outcome variance per unit time")


VarianceModel = LinearGrowth


class AnalyticScenario(BaseModel):
    model_config = ConfigDict(frozen=True)

    curve: EffectCurve
    dist: ExposureDistribution
    variance: VarianceModel
    n1: int = Field(..., ge=1, description="Treated users once everyone is exposed")
    n0: int = Field(..., ge=1, description="Control users once everyone is exposed")
    z_convention: ZConvention = ZConvention.STANDARD_DEVIATION


class DecompositionTerms(BaseModel):
    t: float
    t_prime: float
    term_variance_reweight: float
    term_new_time_old_users: float
    term_new_users: float
    total: float
    direct: float

    @property
    def gap(self) -> float:
        return self.total - self.direct


def _conditioning_mass(dist: ExposureDistribution, upper: float) -> float:
    mass = exposure.cdf(dist, upper)
    if mass <= 0:
        raise UndefinedConditionalError(
            "No exposed users to take a conditional variance over",
            diagnostics={"t": upper},
        )
    return mass


def _spread(first: float, second: float) -> float:
    spread = second - first * first
    if spread < 0:
        if spread < -NEGATIVE_VARIANCE_SLACK * max(1.0, second):
            raise NumericalError(
                "Effect variance is negative beyond roundoff",
                diagnostics={"first_moment": first, "second_moment": second},
            )
        return 0.0
    return spread


def mixture_variance(scenario: AnalyticScenario, t: float) -> float:
    """Var(Y(t) | E <= t) for a cumulative measurement"""
    dist, curve = scenario.dist, scenario.curve
    mass = _conditioning_mass(dist, t)
    noise = scenario.variance.sigma2 * (t - exposure.conditional_mean_below(dist, t))

    def lagged(e):
        return curves.cumulative(curve, np.maximum(t - np.asarray(e, dtype=float), 0.0))

    kinks = [t - p for p in curves.breakpoints(curve)]
    first = exposure.integrate_against(dist, lagged, t, points=kinks) / mass
    second = exposure.integrate_against(dist, lambda e: lagged(e) ** 2, t, points=kinks) / mass
    return noise + _spread(first, second)


def strategy_mixture_variance(
    scenario: AnalyticScenario,
    kind: StrategyKind,
    t: float,
    nu: Optional[float] = None,
) -> float:
    """Variance of one user's measurement among those the strategy measures at t"""
    kind = StrategyKind(kind)
    if kind == StrategyKind.CUMULATIVE:
        return mixture_variance(scenario, t)
    if nu is None or nu <= 0:
        raise DomainError("Windowed strategies need a positive window", diagnostics={"nu": nu})

    sigma2 = scenario.variance.sigma2
    if kind == StrategyKind.WINDOWED:
        _conditioning_mass(scenario.dist, t - nu)
        return sigma2 * nu

    dist, curve = scenario.dist, scenario.curve
    mass = _conditioning_mass(dist, t)

    def observed(e):
        return np.clip(t - np.asarray(e, dtype=float), 0.0, nu)

    def capped(e):
        return curves.cumulative(curve, observed(e))

    kinks = [t - nu] + [t - p for p in curves.breakpoints(curve)]
    noise = sigma2 * exposure.integrate_against(dist, observed, t, points=kinks) / mass
    first = exposure.integrate_against(dist, capped, t, points=kinks) / mass
    second = exposure.integrate_against(dist, lambda e: capped(e) ** 2, t, points=kinks) / mass
    return noise + _spread(first, second)


def exposed_counts(scenario: AnalyticScenario, t: float) -> Tuple[int, int]:
    """Expected exposed users per group at t, rounded half up"""
    mass = exposure.cdf(scenario.dist, t)
    return (
        int(math.floor(scenario.n1 * mass + 0.5)),
        int(math.floor(scenario.n0 * mass + 0.5)),
    )


def estimator_variance(
    scenario: AnalyticScenario,
    t: float,
    n1_t: int,
    n0_t: int,
    kind: StrategyKind = StrategyKind.CUMULATIVE,
    nu: Optional[float] = None,
) -> float:
    """V_t, the variance of the difference in group means given exposed counts"""
    if n1_t < 1:
        raise InsufficientDataError("No exposed treated users", group=1, diagnostics={"t": t})
    if n0_t < 1:
        raise InsufficientDataError("No exposed control users", group=0, diagnostics={"t": t})
    variance = strategy_mixture_variance(scenario, kind, t, nu)
    return variance / n1_t + variance / n0_t


def expected_z(
    scenario: AnalyticScenario,
    t: float,
    counts: Optional[Tuple[int, int]] = None,
) -> float:
    """Mean of the cumulative-metric Z statistic at t under the scenario's convention"""
    effect = estimands.tau_cumulative(scenario.curve, scenario.dist, t)
    n1_t, n0_t = counts if counts is not None else exposed_counts(scenario, t)
    variance = estimator_variance(scenario, t, n1_t, n0_t)
    if variance <= 0:
        raise DegenerateVarianceError(
            "Variance of the mean difference is zero", diagnostics={"t": t}
        )
    if scenario.z_convention == ZConvention.VARIANCE:
        return effect / variance
    return effect / math.sqrt(variance)


def example2_variance(c: float, sigma2: float, t: float) -> float:
    """Var(Y(t) | E <= t) for the two-batch example (exposures at days 0 and 7)"""
    if t < 7:
        return sigma2 * t
    if t < 14:
        return sigma2 * (t - 3.5) + 0.25 * c**2 * (t - 14) ** 2
    return sigma2 * (t - 3.5)


def example2_expected_z(c: float, sigma2: float, t: float) -> float:
    """Closed-form E(Z_t) for the two-batch example, Z divided by the variance"""
    if sigma2 <= 0:
        raise DomainError("sigma2 must be positive", diagnostics={"sigma2": sigma2})
    if t < 0:
        raise DomainError("t must be non-negative", diagnostics={"t": t})
    if t < 7:
        return 125 * c / sigma2
    if t < 14:
        return 125 * t * c / (sigma2 * (t - 3.5) + 0.25 * c**2 * (t - 14) ** 2)
    return 250 * 7 * c / (sigma2 * (t - 3.5))


def theorem2_decomposition(scenario: AnalyticScenario, t: float, t_prime: float) -> DecompositionTerms:
    """
    Split the change in V^{-1/2} tau_C between t and t' into:
    the reweighting of effects already observed at t, effects accrued on (t, t']
    by users exposed by t, and the contribution of users exposed on (t, t'].
    """
    if not 0 < t < t_prime:
        raise DomainError("Need 0 < t < t_prime", diagnostics={"t": t, "t_prime": t_prime})

    dist, curve = scenario.dist, scenario.curve
    mass_t = _conditioning_mass(dist, t)
    mass_tp = exposure.cdf(dist, t_prime)
    var_t = estimator_variance(scenario, t, *exposed_counts(scenario, t))
    var_tp = estimator_variance(scenario, t_prime, *exposed_counts(scenario, t_prime))
    if var_t <= 0 or var_tp <= 0:
        raise DegenerateVarianceError(
            "Variance of the mean difference is zero",
            diagnostics={"var_t": var_t, "var_t_prime": var_tp},
        )

    scale_t = 1.0 / (math.sqrt(var_t) * mass_t)
    scale_tp = 1.0 / (math.sqrt(var_tp) * mass_tp)

    def accrued(e):
        e = np.asarray(e, dtype=float)
        return curves.cumulative(curve, np.maximum(t_prime - e, 0.0)) - curves.cumulative(
            curve, np.maximum(t - e, 0.0)
        )

    kinks = [x - p for p in curves.breakpoints(curve) for x in (t, t_prime)]
    observed = estimands.exposure_weighted_effect(curve, dist, t)
    later = exposure.integrate_against(dist, accrued, t, points=kinks)
    newcomers = estimands.exposure_weighted_effect(curve, dist, t_prime, lower=t)

    term1 = (scale_tp - scale_t) * observed
    term2 = scale_tp * later
    term3 = scale_tp * newcomers
    direct = estimands.tau_cumulative(curve, dist, t_prime) / math.sqrt(
        var_tp
    ) - estimands.tau_cumulative(curve, dist, t) / math.sqrt(var_t)

    return DecompositionTerms(
        t=t,
        t_prime=t_prime,
        term_variance_reweight=term1,
        term_new_time_old_users=term2,
        term_new_users=term3,
        total=term1 + term2 + term3,
        direct=direct,
    )


def critical_value(alpha: float, sidedness: Sidedness = Sidedness.ONE) -> float:
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)", diagnostics={"alpha": alpha})
    if Sidedness(sidedness) == Sidedness.TWO:
        return float(stats.norm.isf(alpha / 2))
    return float(stats.norm.isf(alpha))


def power_one_sided(expected_z: float, critical: float) -> float:
    """Pr(Z > c) for Z ~ N(expected_z, 1)"""
    return float(stats.norm.sf(critical - expected_z))


def power_two_sided(expected_z: float, critical: float) -> float:
    """Pr(|Z| > c) for Z ~ N(expected_z, 1)"""
    return float(stats.norm.sf(critical - expected_z) + stats.norm.cdf(-critical - expected_z))
