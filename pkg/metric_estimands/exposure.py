"""
Distributions of the exposure time E.

The CDF convention is F_E(e) = Pr(E <= e). Stieltjes integrals over [0, t]
therefore include an atom sitting exactly at t; an explicit exclusive lower
limit gives the half-open interval (lower, t].
"""

import logging
import math
from typing import Annotated, Callable, ClassVar, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, field_validator
from scipy import integrate

from metric_estimands.config import settings
from metric_estimands.exceptions import (
    DomainError,
    NumericalError,
    UndefinedConditionalError,
    UnsupportedDistributionError,
)

logger = logging.getLogger(__name__)

Integrand = Callable[[Union[float, np.ndarray]], Union[float, np.ndarray]]


class _Distribution(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    is_discrete: ClassVar[bool] = False

    @property
    def support_upper(self) -> float:
        return math.inf

    def _cdf(self, e: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _ppf(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class _ContinuousDistribution(_Distribution):
    def _pdf(self, e):
        raise NotImplementedError


class _DiscreteDistribution(_Distribution):
    is_discrete: ClassVar[bool] = True

    def atoms(self) -> Tuple[np.ndarray, np.ndarray]:
        """Distinct support points and their probabilities"""
        raise NotImplementedError

    def _cumulative_mass(self) -> np.ndarray:
        """CDF just after each atom, with a leading 0 and an exact trailing 1"""
        raise NotImplementedError

    def _cdf(self, e):
        values, _ = self.atoms()
        return self._cumulative_mass()[np.searchsorted(values, e, side="right")]

    def _ppf(self, u):
        values, _ = self.atoms()
        idx = np.searchsorted(self._cumulative_mass()[1:], u, side="right")
        return values[np.minimum(idx, len(values) - 1)]


class Exponential(_ContinuousDistribution):
    kind: Literal["exponential"] = "exponential"
    rate: float = Field(..., gt=0, alias="lambda", description="Exposure rate per day")

    def _cdf(self, e):
        return np.where(e < 0, 0.0, -np.expm1(-self.rate * np.maximum(e, 0.0)))

    def _pdf(self, e):
        return np.where(e < 0, 0.0, self.rate * np.exp(-self.rate * np.maximum(e, 0.0)))

    def _ppf(self, u):
        return -np.log1p(-u) / self.rate


class TwoPoint(_DiscreteDistribution):
    kind: Literal["two_point"] = "two_point"
    times: List[float] = Field(..., min_length=2, max_length=2)
    probs: List[float] = Field(..., min_length=2, max_length=2)

    @field_validator("times")
    @classmethod
    def validate_times(cls, v):
        """Two ordered, non-negative exposure times"""
        if v[0] < 0:
            raise ValueError("Exposure times must be non-negative")
        if not v[0] < v[1]:
            raise ValueError("Exposure times must satisfy t1 < t2")
        return v

    @field_validator("probs")
    @classmethod
    def validate_probs(cls, v):
        """Probabilities are non-negative and sum to one"""
        if any(p < 0 for p in v):
            raise ValueError("Probabilities must be non-negative")
        if abs(sum(v) - 1.0) > 1e-12:
            raise ValueError("Probabilities must sum to 1")
        return v

    def atoms(self):
        return np.asarray(self.times, dtype=float), np.asarray(self.probs, dtype=float)

    def _cumulative_mass(self):
        return np.array([0.0, self.probs[0], 1.0])


class PowerLawDensity(_ContinuousDistribution):
    kind: Literal["power_law"] = "power_law"
    k: float = Field(..., ge=0, description="Density exponent")
    horizon: float = Field(..., gt=0, description="Upper end of the support")

    @property
    def support_upper(self) -> float:
        return self.horizon

    def _cdf(self, e):
        return np.clip(np.asarray(e, dtype=float) / self.horizon, 0.0, 1.0) ** (self.k + 1.0)

    def _pdf(self, e):
        inside = (e >= 0) & (e <= self.horizon)
        scaled = np.clip(np.asarray(e, dtype=float), 0.0, self.horizon) / self.horizon
        return np.where(inside, (self.k + 1.0) * scaled**self.k / self.horizon, 0.0)

    def _ppf(self, u):
        return self.horizon * u ** (1.0 / (self.k + 1.0))


class Empirical(_DiscreteDistribution):
    kind: Literal["empirical"] = "empirical"
    times: List[float] = Field(..., min_length=1, description="Observed exposure times")

    @field_validator("times")
    @classmethod
    def validate_times(cls, v):
        """Times must be sorted and non-negative"""
        if v[0] < 0:
            raise ValueError("Exposure times must be non-negative")
        if any(later < earlier for earlier, later in zip(v, v[1:])):
            raise ValueError("Exposure times must be sorted")
        return v

    def atoms(self):
        values, counts = np.unique(np.asarray(self.times, dtype=float), return_counts=True)
        return values, counts / len(self.times)

    def _cumulative_mass(self):
        _, counts = np.unique(np.asarray(self.times, dtype=float), return_counts=True)
        mass = np.concatenate(([0.0], np.cumsum(counts) / len(self.times)))
        mass[-1] = 1.0
        return mass


ExposureDistribution = Annotated[
    Union[Exponential, TwoPoint, PowerLawDensity, Empirical],
    Field(discriminator="kind"),
]

exposure_adapter = TypeAdapter(ExposureDistribution)


def parse_exposure(data: dict) -> ExposureDistribution:
    """Build a distribution from its JSON form, e.g. {"kind": "exponential", "lambda": 0.4}"""
    return exposure_adapter.validate_python(data)


def cdf(dist: ExposureDistribution, e):
    """F_E(e) = Pr(E <= e); 0 for e < 0"""
    values = dist._cdf(np.asarray(e, dtype=float))
    if np.ndim(e) == 0:
        return float(values)
    return np.asarray(values, dtype=float)


def pdf(dist: ExposureDistribution, e):
    """Density of a continuous exposure distribution"""
    if dist.is_discrete:
        raise UnsupportedDistributionError(f"{dist.kind} exposure has no density")
    values = dist._pdf(np.asarray(e, dtype=float))
    if np.ndim(e) == 0:
        return float(values)
    return np.asarray(values, dtype=float)


def ppf(dist: ExposureDistribution, u):
    """Inverse CDF on [0, 1)"""
    return dist._ppf(np.asarray(u, dtype=float))


def sample(dist: ExposureDistribution, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw n i.i.d. exposure times by inverse-CDF sampling"""
    if n < 0:
        raise DomainError("Sample size must be non-negative", diagnostics={"n": n})
    if n == 0:
        return np.empty(0, dtype=float)
    return np.asarray(ppf(dist, rng.random(n)), dtype=float)


def integrate_against(
    dist: ExposureDistribution,
    g: Integrand,
    t: float,
    lower: Optional[float] = None,
    points: Sequence[float] = (),
) -> float:
    """
    Stieltjes integral of g against dF_E over [0, t], or over (lower, t] when
    `lower` is given. Atoms are summed exactly; densities go through adaptive
    quadrature. `points` are optional locations where g is not smooth.
    """
    lower_bound = -math.inf if lower is None else float(lower)
    if t <= lower_bound:
        return 0.0

    if dist.is_discrete:
        values, probs = dist.atoms()
        mask = (values > lower_bound) & (values <= t)
        if not mask.any():
            return 0.0
        weights = np.asarray(g(values[mask]), dtype=float) * np.ones(mask.sum())
        return float(np.dot(weights, probs[mask]))

    a = max(lower_bound, 0.0)
    b = min(float(t), dist.support_upper)
    if b <= a:
        return 0.0

    hints = sorted({float(p) for p in points if a < p < b})
    result = integrate.quad(
        lambda e: float(g(e)) * float(dist._pdf(e)),
        a,
        b,
        epsabs=settings.quad_epsabs,
        epsrel=settings.quad_epsrel,
        limit=settings.quad_limit,
        points=hints or None,
        full_output=1,
    )
    value, abserr = result[0], result[1]
    if len(result) > 3:
        tolerance = max(settings.quad_epsabs, settings.quad_epsrel * abs(value))
        if abserr > 10 * tolerance:
            raise NumericalError(
                "Quadrature against the exposure density did not converge",
                diagnostics={
                    "interval": (a, b),
                    "value": value,
                    "abserr": abserr,
                    "neval": result[2].get("neval"),
                    "message": result[3],
                },
            )
        logger.debug(f"Accepted quadrature on [{a}, {b}] with abserr={abserr:.3e}: {result[3]}")
    return float(value)


def conditional_mean_below(dist: ExposureDistribution, t: float) -> float:
    """E(E | E <= t); requires F_E(t) > 0"""
    mass = cdf(dist, t)
    if mass <= 0:
        raise UndefinedConditionalError(
            "No exposure mass at or below t", diagnostics={"t": t}
        )

    if isinstance(dist, Exponential):
        x = dist.rate * t
        if x > 700:
            value = 1.0 / dist.rate
        else:
            value = 1.0 / dist.rate - t / math.expm1(x)
    elif isinstance(dist, PowerLawDensity):
        value = (dist.k + 1.0) / (dist.k + 2.0) * min(t, dist.horizon)
    else:
        value = integrate_against(dist, lambda e: e, t) / mass

    return min(max(value, 0.0), float(t))
