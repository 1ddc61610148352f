"""
Treatment-effect curves as functions of time since exposure.

Every curve exposes the incremental effect delta(t) and the cumulative effect
Delta(t) = integral of delta over [0, t]. Times are continuous, in days.
"""

import logging
from typing import Annotated, List, Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, field_validator, model_validator
from scipy import integrate, special, stats

from metric_estimands.exceptions import DomainError

logger = logging.getLogger(__name__)

TimeLike = Union[float, np.ndarray]


class _Curve(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    def _incremental(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _cumulative(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _breakpoints(self) -> Tuple[float, ...]:
        return ()


class ExponentialDecay(_Curve):
    kind: Literal["exponential_decay"] = "exponential_decay"
    a: float = Field(..., description="Effect rate at exposure")
    b: float = Field(..., ge=0, description="Decay rate")

    def _incremental(self, t):
        return self.a * np.exp(-self.b * t)

    def _cumulative(self, t):
        if self.b == 0:
            return self.a * t
        return self.a / self.b * -np.expm1(-self.b * t)


class LinearTimesExp(_Curve):
    kind: Literal["linear_times_exp"] = "linear_times_exp"
    a: float = Field(..., description="Scale")
    b: float = Field(..., gt=0, description="Decay rate")

    def _incremental(self, t):
        return self.a * t * np.exp(-self.b * t)

    def _cumulative(self, t):
        x = self.b * t
        return self.a / self.b**2 * (-np.expm1(-x) - x * np.exp(-x))


class GammaPdfShape(_Curve):
    kind: Literal["gamma_pdf"] = "gamma_pdf"
    shape: float = Field(..., gt=0)
    rate: float = Field(..., gt=0)
    scale: float = Field(1.0, description="Multiplier on the gamma density")

    def _incremental(self, t):
        return self.scale * stats.gamma.pdf(t, a=self.shape, scale=1.0 / self.rate)

    def _cumulative(self, t):
        # regularized lower incomplete gamma; stable for large shapes
        return self.scale * special.gammainc(self.shape, self.rate * t)

    @property
    def mode(self) -> float:
        return max(self.shape - 1.0, 0.0) / self.rate


class StepConstant(_Curve):
    kind: Literal["step_constant"] = "step_constant"
    c: float = Field(..., description="Constant effect per unit time")
    t_end: float = Field(..., gt=0, description="Cutoff time")

    def _incremental(self, t):
        return np.where((t > 0) & (t < self.t_end), self.c, 0.0)

    def _cumulative(self, t):
        return self.c * np.minimum(t, self.t_end)

    def _breakpoints(self):
        return (self.t_end,)


class Tabulated(_Curve):
    kind: Literal["tabulated"] = "tabulated"
    grid: List[float] = Field(..., min_length=2, description="Strictly increasing times")
    values: List[float] = Field(..., min_length=2, description="delta at each grid time")
    interpolation: Literal["linear"] = "linear"

    @field_validator("grid")
    @classmethod
    def validate_grid(cls, v):
        """Grid must be non-negative and strictly increasing"""
        if v[0] < 0:
            raise ValueError("Grid times must be non-negative")
        if any(later <= earlier for earlier, later in zip(v, v[1:])):
            raise ValueError("Grid times must be strictly increasing")
        return v

    @model_validator(mode="after")
    def validate_lengths(self):
        if len(self.grid) != len(self.values):
            raise ValueError("grid and values must have the same length")
        return self

    def _incremental(self, t):
        return np.interp(t, self.grid, self.values, left=0.0, right=0.0)

    def _cumulative(self, t):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        knots = np.concatenate(([0.0], integrate.cumulative_trapezoid(values, grid)))
        clipped = np.clip(t, grid[0], grid[-1])
        idx = np.clip(np.searchsorted(grid, clipped, side="right") - 1, 0, len(grid) - 2)
        partial = 0.5 * (clipped - grid[idx]) * (values[idx] + np.interp(clipped, grid, values))
        return knots[idx] + partial

    def _breakpoints(self):
        return tuple(self.grid)


class Zero(_Curve):
    kind: Literal["zero"] = "zero"

    def _incremental(self, t):
        return np.zeros_like(t, dtype=float)

    def _cumulative(self, t):
        return np.zeros_like(t, dtype=float)


EffectCurve = Annotated[
    Union[ExponentialDecay, LinearTimesExp, GammaPdfShape, StepConstant, Tabulated, Zero],
    Field(discriminator="kind"),
]

curve_adapter = TypeAdapter(EffectCurve)


def parse_curve(data: dict) -> EffectCurve:
    """Build a curve from its JSON form, e.g. {"kind": "zero"}"""
    return curve_adapter.validate_python(data)


def _as_times(t: TimeLike, operation: str) -> np.ndarray:
    times = np.asarray(t, dtype=float)
    if np.any(np.isnan(times)) or np.any(times < 0):
        raise DomainError(
            f"{operation} is defined for non-negative time since exposure",
            diagnostics={"t": t if np.ndim(times) == 0 else "array"},
        )
    return times


def _like(t: TimeLike, result: np.ndarray) -> TimeLike:
    if np.ndim(t) == 0:
        return float(result)
    return np.asarray(result, dtype=float)


def incremental(curve: EffectCurve, t: TimeLike) -> TimeLike:
    """Incremental effect delta(t)"""
    return _like(t, curve._incremental(_as_times(t, "incremental")))


def cumulative(curve: EffectCurve, t: TimeLike) -> TimeLike:
    """Cumulative effect Delta(t); Delta(0) = 0 for every variant"""
    return _like(t, curve._cumulative(_as_times(t, "cumulative")))


def breakpoints(curve: EffectCurve) -> Tuple[float, ...]:
    """Times where delta is not smooth, used as quadrature hints"""
    return curve._breakpoints()


# Named curves used by the figures and built-in scenarios
FAST_DECAY = ExponentialDecay(a=0.1, b=0.1)
SLOW_RESPONSE = LinearTimesExp(a=0.04, b=0.2)
DGP1_EFFECT = ExponentialDecay(a=1.0, b=1.0)
DGP2_EFFECT = GammaPdfShape(shape=84.0, rate=14.0, scale=1.0)
