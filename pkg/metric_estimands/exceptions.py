from typing import Any, Dict, Optional


class EstimandsError(Exception):
    """Base error for the toolkit; `detail` is the human readable message"""

    def __init__(self, detail: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(detail)
        self.detail = detail
        self.diagnostics = diagnostics or {}

    def __str__(self) -> str:
        if not self.diagnostics:
            return self.detail
        extras = ", ".join(f"{key}={value}" for key, value in self.diagnostics.items())
        return f"{self.detail} ({extras})"


class DomainError(EstimandsError, ValueError):
    """Argument outside the domain of a curve, window or time"""


class UndefinedConditionalError(EstimandsError):
    """Conditional expectation given E <= t requested where F_E(t) = 0"""


class UndefinedEstimandError(EstimandsError):
    """Estimand requested where no user has been exposed"""


class UnsupportedDistributionError(EstimandsError):
    """Operation only defined for discrete exposure distributions"""


class NumericalError(EstimandsError):
    """Quadrature did not converge"""


class OutOfRangeError(EstimandsError, ValueError):
    """Analysis time beyond the panel horizon"""


class InsufficientDataError(EstimandsError):
    """Too few measured users in a treatment group"""

    def __init__(self, detail: str, group: int, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(detail, diagnostics)
        self.group = group


class DegenerateVarianceError(EstimandsError):
    """Zero variance of the mean difference"""


class ConfigurationError(EstimandsError):
    """Scenario is valid JSON but cannot be executed"""
