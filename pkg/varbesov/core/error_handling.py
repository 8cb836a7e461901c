# varbesov/core/error_handling.py
"""Exception hierarchy and error context records.

Every failure raised by the toolkit derives from :class:`VarBesovError`, so the
CLI can map the whole family onto exit codes in one place.
"""

import time
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

logger = logging.getLogger(__name__)


class ErrorSeverity(Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


@dataclass
class ErrorContext:
    error_type: str
    severity: ErrorSeverity
    message: str
    timestamp: float
    component: str
    recovery_suggestion: str


@dataclass(frozen=True)
class HypothesisViolation:
    """One unsatisfied hypothesis, phrased as the failing condition."""

    condition: str
    detail: str
    value: Optional[float] = None

    def __str__(self) -> str:
        if self.value is None:
            return f"{self.condition}: {self.detail}"
        return f"{self.condition}: {self.detail} (value {self.value:.6g})"


class VarBesovError(Exception):
    """Base exception for varbesov operations."""

    severity = ErrorSeverity.MEDIUM
    recovery_suggestion = "Check the inputs of the failing operation."

    def __init__(self, message: str, component: str = "varbesov"):
        super().__init__(message)
        self.context = ErrorContext(
            error_type=type(self).__name__,
            severity=self.severity,
            message=message,
            timestamp=time.time(),
            component=component,
            recovery_suggestion=self.recovery_suggestion,
        )


class GridError(VarBesovError):
    recovery_suggestion = "Use grid functions of equal dimension and spacing."


class ResolutionError(VarBesovError):
    severity = ErrorSeverity.HIGH
    recovery_suggestion = "Raise the grid level J or lower the level cap K."


class WeightError(VarBesovError):
    recovery_suggestion = "Weights must be positive and exponents admissible."


class MollifierError(VarBesovError):
    severity = ErrorSeverity.HIGH
    recovery_suggestion = "Lower M or widen the support radius."

    def __init__(self, message: str, condition_number: float = float("nan")):
        super().__init__(message, component="mollifier")
        self.condition_number = condition_number


class ExponentError(VarBesovError):
    recovery_suggestion = "Exponents must satisfy the stated range, e.g. s >= 1 for conjugates."


class ConfigError(VarBesovError):
    recovery_suggestion = "Fix the configuration file; see config/varbesov.yaml."


class HypothesisError(VarBesovError):
    """Raised when the hypotheses of an experiment do not hold."""

    severity = ErrorSeverity.CRITICAL
    recovery_suggestion = "Adjust parameters, or pass --force to run anyway (UNSAFE)."

    def __init__(self, violations: List[HypothesisViolation], component: str = "harness"):
        self.violations = list(violations)
        message = "; ".join(str(v) for v in self.violations) or "hypotheses not satisfied"
        super().__init__(message, component=component)


@dataclass
class ErrorLog:
    """Collects error contexts raised during a long experiment."""

    entries: List[ErrorContext] = field(default_factory=list)

    def record(self, error: VarBesovError) -> None:
        self.entries.append(error.context)
        level = logging.ERROR if error.context.severity in (
            ErrorSeverity.HIGH, ErrorSeverity.CRITICAL
        ) else logging.WARNING
        logger.log(level, "%s in %s: %s", error.context.error_type,
                   error.context.component, error.context.message)

    def __len__(self) -> int:
        return len(self.entries)
