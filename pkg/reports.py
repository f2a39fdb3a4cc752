"""
Check and suite reports.

A report never raises on a failed inequality: it collects the measured over
allowed ratio of every sample and names the samples that broke the check.
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List

# failures kept verbatim; the count keeps going
MAX_LISTED_FAILURES = 20


class CheckStatus(Enum):
    """Outcome of a check or suite."""
    PASSED = "passed"
    FAILED = "failed"
    WARNING = "warning"


def _render(value: Any) -> Any:
    if isinstance(value, complex):
        return f"{value.real:.17g}{value.imag:+.17g}i"
    if isinstance(value, float):
        return float(f"{value:.17g}")
    return value


@dataclass
class SuiteReport:
    """
    Result of one named check.

    Soft reports (observed behaviour the theory does not promise) end in
    WARNING instead of FAILED.
    """
    name: str
    soft: bool = False
    status: CheckStatus = CheckStatus.PASSED
    checked: int = 0
    failure_count: int = 0
    max_ratio: float = 0.0
    failures: List[Dict[str, Any]] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status is not CheckStatus.FAILED

    def record(self, value: float, limit: float, strict: bool = False, **context) -> bool:
        """
        Register one sample of `value <= limit` (`<` when strict).

        Returns whether the sample passed.
        """
        self.checked += 1
        if limit > 0:
            ratio = value / limit
        else:
            ratio = 0.0 if value == 0 else math.inf
        if ratio == ratio:
            self.max_ratio = max(self.max_ratio, ratio)
        ok = (value < limit) if strict else (value <= limit)
        if not ok or value != value:
            self._add_failure(value=value, limit=limit, **context)
            return False
        return True

    def fail(self, message: str, **context):
        """Register a failure that is not a value/limit comparison."""
        self.checked += 1
        self._add_failure(message=message, **context)

    def _add_failure(self, **context):
        self.failure_count += 1
        if len(self.failures) < MAX_LISTED_FAILURES:
            self.failures.append({k: _render(v) for k, v in context.items()})
        self.status = CheckStatus.WARNING if self.soft else CheckStatus.FAILED

    def merge(self, other: 'SuiteReport') -> 'SuiteReport':
        """Fold a sub-report (e.g. one instance) into this one."""
        self.checked += other.checked
        self.max_ratio = max(self.max_ratio, other.max_ratio)
        for failure in other.failures:
            if len(self.failures) < MAX_LISTED_FAILURES:
                self.failures.append({"check": other.name, **failure})
        self.failure_count += other.failure_count
        if other.status is CheckStatus.FAILED and not self.soft:
            self.status = CheckStatus.FAILED
        elif other.status is not CheckStatus.PASSED and self.status is CheckStatus.PASSED:
            self.status = CheckStatus.WARNING
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "status": self.status.value,
            "checked": self.checked,
            "failure_count": self.failure_count,
            "max_ratio": _render(float(self.max_ratio)),
            "failures": self.failures,
            "details": {k: _render(v) for k, v in self.details.items()},
        }

    def to_row(self) -> Dict[str, str]:
        """Flat string row for the reports CSV."""
        first = self.failures[0] if self.failures else {}
        return {
            "name": self.name,
            "status": self.status.value,
            "checked": str(self.checked),
            "failure_count": str(self.failure_count),
            "max_ratio": f"{self.max_ratio:.17g}",
            "first_failure": " ".join(f"{k}={v}" for k, v in first.items()),
        }

    def summary_line(self) -> str:
        mark = {
            CheckStatus.PASSED: "PASS",
            CheckStatus.FAILED: "FAIL",
            CheckStatus.WARNING: "WARN",
        }[self.status]
        line = f"[{mark}] {self.name:<32} checked={self.checked:<6} max_ratio={self.max_ratio:.3e}"
        if self.failure_count:
            line += f" failures={self.failure_count}"
        return line
