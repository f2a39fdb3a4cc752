"""
Semigroup Lab error types.

Every numerical failure the lab can report has its own exception class so
that callers (sweeps, suites, the CLI) can decide whether to flag, skip or
abort. The message prefix of each class is stable and is what the CLI shows.
"""
from typing import Optional


class SemigroupLabError(Exception):
    """Base class for all numerical failures raised by the lab."""

    prefix = "semigroup lab error"

    def __init__(self, detail: Optional[str] = None):
        self.detail = detail
        message = self.prefix if not detail else f"{self.prefix}: {detail}"
        super().__init__(message)


class NormComputationError(SemigroupLabError):
    prefix = "norm computation failed"


class SingularMatrixError(SemigroupLabError):
    prefix = "singular or near-singular"


class EigenvalueStalledError(SemigroupLabError):
    prefix = "eigenvalue iteration stalled"


class ProjectionError(SemigroupLabError):
    prefix = "not a projection"


class ExponentialOverflowError(SemigroupLabError):
    prefix = "exponential overflow"


class ResolventPoleError(SemigroupLabError):
    prefix = "resolvent pole"


class ExclusionDiskError(SemigroupLabError):
    prefix = "lambda inside exclusion disks"


class NeumannDivergenceError(SemigroupLabError):
    prefix = "Neumann ratio not contractive"


class QuadratureError(SemigroupLabError):
    prefix = "quadrature not converged"


class ContourEnclosureError(SemigroupLabError):
    prefix = "contour does not encircle spectrum"


class CirclesIntersectError(SemigroupLabError):
    prefix = "circles intersect"


class InsufficientDeltaError(SemigroupLabError):
    prefix = "delta insufficient"


class ValidityRegionError(SemigroupLabError):
    """Raised with the exact reason, e.g. 'z not in validity region'."""

    prefix = "outside validity region"

    def __init__(self, reason: str, detail: Optional[str] = None):
        self.prefix = reason
        super().__init__(detail)
