"""
Matrix exponentials and the limit semigroup t -> e^{tQAQ}Q.

expm uses scaling and squaring around a degree-16 Taylor core; the series
oracle is an independent plain Taylor summation with a certified tail.
"""
import math

import numpy as np

from errors import ExponentialOverflowError
from linalg_core import DenseMatrix, ProjectionPair, as_dense, frobenius_norm, identity
from observability import get_logger, get_metrics, track_metrics

logger = get_logger("semigroup_lab.expm")
metrics = get_metrics()

TAYLOR_DEGREE = 16
SCALED_NORM_TARGET = 0.5
# beyond this the squaring phase cannot stay finite in double precision
OVERFLOW_NORM = 1e300


def _squarings_for(norm: float, target: float) -> int:
    if norm <= target:
        return 0
    return int(math.ceil(math.log2(norm / target)))


def _square_repeatedly(e: DenseMatrix, times: int) -> DenseMatrix:
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(times):
            e = e @ e
            if not np.all(np.isfinite(e)) or frobenius_norm(e) > OVERFLOW_NORM:
                raise ExponentialOverflowError("intermediate norm left the floating-point range")
    return e


@track_metrics(metrics, "expm.expm")
def expm(b: DenseMatrix) -> DenseMatrix:
    """
    e^b by scaling and squaring.

    b is scaled by 2^-s so that ||b|| / 2^s <= 0.5 (Frobenius bound, hence
    also in operator norm); the truncated Taylor polynomial is evaluated by
    Horner's rule and squared s times.
    """
    b = as_dense(b)
    n = b.shape[0]
    norm = frobenius_norm(b)
    if not math.isfinite(norm):
        raise ExponentialOverflowError("input norm is not finite")
    s = _squarings_for(norm, SCALED_NORM_TARGET)
    x = b / (2.0 ** s)

    eye = identity(n)
    e = eye.copy()
    for k in range(TAYLOR_DEGREE, 0, -1):
        e = eye + (x @ e) / k
    return _square_repeatedly(e, s)


def expm_series_oracle(b: DenseMatrix, tol: float = 1e-14) -> DenseMatrix:
    """
    e^b by plain Taylor summation, independent of expm's Horner/Taylor core.

    b is scaled to norm <= 1, the series of the scaled matrix is summed until
    the geometric tail bound drops below tol * e^{||x||} / 2^{s+1}, and the
    result squared s times; the total truncation error is then bounded by
    about tol * e^{||b||}. A nilpotent matrix ends the series exactly.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = as_dense(b)
    n = b.shape[0]
    norm = frobenius_norm(b)
    s = _squarings_for(norm, 1.0)
    x = b / (2.0 ** s)
    x_norm = norm / (2.0 ** s)
    stage_tol = tol * math.exp(x_norm) / 2.0 ** (s + 1)

    total = identity(n)
    term = identity(n)
    k = 0
    while True:
        k += 1
        term = (x @ term) / k
        total = total + term
        if not np.any(term):
            break
        # ||sum_{j>k} x^j/j!|| <= ||x||^{k+1}/(k+1)! * 1/(1 - ||x||/(k+2))
        tail = x_norm ** (k + 1) / math.factorial(k + 1) / (1.0 - x_norm / (k + 2))
        if tail <= stage_tol:
            break
    logger.debug("Series oracle summed", terms=k, squarings=s)
    return _square_repeatedly(total, s)


def limit_semigroup(t: float, a: DenseMatrix, pq: ProjectionPair) -> DenseMatrix:
    """The degenerate limit semigroup e^{tQAQ}Q (any real t)."""
    a = as_dense(a)
    qaq = pq.q @ a @ pq.q
    return expm(t * qaq) @ pq.q
