"""
Explicit convergence-bound constants and the sampled on-circle estimates.

For A, a projection P (Q = I - P) and delta > 0:

    r  = 2 ||A|| ||P - Q||          (spectrum of A + zP lies in two r-disks)
    R  = 2 (||A|| + delta) ||P - Q||
    C1 = R e^{t1 R} / delta
    C2 = R e^{t2 R} (||A|| + delta) / delta ||P|| sup_{|lambda|=R} ||M(lambda)||,
    M(lambda) = I + AQ R(lambda, QAQ)

and for Re z < -2R, t in [t1, t2]:

    ||e^{t(A+zP)} - e^{tQAQ}Q|| <= C1 e^{t1 Re z} + C2 / (|z| - R).

The check_* functions sample the intermediate estimates behind this bound
and return SuiteReports; they raise only when their own precondition on z or
t is violated.
"""
import math
from typing import Iterable, List, Optional

import numpy as np

from errors import (
    CirclesIntersectError,
    ExclusionDiskError,
    InsufficientDeltaError,
    ValidityRegionError,
)
from linalg_core import (
    DenseMatrix,
    ProjectionPair,
    as_dense,
    eigenvalues,
    identity,
    operator_norm,
    spectral_radius,
)
from observability import get_logger, get_metrics, track_metrics
from reports import SuiteReport
from resolvents import (
    exclusion_radius,
    inner_circle_integral,
    outer_circle_integral,
    resolvent_direct,
    resolvent_zp_closed,
)
from schemas import BoundParams
from workers import ordered_map

logger = get_logger("semigroup_lab.bounds")
metrics = get_metrics()

R_MARGIN = 1e-3
R_ABS_MARGIN = 1e-9
SUP_M_SAMPLES = 256
SUP_M_SAFETY = 1.05
CIRCLE_SLACK = 1e-9
OUTER_INTEGRAL_SLACK = 1e-6
FACTORIZATION_TOL = 1e-9
IDENTITY_TOL = 1e-12
LOCALIZATION_TOL = 1e-7
# exp() beyond this overflows a double
_EXP_LIMIT = 709.0


def _exp(x: float) -> float:
    return math.inf if x > _EXP_LIMIT else math.exp(x)


def circle_points(center: complex, radius: float, samples: int) -> List[complex]:
    """`samples` equispaced points on |lambda - center| = radius, starting at angle 0."""
    theta = 2.0 * np.pi * np.arange(samples) / samples
    return [complex(center + radius * np.exp(1j * th)) for th in theta]


def _qaq(a: DenseMatrix, pq: ProjectionPair) -> DenseMatrix:
    return pq.q @ a @ pq.q


# ============================================================================
# delta / R selection
# ============================================================================

def smallest_admissible_delta(
    norm_a: float,
    norm_p_minus_q: float,
    rho: float,
    norm_qaq: Optional[float] = None,
    margin: float = R_MARGIN
) -> float:
    """
    First delta in max(1, ||A||) * 2^k, k = 0, 1, ..., whose radius
    R = 2 (||A|| + delta) ||P - Q|| clears rho (1 + margin) + 1e-9, and
    ||QAQ|| (1 + margin) as well when norm_qaq is given.
    """
    base = max(1.0, norm_a)
    k = 0
    while True:
        delta = base * 2.0 ** k
        big_r = 2.0 * (norm_a + delta) * norm_p_minus_q
        clears_rho = big_r >= rho * (1.0 + margin) + R_ABS_MARGIN
        clears_norm = norm_qaq is None or big_r > norm_qaq * (1.0 + margin)
        if clears_rho and clears_norm:
            return delta
        k += 1


def select_delta(a: DenseMatrix, pq: ProjectionPair, strict_norm_mode: bool = False) -> float:
    """Smallest doubling-sequence delta whose R clears the spectrum of QAQ."""
    a = as_dense(a)
    qaq = _qaq(a, pq)
    rho = spectral_radius(qaq)
    norm_qaq = operator_norm(qaq) if strict_norm_mode else None
    delta = smallest_admissible_delta(operator_norm(a), pq.norm_p_minus_q, rho, norm_qaq)
    logger.debug("Selected delta", delta=delta, rho_qaq=rho, strict=strict_norm_mode)
    return delta


def sample_sup_m(
    a: DenseMatrix,
    pq: ProjectionPair,
    big_r: float,
    samples: int = SUP_M_SAMPLES,
    max_workers: int = 1
) -> float:
    """max of ||I + AQ R(lambda, QAQ)|| over `samples` points of |lambda| = R."""
    a = as_dense(a)
    aq = a @ pq.q
    qaq = _qaq(a, pq)
    eye = identity(pq.dim)

    def m_norm(lam: complex) -> float:
        return operator_norm(eye + aq @ resolvent_direct(lam, qaq))

    return max(ordered_map(m_norm, circle_points(0.0, big_r, samples), max_workers))


def neumann_sup_m_estimate(a: DenseMatrix, pq: ProjectionPair, big_r: float) -> Optional[float]:
    """
    Closed upper estimate 1 + ||AQ|| / (R - ||QAQ||) of sup ||M(lambda)||.

    Valid when R > ||QAQ||, since then ||R(lambda, QAQ)|| <= 1 / (R - ||QAQ||)
    on |lambda| = R; None otherwise.
    """
    a = as_dense(a)
    norm_qaq = operator_norm(_qaq(a, pq))
    if big_r <= norm_qaq:
        return None
    return 1.0 + operator_norm(a @ pq.q) / (big_r - norm_qaq)


@track_metrics(metrics, "bounds.compute_bound_params", timed=True)
def compute_bound_params(
    a: DenseMatrix,
    pq: ProjectionPair,
    t1: float,
    t2: float,
    delta: float,
    m_samples: int = SUP_M_SAMPLES,
    max_workers: int = 1
) -> BoundParams:
    """Fill every constant of the bound for the window [t1, t2]."""
    if not 0 < t1 <= t2:
        raise ValueError(f"need 0 < t1 <= t2, got t1={t1}, t2={t2}")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    a = as_dense(a)
    norm_a = operator_norm(a)
    npq = pq.norm_p_minus_q
    r = 2.0 * norm_a * npq
    big_r = 2.0 * (norm_a + delta) * npq
    rho = spectral_radius(_qaq(a, pq))
    if big_r <= rho + R_ABS_MARGIN * (1.0 + big_r):
        raise InsufficientDeltaError(f"R={big_r:.6g} does not exceed spectral radius {rho:.6g} of QAQ")

    sup_m_raw = sample_sup_m(a, pq, big_r, m_samples, max_workers)
    sup_m = SUP_M_SAFETY * sup_m_raw
    ratio = (norm_a + delta) / delta
    bp = BoundParams(
        delta=delta,
        r=r,
        big_r=big_r,
        t1=t1,
        t2=t2,
        c1=big_r * _exp(t1 * big_r) / delta,
        c2=big_r * _exp(t2 * big_r) * ratio * pq.norm_p * sup_m,
        sup_m=sup_m,
        sup_m_raw=sup_m_raw,
        sup_m_neumann=neumann_sup_m_estimate(a, pq, big_r),
        m_samples=m_samples,
        norm_a=norm_a,
        norm_p=pq.norm_p,
        norm_p_minus_q=npq,
        rho_qaq=rho,
        r_margin=R_MARGIN,
    )
    logger.info("Bound constants computed", delta=delta, big_r=big_r, c1=bp.c1, c2=bp.c2, sup_m_raw=sup_m_raw)
    return bp


def convergence_bound(bp: BoundParams, z: complex, t: float) -> float:
    """
    C1 e^{t1 Re z} + C2 / (|z| - R), valid for Re z < -2R and t in [t1, t2].

    The first term is evaluated as (R / delta) e^{t1 (R + Re z)}, which stays
    finite when C1 itself overflows. An overflowed C2 gives an infinite bound.
    """
    z = complex(z)
    if not z.real < -2.0 * bp.big_r:
        raise ValidityRegionError("z not in validity region", f"Re z={z.real:.6g} >= -2R={-2.0 * bp.big_r:.6g}")
    if not bp.t1 <= t <= bp.t2:
        raise ValidityRegionError("t outside window", f"t={t} not in [{bp.t1}, {bp.t2}]")
    first = math.exp(math.log(bp.big_r / bp.delta) + bp.t1 * (bp.big_r + z.real))
    return first + bp.c2 / (abs(z) - bp.big_r)


def in_validity_region(bp: BoundParams, z: complex, t: float) -> bool:
    return complex(z).real < -2.0 * bp.big_r and bp.t1 <= t <= bp.t2


# ============================================================================
# Sampled estimates
# ============================================================================

def _require_disjoint(z: complex, big_r: float):
    if not abs(z) > 2.0 * big_r:
        raise CirclesIntersectError(f"|z|={abs(z):.6g} <= 2R={2.0 * big_r:.6g}")


def check_resolvent_decay(
    pq: ProjectionPair,
    z: complex,
    alpha: float,
    lambdas: Iterable[complex]
) -> SuiteReport:
    """
    alpha ||R(lambda, zP)|| < 1 whenever lambda is farther than
    r_alpha = 2 alpha ||P - Q|| from both 0 and z.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    report = SuiteReport("resolvent_decay")
    r_alpha = 2.0 * alpha * pq.norm_p_minus_q
    for lam in lambdas:
        if abs(lam) <= r_alpha or abs(lam - z) <= r_alpha:
            raise ExclusionDiskError(f"lambda={lam} within r_alpha={r_alpha:.6g} of 0 or z={z}")
        value = alpha * operator_norm(resolvent_zp_closed(lam, z, pq))
        report.record(value, 1.0, strict=True, lam=lam, z=z, alpha=alpha)
    return report


def check_outer_resolvent(
    a: DenseMatrix,
    pq: ProjectionPair,
    z: complex,
    bp: BoundParams,
    samples: int = 64,
    max_workers: int = 1
) -> SuiteReport:
    """||R(lambda, A + zP)|| <= 1/delta on |lambda - z| = R."""
    a = as_dense(a)
    _require_disjoint(z, bp.big_r)
    shifted = a + z * pq.p
    lambdas = circle_points(z, bp.big_r, samples)
    norms = ordered_map(lambda lam: operator_norm(resolvent_direct(lam, shifted)), lambdas, max_workers)

    report = SuiteReport("outer_resolvent")
    limit = (1.0 + CIRCLE_SLACK) / bp.delta
    for lam, value in zip(lambdas, norms):
        report.record(value, limit, lam=lam, z=z)
    return report


def check_outer_integral(
    a: DenseMatrix,
    pq: ProjectionPair,
    z: complex,
    bp: BoundParams,
    t: float,
    max_workers: int = 1
) -> SuiteReport:
    """||outer integral|| <= R e^{t (Re z + R)} / delta for Re z < -2R, t >= t1."""
    z = complex(z)
    if not z.real < -2.0 * bp.big_r:
        raise ValidityRegionError("z not in validity region", f"Re z={z.real:.6g}")
    if t < bp.t1:
        raise ValidityRegionError("t outside window", f"t={t} < t1={bp.t1}")
    outer = outer_circle_integral(t, a, z, pq, bp, max_workers)

    report = SuiteReport("outer_integral")
    limit = bp.big_r * _exp(t * (z.real + bp.big_r)) / bp.delta * (1.0 + OUTER_INTEGRAL_SLACK)
    report.record(operator_norm(outer), limit, z=z, t=t)
    return report


def check_inner_factorization(
    a: DenseMatrix,
    pq: ProjectionPair,
    z: complex,
    bp: BoundParams,
    samples: int = 64,
    max_workers: int = 1
) -> SuiteReport:
    """R(lambda, A+zP) - R(lambda, QAQ) Q = R(lambda, A+zP) P M(lambda) on |lambda| = R."""
    a = as_dense(a)
    _require_disjoint(z, bp.big_r)
    shifted = a + z * pq.p
    qaq = _qaq(a, pq)
    aq = a @ pq.q
    eye = identity(pq.dim)

    def residual(lam: complex):
        r_full = resolvent_direct(lam, shifted)
        r_qaq = resolvent_direct(lam, qaq)
        m = eye + aq @ r_qaq
        lhs = r_full - r_qaq @ pq.q
        rhs = r_full @ pq.p @ m
        scale = (
            1.0 + operator_norm(r_full) * pq.norm_p * operator_norm(m)
            + operator_norm(r_qaq) * pq.norm_q
        )
        return operator_norm(lhs - rhs), scale

    lambdas = circle_points(0.0, bp.big_r, samples)
    report = SuiteReport("inner_factorization")
    for lam, (value, scale) in zip(lambdas, ordered_map(residual, lambdas, max_workers)):
        report.record(value, FACTORIZATION_TOL * scale, lam=lam, z=z)
    return report


def check_inner_resolvent_p(
    a: DenseMatrix,
    pq: ProjectionPair,
    z: complex,
    bp: BoundParams,
    samples: int = 64,
    max_workers: int = 1
) -> SuiteReport:
    """
    ||R(lambda, A+zP) P|| <= (||A|| + delta) / delta ||P|| / |lambda - z| on
    |lambda| = R, together with R(lambda, zP) P = P / (lambda - z).
    """
    a = as_dense(a)
    _require_disjoint(z, bp.big_r)
    shifted = a + z * pq.p
    ratio = (bp.norm_a + bp.delta) / bp.delta
    identity_tol = IDENTITY_TOL * max(1.0, pq.norm_p) ** 2

    def measure(lam: complex):
        value = operator_norm(resolvent_direct(lam, shifted) @ pq.p)
        defect = operator_norm(resolvent_zp_closed(lam, z, pq) @ pq.p - pq.p / (lam - z))
        return value, defect * abs(lam - z)

    lambdas = circle_points(0.0, bp.big_r, samples)
    report = SuiteReport("inner_resolvent_p")
    for lam, (value, defect) in zip(lambdas, ordered_map(measure, lambdas, max_workers)):
        limit = ratio * pq.norm_p / abs(lam - z) * (1.0 + CIRCLE_SLACK)
        if report.record(value, limit, lam=lam, z=z):
            # the identity is checked relative to 1 / |lambda - z|
            if defect > identity_tol:
                report.fail("R(lambda, zP) P != P / (lambda - z)", lam=lam, defect=defect)
    return report


def check_inner_integral(
    a: DenseMatrix,
    pq: ProjectionPair,
    z: complex,
    bp: BoundParams,
    t: float,
    max_workers: int = 1
) -> SuiteReport:
    """||inner integral|| <= sup_m R e^{t2 R} (||A|| + delta) / delta ||P|| / (|z| - R), |t| <= t2."""
    _require_disjoint(z, bp.big_r)
    if abs(t) > bp.t2:
        raise ValidityRegionError("t outside window", f"|t|={abs(t)} > t2={bp.t2}")
    inner = inner_circle_integral(t, a, z, pq, bp, max_workers)

    report = SuiteReport("inner_integral")
    limit = (
        bp.sup_m * bp.big_r * _exp(bp.t2 * bp.big_r)
        * (bp.norm_a + bp.delta) / bp.delta * bp.norm_p / (abs(z) - bp.big_r)
    )
    report.record(operator_norm(inner), limit * (1.0 + CIRCLE_SLACK), z=z, t=t)
    return report


def check_spectrum_localization(a: DenseMatrix, pq: ProjectionPair, z: complex) -> SuiteReport:
    """Every eigenvalue of A + zP lies in the closed r-disks around 0 and z."""
    a = as_dense(a)
    r = exclusion_radius(operator_norm(a), pq)
    tol = LOCALIZATION_TOL * (1.0 + abs(z))
    report = SuiteReport("spectrum_localization")
    for lam in eigenvalues(a + z * pq.p).eigenvalues:
        excess = max(0.0, min(abs(lam), abs(lam - z)) - r)
        report.record(excess, tol, lam=lam, z=z, r=r)
    return report
