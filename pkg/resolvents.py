"""
Resolvents and contour-integral functional calculus.

Three resolvent routes (direct LU, closed form for zP, Neumann series around
zP) and trapezoidal Cauchy integrals over positively oriented circles,
including the split of e^{t(A+zP)} - e^{tQAQ}Q into one integral around z and
one around 0.
"""
import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from errors import (
    CirclesIntersectError,
    ContourEnclosureError,
    ExclusionDiskError,
    NeumannDivergenceError,
    QuadratureError,
    ResolventPoleError,
)
from linalg_core import (
    EPS,
    DenseMatrix,
    ProjectionPair,
    as_dense,
    eigenvalues,
    frobenius_norm,
    identity,
    operator_norm,
    solve_linear,
)
from observability import get_logger, get_metrics, track_metrics
from schemas import BoundParams
from workers import ordered_map

logger = get_logger("semigroup_lab.resolvents")
metrics = get_metrics()

POLE_TOL = 1e-14
DEFAULT_NODES = 32
MAX_NODES = 4096
QUADRATURE_REL_TOL = 1e-10
# rounding floor of an N-node sum, N <= 4096
QUADRATURE_NOISE_FACTOR = 64.0
ENCLOSURE_MARGIN = 1e-6

Integrand = Callable[[complex], DenseMatrix]


# ============================================================================
# Resolvents
# ============================================================================

@track_metrics(metrics, "resolvent.direct")
def resolvent_direct(lam: complex, b: DenseMatrix) -> DenseMatrix:
    """R(lam, b) = (lam I - b)^{-1} by a pivoted solve against I."""
    n = b.shape[0]
    eye = identity(n)
    return solve_linear(lam * eye - b, eye)


def resolvent_zp_closed(
    lam: complex,
    z: complex,
    pq: ProjectionPair,
    long_form: bool = False
) -> DenseMatrix:
    """
    Closed-form resolvent of zP.

    Short form (lam - zQ) / (lam (lam - z)); `long_form` evaluates the
    symmetric three-term expression
    (1/lam + 1/(lam - z) + z (P - Q) / (lam (lam - z))) / 2 instead.
    """
    if abs(lam) <= POLE_TOL or abs(lam - z) <= POLE_TOL:
        raise ResolventPoleError(f"lambda={lam} coincides with 0 or z={z}")
    eye = identity(pq.dim)
    denom = lam * (lam - z)
    if long_form:
        scalar = 0.5 * (1.0 / lam + 1.0 / (lam - z))
        return scalar * eye + (0.5 * z / denom) * (pq.p - pq.q)
    return (lam * eye - z * pq.q) / denom


def exclusion_radius(norm_a: float, pq: ProjectionPair) -> float:
    """r = 2 ||A|| ||P - Q||: the spectrum of A + zP sits in two disks of this radius."""
    return 2.0 * norm_a * pq.norm_p_minus_q


def resolvent_neumann(
    lam: complex,
    a: DenseMatrix,
    z: complex,
    pq: ProjectionPair,
    tol: float = 1e-12
) -> DenseMatrix:
    """
    R(lam, A + zP) as the series sum_k (R(lam, zP) A)^k R(lam, zP).

    Requires lam outside both closed disks of radius r around 0 and z. The
    partial sum stops once the geometric tail q^{k+1} / (1 - q) ||R(lam, zP)||
    is at most tol, with q = ||R(lam, zP) A||.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = as_dense(a)
    r = exclusion_radius(operator_norm(a), pq)
    if abs(lam) <= r or abs(lam - z) <= r:
        raise ExclusionDiskError(f"|lambda|={abs(lam):.6g}, |lambda-z|={abs(lam - z):.6g}, r={r:.6g}")

    rz = resolvent_zp_closed(lam, z, pq)
    step = rz @ a
    ratio = operator_norm(step)
    if ratio >= 1.0:
        raise NeumannDivergenceError(f"q={ratio:.6g}")

    norm_rz = operator_norm(rz)
    total = rz.copy()
    term = rz
    k = 0
    while ratio > 0.0 and ratio ** (k + 1) / (1.0 - ratio) * norm_rz > tol:
        term = step @ term
        total = total + term
        k += 1
    logger.debug("Neumann series truncated", terms=k + 1, ratio=round(ratio, 6))
    return total


# ============================================================================
# Contours
# ============================================================================

@dataclass(frozen=True)
class Contour:
    """Positively oriented circle with an N-node trapezoidal rule (N = 2^m >= 8)."""
    center: complex
    radius: float
    nodes: int = DEFAULT_NODES

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"contour radius must be positive, got {self.radius}")
        if self.nodes < 8 or self.nodes & (self.nodes - 1):
            raise ValueError(f"node count must be a power of two >= 8, got {self.nodes}")
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))

    def angles(self, count: int, odd_only: bool = False) -> np.ndarray:
        """theta_j = 2 pi j / count; with odd_only, only the odd j (refinement nodes)."""
        j = np.arange(1, count, 2) if odd_only else np.arange(count)
        return 2.0 * np.pi * j / count


@track_metrics(metrics, "resolvent.contour_integral", timed=True)
def contour_integral(
    f: Integrand,
    c: Contour,
    max_nodes: int = MAX_NODES,
    rel_tol: float = QUADRATURE_REL_TOL,
    max_workers: int = 1
) -> DenseMatrix:
    """
    (1 / 2 pi i) times the contour integral of f over c, by the trapezoidal rule.

    With lambda_j = center + radius e^{i theta_j} the N-node rule reads
    (radius / N) sum_j e^{i theta_j} f(lambda_j). The node count doubles
    (reusing old nodes) until two successive estimates differ by at most
    rel_tol (1 + ||estimate||), or by the rounding floor of the sum when that
    is larger. Node evaluations may run on worker threads; the sum is always
    taken in node order.
    """
    def weighted(theta: float) -> DenseMatrix:
        w = complex(np.exp(1j * theta))
        return w * f(c.center + c.radius * w)

    n = c.nodes
    samples = ordered_map(weighted, c.angles(n), max_workers)
    raw_sum = np.sum(np.stack(samples), axis=0)
    peak = max(frobenius_norm(s) for s in samples)
    estimate = c.radius * raw_sum / n

    while 2 * n <= max_nodes:
        fresh = ordered_map(weighted, c.angles(2 * n, odd_only=True), max_workers)
        raw_sum = raw_sum + np.sum(np.stack(fresh), axis=0)
        peak = max(peak, max(frobenius_norm(s) for s in fresh))
        n *= 2
        refined = c.radius * raw_sum / n

        change = operator_norm(refined - estimate)
        floor = QUADRATURE_NOISE_FACTOR * EPS * c.radius * peak
        allowed = max(rel_tol * (1.0 + operator_norm(refined)), floor)
        estimate = refined
        if change <= allowed:
            logger.debug("Quadrature converged", nodes=n, change=change)
            return refined

    raise QuadratureError(f"no agreement within tolerance at {n} nodes")


def contour_exp(
    t: float,
    b: DenseMatrix,
    c: Contour,
    max_workers: int = 1
) -> DenseMatrix:
    """e^{tb} as the Cauchy integral of e^{t lambda} R(lambda, b) over c."""
    b = as_dense(b)
    spectrum = eigenvalues(b).eigenvalues
    inner_radius = c.radius * (1.0 - ENCLOSURE_MARGIN)
    outside = [lam for lam in spectrum if abs(lam - c.center) > inner_radius]
    if outside:
        raise ContourEnclosureError(f"eigenvalue {outside[0]} not inside circle |lambda - {c.center}| = {c.radius}")

    return contour_integral(
        lambda lam: np.exp(t * lam) * resolvent_direct(lam, b),
        c,
        max_workers=max_workers,
    )


# ============================================================================
# Two-circle split
# ============================================================================

def _require_disjoint(z: complex, big_r: float):
    if not abs(z) > 2.0 * big_r:
        raise CirclesIntersectError(f"|z|={abs(z):.6g} <= 2R={2.0 * big_r:.6g}")


def outer_circle_integral(
    t: float,
    a: DenseMatrix,
    z: complex,
    pq: ProjectionPair,
    bp: BoundParams,
    max_workers: int = 1
) -> DenseMatrix:
    """Integral of e^{t lambda} R(lambda, A + zP) over |lambda - z| = R."""
    a = as_dense(a)
    _require_disjoint(z, bp.big_r)
    shifted = a + z * pq.p
    return contour_integral(
        lambda lam: np.exp(t * lam) * resolvent_direct(lam, shifted),
        Contour(center=z, radius=bp.big_r),
        max_workers=max_workers,
    )


def inner_circle_integral(
    t: float,
    a: DenseMatrix,
    z: complex,
    pq: ProjectionPair,
    bp: BoundParams,
    max_workers: int = 1
) -> DenseMatrix:
    """Integral of e^{t lambda} [R(lambda, A + zP) - R(lambda, QAQ) Q] over |lambda| = R."""
    a = as_dense(a)
    _require_disjoint(z, bp.big_r)
    shifted = a + z * pq.p
    qaq = pq.q @ a @ pq.q

    def integrand(lam: complex) -> DenseMatrix:
        diff = resolvent_direct(lam, shifted) - resolvent_direct(lam, qaq) @ pq.q
        return np.exp(t * lam) * diff

    return contour_integral(integrand, Contour(center=0.0, radius=bp.big_r), max_workers=max_workers)


def two_circle_split(
    t: float,
    a: DenseMatrix,
    z: complex,
    pq: ProjectionPair,
    bp: BoundParams,
    max_workers: int = 1
) -> Tuple[DenseMatrix, DenseMatrix]:
    """
    (outer, inner) with outer + inner = e^{t(A+zP)} - e^{tQAQ}Q.

    Needs |z| > 2R so that the circles |lambda - z| = R and |lambda| = R are
    disjoint.
    """
    _require_disjoint(z, bp.big_r)
    outer = outer_circle_integral(t, a, z, pq, bp, max_workers)
    inner = inner_circle_integral(t, a, z, pq, bp, max_workers)
    return outer, inner


def split_tolerance_scale(t: float, bp: BoundParams) -> float:
    """Natural size of the split integrals: R e^{|t| R} (||A|| + delta) / delta ||P||."""
    return (
        bp.big_r * math.exp(abs(t) * bp.big_r)
        * (bp.norm_a + bp.delta) / bp.delta * max(bp.norm_p, 1.0)
    )
