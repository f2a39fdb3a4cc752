"""
Dense complex matrix kernels: operator norm, pivoted solves, eigenvalues
and validated projection pairs.

The Banach space of the theory is modelled as C^n with the Euclidean norm, so
the operator norm is the largest singular value. Every DenseMatrix is a
square complex128 numpy array with finite entries.
"""
import math
from dataclasses import dataclass
from typing import List

import numpy as np
import numpy.typing as npt
from scipy import linalg as sla

from errors import (
    EigenvalueStalledError,
    NormComputationError,
    ProjectionError,
    SingularMatrixError,
)
from observability import get_logger, get_metrics, track_metrics

logger = get_logger("semigroup_lab.linalg")
metrics = get_metrics()

DenseMatrix = npt.NDArray[np.complex128]

EPS = float(np.finfo(float).eps)

# operator_norm
NORM_REL_TOL = 1e-12
NORM_MAX_ITER = 5000
NORM_START_SEED = 0x5EED

# solve_linear
PIVOT_REL_TOL = 1e-14

# eigenvalues
DEFLATION_REL_TOL = 1e-14
QR_ITER_PER_EIGENVALUE = 100
EXCEPTIONAL_SHIFT_EVERY = 11
EIGEN_CERT_REL_TOL = 1e-8

# make_projection_pair
PROJECTION_REL_TOL = 1e-10


def as_dense(b) -> DenseMatrix:
    """Coerce to a square, finite complex128 matrix (dim >= 1)."""
    arr = np.array(b, dtype=np.complex128)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ValueError(f"expected a square matrix with dim >= 1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


def identity(n: int) -> DenseMatrix:
    return np.eye(n, dtype=np.complex128)


def matrices_close(b: DenseMatrix, c: DenseMatrix, atol: float = 0.0) -> bool:
    """Entrywise equality within an absolute tolerance (0 means exact)."""
    b = np.asarray(b)
    c = np.asarray(c)
    if b.shape != c.shape:
        return False
    return bool(np.all(np.abs(b - c) <= atol))


def frobenius_norm(b: DenseMatrix) -> float:
    """Cheap upper bound for the operator norm (within a factor sqrt(n))."""
    return float(np.linalg.norm(b))


# ============================================================================
# Operator norm
# ============================================================================

@track_metrics(metrics, "linalg.operator_norm")
def operator_norm(b: DenseMatrix) -> float:
    """
    Largest singular value of b.

    Power iteration on B^H B from a seeded start; the Rayleigh quotient is
    accepted once the eigen-residual drops below NORM_REL_TOL relative.
    Falls back to a Hermitian eigensolver of B^H B when the iteration cap is
    hit (close top singular values).

    The iteration runs on b / max|b_ij|, so entries near the under- or
    overflow threshold keep full relative accuracy.
    """
    b = np.asarray(b, dtype=np.complex128)
    if not np.all(np.isfinite(b)):
        raise ValueError("matrix has non-finite entries")
    entry_max = float(np.max(np.abs(b))) if b.size else 0.0
    if entry_max == 0.0:
        return 0.0
    b = b / entry_max

    n = b.shape[1]
    rng = np.random.default_rng(NORM_START_SEED)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)

    bh = b.conj().T
    for _ in range(NORM_MAX_ITER):
        y = b @ x
        mu = float(np.vdot(y, y).real)
        if mu == 0.0:
            # start landed in the kernel; B^H of the largest column is not in it
            x = bh @ b[:, np.argmax(np.abs(b).sum(axis=0))]
            x /= np.linalg.norm(x)
            continue
        w = bh @ y
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            break
        residual = float(np.linalg.norm(w - mu * x))
        x = w / norm_w
        if residual <= NORM_REL_TOL * mu:
            return entry_max * math.sqrt(mu)

    logger.warning(
        "Power iteration hit its cap, using Hermitian eigensolver",
        dim=n, iterations=NORM_MAX_ITER
    )
    metrics.increment("linalg.operator_norm.fallback")
    top = float(np.max(np.linalg.eigvalsh(bh @ b)))
    if not math.isfinite(top):
        raise NormComputationError(f"dim={n}")
    return entry_max * math.sqrt(max(top, 0.0))


# ============================================================================
# Linear solves
# ============================================================================

@track_metrics(metrics, "linalg.solve_linear")
def solve_linear(b: DenseMatrix, rhs: DenseMatrix) -> DenseMatrix:
    """
    Solve b @ x = rhs by LU with row pivoting.

    A pivot of modulus <= PIVOT_REL_TOL * ||b||_F is treated as a singular
    system. ||b||_F lies between ||b|| and sqrt(n) ||b||, so the test is a
    little stricter than one against the operator norm.
    """
    b = np.asarray(b, dtype=np.complex128)
    rhs = np.asarray(rhs, dtype=np.complex128)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError(f"expected a square system matrix, got shape {b.shape}")
    if rhs.shape[0] != b.shape[0]:
        raise ValueError(f"rhs has {rhs.shape[0]} rows, system has {b.shape[0]}")

    lu, piv = sla.lu_factor(b, check_finite=True)
    pivots = np.abs(np.diag(lu))
    threshold = PIVOT_REL_TOL * frobenius_norm(b)
    smallest = float(pivots.min())
    if smallest <= threshold:
        raise SingularMatrixError(f"pivot {smallest:.3e} <= {threshold:.3e}")

    x = sla.lu_solve((lu, piv), rhs, check_finite=False)
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("solution has non-finite entries")
    return x


# ============================================================================
# Eigenvalues
# ============================================================================

@dataclass(frozen=True)
class SpectrumResult:
    """All eigenvalues with multiplicity, plus the certified residual."""
    eigenvalues: List[complex]
    backward_error: float

    @property
    def spectral_radius(self) -> float:
        return max((abs(lam) for lam in self.eigenvalues), default=0.0)


def _eig2x2(a: complex, b: complex, c: complex, d: complex) -> tuple:
    """Eigenvalues of [[a, b], [c, d]]; the small one via det / large one."""
    mean = 0.5 * (a + d)
    disc = np.sqrt(0.25 * (a - d) ** 2 + b * c)
    big = mean + disc if abs(mean + disc) >= abs(mean - disc) else mean - disc
    if big == 0:
        return 0j, 0j
    small = (a * d - b * c) / big
    return complex(big), complex(small)


def _wilkinson_shift(h: DenseMatrix, hi: int) -> complex:
    """Eigenvalue of the trailing 2x2 block closer to h[hi, hi]."""
    lam1, lam2 = _eig2x2(h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi])
    corner = h[hi, hi]
    return lam1 if abs(lam1 - corner) <= abs(lam2 - corner) else lam2


def _givens(x: complex, y: complex) -> tuple:
    """(c, s) such that [[conj(c), conj(s)], [-s, c]] @ [x, y] = [r, 0]."""
    r = math.hypot(abs(x), abs(y))
    if r == 0.0:
        return 1.0 + 0j, 0j
    return x / r, y / r


def _qr_sweep(h: DenseMatrix, lo: int, hi: int, shift: complex):
    """One shifted QR step H - mu = QR, H <- RQ + mu on the block lo..hi."""
    idx = np.arange(lo, hi + 1)
    h[idx, idx] -= shift

    rotations = []
    for k in range(lo, hi):
        c, s = _givens(h[k, k], h[k + 1, k])
        top = np.conj(c) * h[k, k:hi + 1] + np.conj(s) * h[k + 1, k:hi + 1]
        bottom = -s * h[k, k:hi + 1] + c * h[k + 1, k:hi + 1]
        h[k, k:hi + 1] = top
        h[k + 1, k:hi + 1] = bottom
        rotations.append((c, s))

    for k, (c, s) in zip(range(lo, hi), rotations):
        rows = slice(lo, k + 2)
        left = h[rows, k] * c + h[rows, k + 1] * s
        right = -h[rows, k] * np.conj(s) + h[rows, k + 1] * np.conj(c)
        h[rows, k] = left
        h[rows, k + 1] = right

    h[idx, idx] += shift


def _hessenberg_eigenvalues(h: DenseMatrix, norm_h: float) -> np.ndarray:
    n = h.shape[0]
    eigs = np.empty(n, dtype=np.complex128)
    deflation_tol = DEFLATION_REL_TOL * norm_h
    cap = QR_ITER_PER_EIGENVALUE * n

    hi = n - 1
    since_deflation = 0
    while hi >= 0:
        if hi == 0:
            eigs[0] = h[0, 0]
            break

        lo = hi
        while lo > 0:
            sub = abs(h[lo, lo - 1])
            if sub <= deflation_tol or sub <= EPS * (abs(h[lo, lo]) + abs(h[lo - 1, lo - 1])):
                h[lo, lo - 1] = 0.0
                break
            lo -= 1

        if lo == hi:
            eigs[hi] = h[hi, hi]
            hi -= 1
            since_deflation = 0
            continue
        if lo == hi - 1:
            eigs[hi - 1], eigs[hi] = _eig2x2(
                h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi]
            )
            hi -= 2
            since_deflation = 0
            continue

        if since_deflation >= cap:
            raise EigenvalueStalledError(f"no deflation at index {hi} after {cap} sweeps")
        since_deflation += 1

        if since_deflation % EXCEPTIONAL_SHIFT_EVERY == 0:
            shift = h[hi, hi] + 0.75 * abs(h[hi, hi - 1]) * np.exp(1j * since_deflation)
        else:
            shift = _wilkinson_shift(h, hi)
        _qr_sweep(h, lo, hi, shift)

    return eigs


@track_metrics(metrics, "linalg.eigenvalues")
def eigenvalues(b: DenseMatrix) -> SpectrumResult:
    """
    All eigenvalues of b with multiplicity.

    Unitary reduction to Hessenberg form, then complex shifted QR with
    Wilkinson shifts. Each eigenvalue is certified by the smallest singular
    value of (lambda I - b).
    """
    b = as_dense(b)
    n = b.shape[0]
    norm_b = operator_norm(b)

    if n == 1:
        eigs = np.array([b[0, 0]])
    else:
        h = sla.hessenberg(b)
        eigs = _hessenberg_eigenvalues(np.array(h, dtype=np.complex128), frobenius_norm(h))

    eye = identity(n)
    residuals = [float(sla.svdvals(lam * eye - b)[-1]) for lam in eigs]
    backward_error = max(residuals)
    if backward_error > EIGEN_CERT_REL_TOL * norm_b:
        raise EigenvalueStalledError(
            f"certification residual {backward_error:.3e} exceeds {EIGEN_CERT_REL_TOL:g} * ||B||"
        )

    ordered = sorted((complex(lam) for lam in eigs), key=lambda lam: (lam.real, lam.imag))
    return SpectrumResult(eigenvalues=ordered, backward_error=backward_error)


def spectral_radius(b: DenseMatrix) -> float:
    return eigenvalues(b).spectral_radius


# ============================================================================
# Projection pairs
# ============================================================================

@dataclass(frozen=True, eq=False)
class ProjectionPair:
    """A validated projection P with its complement Q = I - P and cached norms."""
    p: DenseMatrix
    q: DenseMatrix
    norm_p: float
    norm_q: float
    norm_p_minus_q: float

    @property
    def dim(self) -> int:
        return self.p.shape[0]

    @property
    def rank(self) -> int:
        # trace of a projection is its rank
        return int(round(float(np.trace(self.p).real)))


def make_projection_pair(p: DenseMatrix) -> ProjectionPair:
    """Validate idempotence of p and build (P, Q = I - P) with cached norms."""
    p = as_dense(p)
    norm_p = operator_norm(p)
    defect = operator_norm(p @ p - p)
    if defect > PROJECTION_REL_TOL * (1.0 + norm_p) ** 2:
        raise ProjectionError(f"||P^2 - P|| = {defect:.3e}")

    q = identity(p.shape[0]) - p
    p.setflags(write=False)
    q.setflags(write=False)
    return ProjectionPair(
        p=p,
        q=q,
        norm_p=norm_p,
        norm_q=operator_norm(q),
        norm_p_minus_q=operator_norm(p - q),
    )
