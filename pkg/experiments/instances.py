"""
Problem instances: seeded random (A, P) pairs and the fixed closed-form ones.
"""
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from linalg_core import DenseMatrix, ProjectionPair, identity, make_projection_pair, operator_norm, solve_linear
from schemas import ProjectionKind, SweepConfig

# ||S - I|| for the oblique similarity; cond(S) <= (1 + skew) / (1 - skew)
DEFAULT_SKEW = 0.5


@dataclass(frozen=True, eq=False)
class Instance:
    """One (A, P) pair with the seed and kind it was built from."""
    seed: int
    a: DenseMatrix
    pq: ProjectionPair
    kind: str

    @property
    def dim(self) -> int:
        return self.a.shape[0]


def _complex_gaussian(rng: np.random.Generator, n: int) -> DenseMatrix:
    return (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)


def _oblique_with_norm(rng: np.random.Generator, dim: int, m: int, p_norm: float) -> DenseMatrix:
    # ||[[I, X], [0, 0]]|| = sqrt(1 + ||X||^2)
    x = np.zeros((m, dim - m), dtype=np.complex128)
    if p_norm > 1:
        g = rng.standard_normal((m, dim - m)) + 1j * rng.standard_normal((m, dim - m))
        x = g * (math.sqrt(p_norm ** 2 - 1.0) / operator_norm(g))
    block = np.zeros((dim, dim), dtype=np.complex128)
    block[:m, :m] = np.eye(m)
    block[:m, m:] = x
    u, _ = np.linalg.qr(_complex_gaussian(rng, dim))
    return u @ block @ u.conj().T


def random_instance(
    seed: int,
    dim: int,
    kind: ProjectionKind = ProjectionKind.ORTHOGONAL_COORDINATE,
    scale: float = 1.0,
    skew: float = DEFAULT_SKEW,
    p_norm: Optional[float] = None
) -> Tuple[DenseMatrix, ProjectionPair]:
    """
    A with complex-Gaussian entries normalized to ||A|| = scale, and a rank
    ceil(dim/2) projection P of the requested kind.

    With `p_norm` an oblique P is built as U [[I, X], [0, 0]] U* with U a
    seeded unitary and ||X||^2 = p_norm^2 - 1, so ||P|| = p_norm exactly.
    Without it the oblique P is S diag S^-1 with ||S - I|| = skew.

    The same arguments always give bit-identical matrices.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if scale < 0:
        raise ValueError(f"scale must be >= 0, got {scale}")
    if not 0 <= skew < 1:
        raise ValueError(f"skew must lie in [0, 1), got {skew}")
    kind = ProjectionKind(kind)
    if p_norm is not None and (kind is not ProjectionKind.OBLIQUE or p_norm < 1 or dim < 2):
        raise ValueError(f"p_norm needs an oblique projection, dim >= 2 and p_norm >= 1, got {p_norm}")
    rng = np.random.default_rng(seed)
    m = math.ceil(dim / 2)

    g = _complex_gaussian(rng, dim)
    norm_g = operator_norm(g)
    a = g * (scale / norm_g) if scale > 0 and norm_g > 0 else np.zeros((dim, dim), dtype=np.complex128)

    diag = np.zeros((dim, dim), dtype=np.complex128)
    diag[:m, :m] = np.eye(m)

    if kind is ProjectionKind.ORTHOGONAL_COORDINATE:
        p = diag
    elif kind is ProjectionKind.OBLIQUE and p_norm is not None:
        p = _oblique_with_norm(rng, dim, m, p_norm)
    elif kind is ProjectionKind.OBLIQUE:
        h = _complex_gaussian(rng, dim)
        s = identity(dim) + skew * h / operator_norm(h)
        p = s @ diag @ solve_linear(s, identity(dim))
    else:
        u, _ = np.linalg.qr(_complex_gaussian(rng, dim))
        p = u[:, :m] @ u[:, :m].conj().T

    return a, make_projection_pair(p)


def reference_instance() -> Tuple[DenseMatrix, ProjectionPair]:
    """A = [[0, 1], [0, 0]], P = diag(1, 0): QAQ = 0 and AQ = A."""
    a = np.array([[0, 1], [0, 0]], dtype=np.complex128)
    return a, make_projection_pair(np.diag([1.0, 0.0]))


def decoupled_instance() -> Tuple[DenseMatrix, ProjectionPair]:
    """A = 0, P = diag(1, 0): every quantity is diagonal."""
    return np.zeros((2, 2), dtype=np.complex128), make_projection_pair(np.diag([1.0, 0.0]))


def scalar_instance() -> Tuple[DenseMatrix, ProjectionPair]:
    """X = C, A = 0, P = 1: the setting where convergence fails for t <= 0."""
    return np.zeros((1, 1), dtype=np.complex128), make_projection_pair(np.ones((1, 1)))


def build_instances(cfg: SweepConfig) -> List[Instance]:
    """The Reference Instance, or `cfg.instances` random ones seeded seed, seed+1, ..."""
    if cfg.reference:
        a, pq = reference_instance()
        return [Instance(seed=cfg.seed, a=a, pq=pq, kind="reference")]
    instances = []
    for offset in range(cfg.instances):
        seed = cfg.seed + offset
        a, pq = random_instance(seed, cfg.dim, cfg.projection_kind, cfg.scale, p_norm=cfg.p_norm)
        instances.append(Instance(seed=seed, a=a, pq=pq, kind=cfg.projection_kind.value))
    return instances
