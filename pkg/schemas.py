"""
Semigroup Lab Validation Schemas
Pydantic models for run configuration, bound constants and sweep records.

Configuration models forbid unknown keys, so a misspelled field in a JSON
config file is a hard error instead of a silently ignored setting.
"""
import os
import re
from enum import Enum
from pathlib import Path
from typing import Any, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

MAX_ZENO_K = 2 ** 20
MAX_SEED = 2 ** 64 - 1


# ============================================================================
# Enums
# ============================================================================

class ProjectionKind(str, Enum):
    """How random_instance builds P."""
    ORTHOGONAL_COORDINATE = "orthogonal-coordinate"
    OBLIQUE = "oblique"
    RANDOM_RANK_M = "random-rank-m"


class Subcommand(str, Enum):
    VERIFY = "verify"
    SWEEP_MAIN = "sweep-main"
    SWEEP_ZENO = "sweep-zeno"
    BOUND_CONSTANTS = "bound-constants"
    LOCALIZE_SPECTRUM = "localize-spectrum"
    COUNTEREXAMPLE = "counterexample"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON_LINES = "json-lines"


# ============================================================================
# Complex parsing
# ============================================================================

_BARE_IMAGINARY = re.compile(r'(^|[+-])j$')


def parse_complex(value: Any) -> complex:
    """
    Accept `a+bi` / `a+bj` strings, plain numbers or `[re, im]` pairs.

    >>> parse_complex("-50-10i")
    (-50-10j)
    """
    if isinstance(value, bool):
        raise ValueError(f"not a complex number: {value!r}")
    if isinstance(value, (int, float, complex)):
        return complex(value)
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValueError(f"complex pair must have two entries, got {value!r}")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        text = value.strip().replace(" ", "").lower().replace("i", "j")
        # "i", "-i", "3+i" need an explicit unit coefficient
        text = _BARE_IMAGINARY.sub(lambda m: f"{m.group(1)}1j", text)
        try:
            return complex(text)
        except ValueError:
            raise ValueError(f"not a complex number: {value!r}") from None
    raise ValueError(f"not a complex number: {value!r}")


# ============================================================================
# Sweep / Run Configuration
# ============================================================================

class SweepConfig(BaseModel):
    """Everything that determines the records of one sweep or suite run."""
    model_config = ConfigDict(extra='forbid', validate_assignment=True)

    seed: int = Field(0, ge=0, le=MAX_SEED, description="64-bit RNG seed")
    dim: int = Field(8, ge=1, le=512, description="Matrix dimension n")
    t_grid: List[float] = Field(
        default_factory=lambda: [0.5, 1.0, 2.0],
        min_length=1,
        description="Times; positive for main sweeps, any sign for Zeno sweeps"
    )
    z_list: List[complex] = Field(
        default_factory=lambda: [complex(-10), complex(-100), complex(-1000)],
        description="Coupling values z"
    )
    k_list: List[int] = Field(
        default_factory=lambda: [1, 4, 16, 64, 256, 1024],
        description="Zeno product lengths"
    )
    delta: Optional[float] = Field(None, gt=0, description="Fixed delta; selected automatically when absent")
    projection_kind: ProjectionKind = ProjectionKind.ORTHOGONAL_COORDINATE
    scale: float = Field(1.0, ge=0, description="Operator norm of the random A")
    p_norm: Optional[float] = Field(None, ge=1, description="Exact ||P|| of an oblique projection")
    reference: bool = Field(False, description="Use the 2x2 Reference Instance instead of a random one")
    instances: int = Field(1, ge=1, le=1000, description="Seeded instances per suite (seed, seed+1, ...)")
    strict_norm_mode: bool = Field(False, description="Also require R > ||QAQ|| when selecting delta")

    @field_validator('z_list', mode='before')
    @classmethod
    def parse_z_values(cls, v: Any) -> List[complex]:
        if isinstance(v, (str, int, float, complex)):
            v = [v]
        return [parse_complex(item) for item in v]

    @field_validator('t_grid')
    @classmethod
    def finite_times(cls, v: List[float]) -> List[float]:
        for t in v:
            if t != t or t in (float('inf'), float('-inf')):
                raise ValueError(f'time values must be finite, got {t}')
        return v

    @field_validator('k_list')
    @classmethod
    def validate_k(cls, v: List[int]) -> List[int]:
        for k in v:
            if k < 1:
                raise ValueError(f'k must be >= 1, got {k}')
            if k > MAX_ZENO_K:
                raise ValueError(f'k must be <= 2^20, got {k}')
        return v

    @model_validator(mode='after')
    def p_norm_needs_oblique(self):
        if self.p_norm is not None and self.projection_kind is not ProjectionKind.OBLIQUE:
            raise ValueError(f'p_norm needs projection_kind oblique, got {self.projection_kind.value}')
        if self.p_norm is not None and self.dim < 2 and not self.reference:
            raise ValueError('p_norm needs dim >= 2')
        return self

    @property
    def positive_times(self) -> List[float]:
        return [t for t in self.t_grid if t > 0]

    @property
    def effective_dim(self) -> int:
        return 2 if self.reference else self.dim


class RunConfig(BaseModel):
    """One CLI invocation: subcommand, sweep settings and output target."""
    model_config = ConfigDict(extra='forbid')

    subcommand: Subcommand
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    output_path: Optional[Path] = None
    format: OutputFormat = OutputFormat.CSV
    threads: Optional[int] = Field(None, ge=1, le=1024, description="Worker cap; machine parallelism when absent")
    timing: bool = Field(False, description="Render wall_time_s (makes output non-reproducible)")

    @field_validator('output_path')
    @classmethod
    def validate_writable(cls, v: Optional[Path]) -> Optional[Path]:
        """Output must be a writable file, or a new file in a writable directory."""
        if v is None:
            return v
        if v.exists():
            if v.is_dir():
                raise ValueError(f'output path is a directory: {v}')
            if not os.access(v, os.W_OK):
                raise ValueError(f'output path not writable: {v}')
            return v
        parent = v.parent if str(v.parent) else Path('.')
        if not parent.is_dir() or not os.access(parent, os.W_OK):
            raise ValueError(f'output directory not writable: {parent}')
        return v


# ============================================================================
# Bound constants
# ============================================================================

class BoundParams(BaseModel):
    """Constants of the explicit convergence bound for one (A, P, delta, window)."""
    model_config = ConfigDict(frozen=True, extra='forbid')

    delta: float = Field(..., gt=0)
    r: float = Field(..., ge=0, description="2 ||A|| ||P - Q||")
    big_r: float = Field(..., gt=0, description="2 (||A|| + delta) ||P - Q||")
    t1: float = Field(..., gt=0)
    t2: float = Field(..., gt=0)
    c1: float = Field(..., ge=0)
    c2: float = Field(..., ge=0)
    sup_m: float = Field(..., ge=0, description="Sampled sup of ||M(lambda)|| times the safety factor")
    sup_m_raw: float = Field(..., ge=0, description="Sampled sup of ||M(lambda)||")
    sup_m_neumann: Optional[float] = Field(None, description="1 + ||AQ|| / (R - ||QAQ||) when R > ||QAQ||")
    m_samples: int = Field(256, ge=1)
    norm_a: float = Field(..., ge=0)
    norm_p: float = Field(..., ge=0)
    norm_p_minus_q: float = Field(..., ge=0)
    rho_qaq: float = Field(0.0, ge=0, description="Spectral radius of QAQ")
    r_margin: float = Field(1e-3, ge=0, description="Relative margin of R over the spectral radius of QAQ")

    @model_validator(mode='after')
    def validate_invariants(self):
        if self.t2 < self.t1:
            raise ValueError(f't2={self.t2} must be >= t1={self.t1}')
        if not self.big_r > self.r:
            raise ValueError(f'R={self.big_r} must exceed r={self.r}')
        # (P - Q)^2 = I
        if self.norm_p_minus_q < 1.0 - 1e-9:
            raise ValueError(f'||P - Q||={self.norm_p_minus_q} < 1 is impossible for a projection')
        if self.big_r <= self.rho_qaq + 1e-9 * (1.0 + self.big_r):
            raise ValueError(f'R={self.big_r} does not clear the spectral radius {self.rho_qaq} of QAQ')
        return self


# ============================================================================
# Records
# ============================================================================

class ExperimentRecord(BaseModel):
    """One sweep sample: measured error against the theoretical bound."""
    model_config = ConfigDict(extra='forbid')

    experiment: str = Field(..., min_length=1)
    seed: int = Field(..., ge=0)
    dim: int = Field(..., ge=1)
    projection_kind: str
    t: Optional[float] = None
    z: Optional[complex] = None
    k: Optional[int] = Field(None, ge=1)
    error: float = Field(..., ge=0, description="Operator-norm difference; inf when overflow flagged")
    bound: Optional[float] = Field(None, ge=0)
    ratio: Optional[float] = None
    delta: Optional[float] = None
    big_r: Optional[float] = None
    wall_time_s: float = Field(0.0, ge=0)
    overflow: bool = False

    @property
    def re_z(self) -> Optional[float]:
        return None if self.z is None else self.z.real

    @property
    def im_z(self) -> Optional[float]:
        return None if self.z is None else self.z.imag

    @model_validator(mode='after')
    def fill_ratio(self):
        if self.ratio is None and self.bound is not None and self.bound > 0 and not self.overflow:
            self.ratio = self.error / self.bound
        return self
