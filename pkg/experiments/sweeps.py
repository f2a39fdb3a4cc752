"""
Convergence sweeps: the main z-sweep against the explicit bound, and the
Zeno-product sweep over k.
"""
import math
import time
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from bounds import compute_bound_params, convergence_bound, in_validity_region, select_delta
from errors import ExponentialOverflowError
from exponentials import expm, limit_semigroup
from linalg_core import DenseMatrix, operator_norm
from observability import get_logger, get_metrics, log_execution
from reports import SuiteReport
from schemas import MAX_ZENO_K, BoundParams, ExperimentRecord, SweepConfig
from workers import ordered_map

from .instances import Instance, build_instances

logger = get_logger("semigroup_lab.sweeps")
metrics = get_metrics()

MONOTONE_FROM_R = 4.0
MONOTONE_SLACK = 1e-9


def instance_bound_params(
    inst: Instance,
    cfg: SweepConfig,
    max_workers: int = 1
) -> Optional[BoundParams]:
    """BoundParams over the positive part of the t-grid (None if it is empty)."""
    times = cfg.positive_times
    if not times:
        return None
    delta = cfg.delta if cfg.delta is not None else select_delta(inst.a, inst.pq, cfg.strict_norm_mode)
    return compute_bound_params(inst.a, inst.pq, min(times), max(times), delta, max_workers=max_workers)


def _limits(inst: Instance, t_grid: Sequence[float]) -> Dict[float, Optional[DenseMatrix]]:
    """e^{tQAQ}Q per t; None where the limit itself leaves the floating-point range."""
    limits: Dict[float, Optional[DenseMatrix]] = {}
    for t in t_grid:
        try:
            limits[t] = limit_semigroup(t, inst.a, inst.pq)
        except ExponentialOverflowError:
            logger.warning("Limit semigroup overflowed", seed=inst.seed, t=t)
            limits[t] = None
    return limits


def _overflow_record(**fields) -> ExperimentRecord:
    metrics.increment("sweeps.overflow")
    logger.warning("Exponential overflow, cell flagged", **{k: str(v) for k, v in fields.items()})
    return ExperimentRecord(error=math.inf, overflow=True, **fields)


@log_execution(logger)
def main_sweep(cfg: SweepConfig, max_workers: int = 1) -> List[ExperimentRecord]:
    """
    error = ||e^{t(A+zP)} - e^{tQAQ}Q|| for every (z, t); the bound is
    attached where Re z < -2R. Records are sorted by (seed, |z|, t).
    """
    if any(t <= 0 for t in cfg.t_grid):
        raise ValueError("main sweep needs t > 0 for every t in t_grid")
    if not cfg.z_list:
        raise ValueError("main sweep needs a nonempty z_list")

    records: List[ExperimentRecord] = []
    for inst in build_instances(cfg):
        bp = instance_bound_params(inst, cfg, max_workers)
        limits = _limits(inst, cfg.t_grid)
        cells = [(z, t) for z in cfg.z_list for t in cfg.t_grid]

        def run_cell(cell: Tuple[complex, float]) -> ExperimentRecord:
            z, t = cell
            fields = dict(
                experiment="main", seed=inst.seed, dim=inst.dim, projection_kind=inst.kind,
                t=t, z=z, delta=bp.delta, big_r=bp.big_r,
            )
            if limits[t] is None:
                return _overflow_record(**fields)
            start = time.perf_counter()
            try:
                error = operator_norm(expm(t * (inst.a + z * inst.pq.p)) - limits[t])
            except ExponentialOverflowError:
                return _overflow_record(**fields)
            bound = convergence_bound(bp, z, t) if in_validity_region(bp, z, t) else None
            return ExperimentRecord(
                error=error, bound=bound, wall_time_s=time.perf_counter() - start, **fields
            )

        records.extend(ordered_map(run_cell, cells, max_workers))

    metrics.increment("sweeps.main.records", len(records))
    return sorted(records, key=lambda r: (r.seed, abs(r.z), r.t, r.z.real, r.z.imag))


def zeno_product(factor: DenseMatrix, k: int) -> DenseMatrix:
    """factor^k by binary powering (plain repeated squaring when k is a power of two)."""
    if not 1 <= k <= MAX_ZENO_K:
        raise ValueError(f"k must lie in [1, 2^20], got {k}")
    with np.errstate(over="ignore", invalid="ignore"):
        product = np.linalg.matrix_power(factor, k)
    if not np.all(np.isfinite(product)):
        raise ExponentialOverflowError(f"Zeno product left the floating-point range at k={k}")
    return product


@log_execution(logger)
def zeno_sweep(cfg: SweepConfig, max_workers: int = 1) -> List[ExperimentRecord]:
    """
    error_k(t) = ||(e^{(t/k)A} Q)^k - e^{tQAQ}Q|| for every (k, t), t of any
    sign, followed by one `zeno_sup` record per k holding the sup over t.
    """
    if not cfg.k_list:
        raise ValueError("Zeno sweep needs a nonempty k_list")

    records: List[ExperimentRecord] = []
    for inst in build_instances(cfg):
        limits = _limits(inst, cfg.t_grid)
        cells = [(k, t) for k in cfg.k_list for t in cfg.t_grid]

        def run_cell(cell: Tuple[int, float]) -> ExperimentRecord:
            k, t = cell
            fields = dict(
                experiment="zeno", seed=inst.seed, dim=inst.dim, projection_kind=inst.kind, t=t, k=k,
            )
            if limits[t] is None:
                return _overflow_record(**fields)
            start = time.perf_counter()
            try:
                product = zeno_product(expm((t / k) * inst.a) @ inst.pq.q, k)
                error = operator_norm(product - limits[t])
            except ExponentialOverflowError:
                return _overflow_record(**fields)
            return ExperimentRecord(error=error, wall_time_s=time.perf_counter() - start, **fields)

        cell_records = sorted(ordered_map(run_cell, cells, max_workers), key=lambda r: (r.k, r.t))
        records.extend(cell_records)
        for k, sup in zeno_sup_by_k(cell_records).items():
            records.append(ExperimentRecord(
                experiment="zeno_sup", seed=inst.seed, dim=inst.dim, projection_kind=inst.kind,
                k=k, error=sup, overflow=math.isinf(sup),
            ))

    metrics.increment("sweeps.zeno.records", len(records))
    return records


def zeno_sup_by_k(records: Iterable[ExperimentRecord]) -> Dict[int, float]:
    """sup over t of the Zeno error, per k (zeno records only)."""
    sups: Dict[int, float] = {}
    for rec in records:
        if rec.experiment != "zeno":
            continue
        sups[rec.k] = max(sups.get(rec.k, 0.0), rec.error)
    return dict(sorted(sups.items()))


def fit_decay_exponent(xs: Sequence[float], errors: Sequence[float]) -> float:
    """
    Least-squares slope of log(error) against log(x).

    With x = 1/|z| a slope of 1 is a linear rate; with x = 1/k it is the
    observed Zeno rate.
    """
    xs = np.asarray(xs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if xs.shape != errors.shape or xs.size < 2:
        raise ValueError("need at least two (x, error) pairs of equal length")
    if np.any(xs <= 0) or np.any(errors <= 0) or not np.all(np.isfinite(errors)):
        raise ValueError("x and error values must be positive and finite")
    slope, _ = np.polyfit(np.log(xs), np.log(errors), 1)
    return float(slope)


def check_monotone_decay(records: Iterable[ExperimentRecord]) -> SuiteReport:
    """
    Soft check: along real z = -s with s beyond 4R, the main-sweep error at
    fixed t does not increase. Violations end in WARNING, not failure.
    """
    report = SuiteReport("monotone_decay", soft=True)
    series: Dict[Tuple[int, float], List[ExperimentRecord]] = {}
    for rec in records:
        if rec.experiment != "main" or rec.overflow or rec.z is None or rec.big_r is None:
            continue
        if rec.z.imag != 0 or rec.z.real >= 0 or abs(rec.z) <= MONOTONE_FROM_R * rec.big_r:
            continue
        series.setdefault((rec.seed, rec.t), []).append(rec)

    for (seed, t), recs in sorted(series.items()):
        recs.sort(key=lambda r: abs(r.z))
        for prev, nxt in zip(recs, recs[1:]):
            limit = prev.error * (1.0 + MONOTONE_SLACK)
            if not report.record(nxt.error, limit, seed=seed, t=t, z=nxt.z):
                logger.warning("Main-sweep error increased along z = -s", seed=seed, t=t, z=str(nxt.z))
    return report
