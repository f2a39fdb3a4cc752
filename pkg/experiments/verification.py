"""
Semigroup Lab Verification Pipeline
Runs every suite in a fixed order, each inside a traced span, and collects
reports plus the main and Zeno sweep records.
"""
import hashlib
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Callable, Dict, List, Optional

from errors import SemigroupLabError
from observability import get_logger, get_metrics, get_tracer, log_execution
from reports import CheckStatus, SuiteReport
from schemas import ExperimentRecord, SweepConfig

from .instances import Instance, build_instances, decoupled_instance, reference_instance
from .suites import (
    ZENO_T_GRID,
    ZENO_TARGET_K,
    contour_suite,
    counterexample_run,
    headline_bound_suite,
    identity_suite,
    linear_rate_suite,
    neumann_suite,
    on_circle_suite,
    resolvent_decay_suite,
    resolvent_formula_suite,
    semigroup_law_suite,
    spectrum_localization_suite,
    zeno_reference_suite,
    zeno_suite,
)
from .sweeps import check_monotone_decay, instance_bound_params, main_sweep, zeno_sweep

logger = get_logger("semigroup_lab.verify")
metrics = get_metrics()
tracer = get_tracer()

IDENTITY_T_GRID = (0.1, 0.5, 1.0, 2.0)
SEMIGROUP_T_GRID = (0.0, 0.5, 1.0, 1.5, 2.0)
# the Zeno sup is asserted at k = 2^14; 2^16 is swept for the reported rate
ZENO_VERIFY_K = (1, 4, 16, 64, 256, 1024, 4096, ZENO_TARGET_K, 4 * ZENO_TARGET_K)


class VerificationStatus(Enum):
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class VerificationMetrics:
    """Counts and timing of one pipeline run."""
    suites_run: int = 0
    suites_failed: int = 0
    suites_warned: int = 0
    records: int = 0
    start_time: Optional[datetime] = None
    end_time: Optional[datetime] = None
    errors: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def duration_seconds(self) -> float:
        if self.start_time and self.end_time:
            return (self.end_time - self.start_time).total_seconds()
        return 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "suites_run": self.suites_run,
            "suites_failed": self.suites_failed,
            "suites_warned": self.suites_warned,
            "records": self.records,
            "duration_seconds": round(self.duration_seconds, 2),
            "errors_count": len(self.errors),
        }


@dataclass
class VerificationResult:
    """Result of a verification run."""
    status: VerificationStatus
    reports: List[SuiteReport]
    records: List[ExperimentRecord]
    metrics: VerificationMetrics
    run_hash: str

    @property
    def passed(self) -> bool:
        return self.status is VerificationStatus.COMPLETED

    def to_dict(self) -> Dict[str, Any]:
        return {
            "status": self.status.value,
            "run_hash": self.run_hash,
            "metrics": self.metrics.to_dict(),
            "reports": [r.to_dict() for r in self.reports],
        }


class VerificationPipeline:
    """
    All suites over the configured instances plus the fixed closed-form ones
    (A = 0 with P = diag(1, 0), and the Reference Instance).

    A numerical failure inside a suite turns that suite into a failing
    report; the remaining suites still run.
    """

    def __init__(self, cfg: SweepConfig, max_workers: int = 1):
        self.cfg = cfg
        self.max_workers = max_workers
        self.run_metrics = VerificationMetrics()
        self.reports: List[SuiteReport] = []
        self.records: List[ExperimentRecord] = []

    @log_execution(logger)
    def run(self) -> VerificationResult:
        with tracer.trace("verify.pipeline", {"seed": str(self.cfg.seed), "dim": str(self.cfg.dim)}):
            self.run_metrics = VerificationMetrics(start_time=datetime.now(timezone.utc))
            self.reports = []
            self.records = []
            run_hash = self._generate_run_hash()
            metrics.increment("verify.runs.started")
            logger.bind(run_hash=run_hash[:8])
            try:
                return self._run_suites(run_hash)
            finally:
                logger.unbind()

    def _run_suites(self, run_hash: str) -> VerificationResult:
        times = self.cfg.positive_times
        if not times:
            raise ValueError("verify needs at least one t > 0 in t_grid")
        main_cfg = self.cfg.model_copy(update={"t_grid": times})
        instances = self._instances()
        metrics.gauge("verify.instances", len(instances))
        bps = [instance_bound_params(inst, main_cfg, self.max_workers) for inst in instances]
        workers = self.max_workers

        self._step("resolvent_formula", lambda: resolvent_formula_suite(instances, seed=self.cfg.seed, max_workers=workers))
        self._step("resolvent_decay", lambda: resolvent_decay_suite(instances, seed=self.cfg.seed, max_workers=workers))
        self._step("neumann", lambda: neumann_suite(instances, seed=self.cfg.seed, max_workers=workers))
        self._step("spectrum_localization", lambda: spectrum_localization_suite(self.cfg, max_workers=workers))
        self._step("contour", lambda: contour_suite(instances, bps, times, max_workers=workers))
        self._step("on_circle", lambda: on_circle_suite(instances, bps, max_workers=workers))
        self._step("identities", lambda: self._per_instance("identities", instances, identity_suite, IDENTITY_T_GRID))
        self._step("semigroup_law", lambda: self._per_instance("semigroup_law", instances, semigroup_law_suite, SEMIGROUP_T_GRID))
        self._step("headline_bound", lambda: self._headline(main_cfg))
        self._step("linear_rate", lambda: linear_rate_suite(max_workers=workers))
        self._step("zeno", self._zeno)
        self._step("zeno_reference", lambda: zeno_reference_suite(ZENO_VERIFY_K, max_workers=workers))
        self._step("counterexample", counterexample_run)

        self.run_metrics.records = len(self.records)
        self.run_metrics.end_time = datetime.now(timezone.utc)
        status = VerificationStatus.FAILED if self.run_metrics.suites_failed else VerificationStatus.COMPLETED
        metrics.increment(f"verify.runs.{status.value}")
        metrics.timer("verify.duration", self.run_metrics.duration_seconds * 1000)

        logger.info(
            "Verification completed",
            status=status.value,
            suites=self.run_metrics.suites_run,
            failed=self.run_metrics.suites_failed,
        )
        return VerificationResult(
            status=status,
            reports=list(self.reports),
            records=list(self.records),
            metrics=self.run_metrics,
            run_hash=run_hash,
        )

    def _instances(self) -> List[Instance]:
        fixed = [Instance(self.cfg.seed, *decoupled_instance(), kind="decoupled")]
        if not self.cfg.reference:
            fixed.append(Instance(self.cfg.seed, *reference_instance(), kind="reference"))
        return fixed + build_instances(self.cfg)

    def _step(self, name: str, fn: Callable[[], SuiteReport]):
        with tracer.trace(f"verify.{name}"):
            try:
                report = fn()
            except SemigroupLabError as e:
                logger.exception("Suite aborted", e, suite=name)
                self.run_metrics.errors.append({"suite": name, "error": str(e)})
                report = SuiteReport(name)
                report.fail(str(e))
        self.reports.append(report)
        self.run_metrics.suites_run += 1
        if report.status is CheckStatus.FAILED:
            self.run_metrics.suites_failed += 1
            metrics.increment("verify.suites.failed")
        elif report.status is CheckStatus.WARNING:
            self.run_metrics.suites_warned += 1

    def _per_instance(self, name, instances, suite, t_grid) -> SuiteReport:
        combined = SuiteReport(name)
        for inst in instances:
            combined.merge(suite(inst.a, inst.pq, t_grid))
        combined.details["instances"] = len(instances)
        return combined

    def _headline(self, main_cfg: SweepConfig) -> SuiteReport:
        records = main_sweep(main_cfg, self.max_workers)
        self.records.extend(records)
        monotone = check_monotone_decay(records)
        self.reports.append(monotone)
        self.run_metrics.suites_run += 1
        if monotone.status is CheckStatus.WARNING:
            self.run_metrics.suites_warned += 1
        return headline_bound_suite(records)

    def _zeno(self) -> SuiteReport:
        k_list = sorted(set(self.cfg.k_list) | set(ZENO_VERIFY_K))
        zeno_cfg = self.cfg.model_copy(update={"t_grid": list(ZENO_T_GRID), "k_list": k_list})
        records = zeno_sweep(zeno_cfg, self.max_workers)
        self.records.extend(records)
        return zeno_suite(records)

    def _generate_run_hash(self) -> str:
        """Deterministic hash of the configuration."""
        payload = self.cfg.model_dump_json()
        return hashlib.sha256(payload.encode()).hexdigest()


def run_verification(cfg: SweepConfig, max_workers: int = 1) -> VerificationResult:
    return VerificationPipeline(cfg, max_workers).run()
