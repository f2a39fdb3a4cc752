"""
Named verification suites.

Each suite samples one family of identities or estimates over a list of
instances and folds the per-instance reports, in instance order, into one
SuiteReport.
"""
import math
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from bounds import (
    check_inner_factorization,
    check_inner_integral,
    check_inner_resolvent_p,
    check_outer_integral,
    check_outer_resolvent,
    check_resolvent_decay,
    check_spectrum_localization,
)
from exponentials import expm, limit_semigroup
from linalg_core import DenseMatrix, ProjectionPair, as_dense, eigenvalues, operator_norm
from observability import get_logger
from reports import SuiteReport
from resolvents import (
    Contour,
    contour_exp,
    exclusion_radius,
    resolvent_direct,
    resolvent_neumann,
    resolvent_zp_closed,
    split_tolerance_scale,
    two_circle_split,
)
from schemas import BoundParams, ExperimentRecord, SweepConfig
from workers import ordered_map

from .instances import Instance, build_instances, scalar_instance
from .sweeps import fit_decay_exponent, main_sweep, zeno_sup_by_k, zeno_sweep

logger = get_logger("semigroup_lab.suites")

FORMULA_TOL = 1e-10
FORMS_AGREE_TOL = 1e-12
NEUMANN_TOL = 1e-10
CONTOUR_EXP_TOL = 1e-8
SPLIT_TOL = 1e-7
IDENTITY_TOL = 1e-9
ZENO_TARGET = 1e-3
ZENO_TARGET_K = 2 ** 14
ZENO_EXACT_TOL = 1e-12
RATE_TOL = 0.05
COUNTEREXAMPLE_TOL = 1e-6

LOCALIZATION_Z = (complex(-5), complex(-50, -10), complex(-500))
DECAY_ALPHAS = (0.25, 1.0, 4.0)
DECAY_Z = (complex(-5), complex(-20, 5), complex(3, -12))
NEUMANN_Z = (complex(-10), complex(-40, 15))
ZENO_T_GRID = (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)
RATE_Z_EXPONENTS = np.linspace(3.0, 6.0, 13)
COUNTEREXAMPLE_Z = (complex(-1), complex(-5), complex(-10))


def _over_instances(
    name: str,
    instances: Sequence[Instance],
    fn: Callable[[Instance], SuiteReport],
    max_workers: int = 1
) -> SuiteReport:
    combined = SuiteReport(name)
    for report in ordered_map(fn, instances, max_workers):
        combined.merge(report)
    combined.details["instances"] = len(instances)
    return combined


def _rng(seed: int, inst: Instance) -> np.random.Generator:
    return np.random.default_rng([seed, inst.seed, inst.dim])


def _point_outside(
    rng: np.random.Generator,
    z: complex,
    radius: float,
    spread: float = 3.0,
    tries: int = 64
) -> Optional[complex]:
    """A random lambda farther than `radius` from both 0 and z, or None."""
    for _ in range(tries):
        center = z if rng.random() < 0.5 else 0.0
        rho = radius * (1.0 + 1e-3 + spread * rng.random())
        lam = complex(center + rho * np.exp(2j * np.pi * rng.random()))
        if abs(lam) > radius and abs(lam - z) > radius:
            return lam
    return None


# ============================================================================
# Resolvent suites
# ============================================================================

def resolvent_formula_suite(
    instances: Sequence[Instance],
    samples: int = 20,
    seed: int = 0,
    max_workers: int = 1
) -> SuiteReport:
    """Short and long closed forms of R(lambda, zP) against direct inversion."""
    def run(inst: Instance) -> SuiteReport:
        rng = _rng(seed, inst)
        pq = inst.pq
        report = SuiteReport("resolvent_formula")
        drawn = 0
        while drawn < samples:
            z = complex(rng.uniform(-50, 50), rng.uniform(-50, 50))
            lam = complex(rng.uniform(-60, 60), rng.uniform(-60, 60))
            if min(abs(lam), abs(lam - z)) < 0.5:
                continue
            drawn += 1
            direct = resolvent_direct(lam, z * pq.p)
            short = resolvent_zp_closed(lam, z, pq)
            long = resolvent_zp_closed(lam, z, pq, long_form=True)
            scale = 1.0 + operator_norm(direct)
            report.record(operator_norm(short - direct), FORMULA_TOL * scale, lam=lam, z=z)
            report.record(operator_norm(long - short), FORMS_AGREE_TOL * scale, lam=lam, z=z, form="long")
        return report

    return _over_instances("resolvent_formula", instances, run, max_workers)


def resolvent_decay_suite(
    instances: Sequence[Instance],
    z_values: Sequence[complex] = DECAY_Z,
    alphas: Sequence[float] = DECAY_ALPHAS,
    samples: int = 100,
    seed: int = 0,
    max_workers: int = 1
) -> SuiteReport:
    """alpha ||R(lambda, zP)|| < 1 outside the r_alpha-disks around 0 and z."""
    def run(inst: Instance) -> SuiteReport:
        rng = _rng(seed, inst)
        report = SuiteReport("resolvent_decay")
        for z in z_values:
            for alpha in alphas:
                r_alpha = max(2.0 * alpha * inst.pq.norm_p_minus_q, 1e-3)
                lambdas = [lam for lam in (_point_outside(rng, z, r_alpha) for _ in range(samples)) if lam is not None]
                report.merge(check_resolvent_decay(inst.pq, z, alpha, lambdas))
        return report

    return _over_instances("resolvent_decay", instances, run, max_workers)


def neumann_suite(
    instances: Sequence[Instance],
    z_values: Sequence[complex] = NEUMANN_Z,
    samples: int = 8,
    tol: float = NEUMANN_TOL,
    seed: int = 0,
    max_workers: int = 1
) -> SuiteReport:
    """Truncated Neumann series against the direct resolvent at admissible lambda."""
    def run(inst: Instance) -> SuiteReport:
        rng = _rng(seed, inst)
        report = SuiteReport("neumann")
        r = exclusion_radius(operator_norm(inst.a), inst.pq)
        keep_out = max(1.5 * r, 0.5)
        for z in z_values:
            shifted = inst.a + z * inst.pq.p
            for _ in range(samples):
                lam = _point_outside(rng, z, keep_out)
                if lam is None:
                    continue
                direct = resolvent_direct(lam, shifted)
                series = resolvent_neumann(lam, inst.a, z, inst.pq, tol)
                allowed = tol + 1e-12 * max(1.0, operator_norm(direct))
                report.record(operator_norm(series - direct), allowed, lam=lam, z=z)
        return report

    return _over_instances("neumann", instances, run, max_workers)


# ============================================================================
# Contour suites
# ============================================================================

def contour_suite(
    instances: Sequence[Instance],
    bps: Sequence[BoundParams],
    t_values: Sequence[float],
    max_workers: int = 1
) -> SuiteReport:
    """
    contour_exp against expm for A and for A + zP (one circle around both
    disks), and the two-circle split against the exponential difference.
    """
    def run(pair) -> SuiteReport:
        inst, bp = pair
        a, pq = inst.a, inst.pq
        report = SuiteReport("contour")
        norm_a = operator_norm(a)
        r = exclusion_radius(norm_a, pq)
        z_single = complex(-(2.0 * bp.big_r + 1.0))
        z_split = complex(-10.0 * bp.big_r)
        single_circle = Contour(center=z_single / 2, radius=abs(z_single) / 2 + r + 1.0)

        for t in t_values:
            for b, c in ((a, Contour(center=0.0, radius=2.0 * norm_a + 1.0)),
                         (a + z_single * pq.p, single_circle)):
                exact = expm(t * b)
                spectral_abscissa = max(lam.real for lam in eigenvalues(b).eigenvalues)
                allowed = CONTOUR_EXP_TOL * max(math.exp(t * spectral_abscissa), operator_norm(exact)) + 1e-10
                report.record(operator_norm(contour_exp(t, b, c) - exact), allowed, t=t, center=c.center)

            if 0 < t <= bp.t2:
                outer, inner = two_circle_split(t, a, z_split, pq, bp)
                diff = expm(t * (a + z_split * pq.p)) - limit_semigroup(t, a, pq)
                report.record(
                    operator_norm(outer + inner - diff), SPLIT_TOL * split_tolerance_scale(t, bp),
                    t=t, z=z_split, part="split",
                )
        return report

    return _over_instances("contour", list(zip(instances, bps)), run, max_workers)


def on_circle_z_values(bp: BoundParams) -> List[complex]:
    return [complex(-3.0 * bp.big_r - 1.0), complex(-10.0 * bp.big_r), complex(-100.0 * bp.big_r)]


def on_circle_suite(
    instances: Sequence[Instance],
    bps: Sequence[BoundParams],
    samples: int = 64,
    max_workers: int = 1
) -> SuiteReport:
    """The five on-circle estimates behind the bound, at z in {-3R-1, -10R, -100R}."""
    def run(pair) -> SuiteReport:
        inst, bp = pair
        a, pq = inst.a, inst.pq
        report = SuiteReport("on_circle")
        for z in on_circle_z_values(bp):
            report.merge(check_outer_resolvent(a, pq, z, bp, samples))
            report.merge(check_inner_factorization(a, pq, z, bp, samples))
            report.merge(check_inner_resolvent_p(a, pq, z, bp, samples))
            for t in sorted({bp.t1, bp.t2}):
                report.merge(check_outer_integral(a, pq, z, bp, t))
            for t in (-bp.t2, bp.t2):
                report.merge(check_inner_integral(a, pq, z, bp, t))
        return report

    return _over_instances("on_circle", list(zip(instances, bps)), run, max_workers)


# ============================================================================
# Bound and rate suites
# ============================================================================

def headline_bound_suite(records: Sequence[ExperimentRecord]) -> SuiteReport:
    """Measured error <= C1 e^{t1 Re z} + C2 / (|z| - R) on every bounded main record."""
    report = SuiteReport("headline_bound")
    for rec in records:
        if rec.experiment != "main" or rec.bound is None:
            continue
        report.record(rec.error, rec.bound, seed=rec.seed, z=rec.z, t=rec.t)
    return report


def linear_rate_suite(t: float = 1.0, max_workers: int = 1) -> SuiteReport:
    """Reference Instance: the error decays like 1/|z| for |z| in [1e3, 1e6]."""
    z_list = [complex(-(10.0 ** e)) for e in RATE_Z_EXPONENTS]
    cfg = SweepConfig(reference=True, t_grid=[t], z_list=z_list)
    records = main_sweep(cfg, max_workers)
    slope = fit_decay_exponent([1.0 / abs(r.z) for r in records], [r.error for r in records])

    report = SuiteReport("linear_rate")
    report.details["fitted_exponent"] = slope
    report.record(abs(slope - 1.0), RATE_TOL, slope=slope)
    return report


def zeno_suite(
    records: Sequence[ExperimentRecord],
    target: float = ZENO_TARGET
) -> SuiteReport:
    """
    From zeno_sweep records: the sup over t of the Zeno error at k = 2^14 must
    be below `target`. Larger k are reported in the details only. A sup that
    grows with k is logged, and the fitted rate is reported, but neither fails
    the suite.
    """
    report = SuiteReport("zeno")
    by_seed: Dict[int, List[ExperimentRecord]] = {}
    for rec in records:
        by_seed.setdefault(rec.seed, []).append(rec)

    for seed, recs in sorted(by_seed.items()):
        sups = zeno_sup_by_k(recs)
        if not sups:
            continue
        if ZENO_TARGET_K not in sups:
            report.fail("k = 2^14 not swept", seed=seed, k_max=max(sups))
            continue
        report.record(sups[ZENO_TARGET_K], target, seed=seed, k=ZENO_TARGET_K)
        for k in (k for k in sups if k > ZENO_TARGET_K):
            report.details[f"sup_seed_{seed}_k_{k}"] = sups[k]
        if any(nxt > prev for prev, nxt in zip(sups.values(), list(sups.values())[1:])):
            logger.warning("Zeno sup error not monotone in k", seed=seed)
        positive = [(k, e) for k, e in sups.items() if 0 < e < math.inf]
        if len(positive) >= 2:
            report.details[f"rate_seed_{seed}"] = fit_decay_exponent(
                [1.0 / k for k, _ in positive], [e for _, e in positive]
            )
    return report


def zeno_reference_suite(
    k_list: Sequence[int],
    t_grid: Sequence[float] = ZENO_T_GRID,
    max_workers: int = 1
) -> SuiteReport:
    """Reference Instance: error_k(t) = t / k exactly for t > 0."""
    cfg = SweepConfig(reference=True, k_list=list(k_list), t_grid=list(t_grid))
    report = SuiteReport("zeno_reference")
    for rec in zeno_sweep(cfg, max_workers):
        if rec.experiment == "zeno" and rec.t > 0:
            report.record(abs(rec.error * rec.k / rec.t - 1.0), ZENO_EXACT_TOL, k=rec.k, t=rec.t)
    return report


# ============================================================================
# Limit-semigroup suites
# ============================================================================

def identity_suite(a: DenseMatrix, pq: ProjectionPair, t_grid: Sequence[float]) -> SuiteReport:
    """e^{tQAQ}Q = e^{tQA}Q = Q e^{tAQ} = Q e^{tQAQ} = Q e^{tQAQ}Q."""
    a = as_dense(a)
    q = pq.q
    qa, aq, qaq = q @ a, a @ q, q @ a @ q
    norm_a = operator_norm(a)
    report = SuiteReport("identities")
    for t in t_grid:
        base = expm(t * qaq) @ q
        scale = math.exp(abs(t) * norm_a * pq.norm_q ** 2)
        variants = {
            "e^{tQA}Q": expm(t * qa) @ q,
            "Qe^{tAQ}": q @ expm(t * aq),
            "Qe^{tQAQ}": q @ expm(t * qaq),
            "Qe^{tQAQ}Q": q @ expm(t * qaq) @ q,
        }
        for label, value in variants.items():
            report.record(operator_norm(base - value), IDENTITY_TOL * scale, t=t, form=label)
    return report


def semigroup_law_suite(a: DenseMatrix, pq: ProjectionPair, t_grid: Sequence[float]) -> SuiteReport:
    """S(t) S(s) = S(t + s) for S(t) = e^{tQAQ}Q on the grid."""
    a = as_dense(a)
    norm_qaq = operator_norm(pq.q @ a @ pq.q)
    semigroup = {t: limit_semigroup(t, a, pq) for t in t_grid}
    report = SuiteReport("semigroup_law")
    for t in t_grid:
        for s in t_grid:
            scale = math.exp((abs(t) + abs(s)) * norm_qaq)
            defect = operator_norm(semigroup[t] @ semigroup[s] - limit_semigroup(t + s, a, pq))
            report.record(defect, IDENTITY_TOL * scale, t=t, s=s)
    return report


def counterexample_records() -> List[ExperimentRecord]:
    """X = C, A = 0, P = 1: errors at t = -1 for z in {-1, -5, -10}, and at t = +1, z = -10."""
    a, pq = scalar_instance()
    cells = [(-1.0, z) for z in COUNTEREXAMPLE_Z] + [(1.0, complex(-10))]
    records = []
    for t, z in cells:
        error = operator_norm(expm(t * (a + z * pq.p)) - limit_semigroup(t, a, pq))
        records.append(ExperimentRecord(
            experiment="counterexample", seed=0, dim=1, projection_kind="scalar", t=t, z=z, error=error,
        ))
    return records


def counterexample_run() -> SuiteReport:
    """For t <= 0 the error grows like e^{|Re z|} instead of vanishing."""
    records = counterexample_records()
    report = SuiteReport("counterexample")
    negative = [r for r in records if r.t < 0]
    for rec in records:
        report.details[f"t={rec.t:g},z={rec.z.real:g}"] = rec.error

    for rec in records:
        expected = math.exp(rec.t * rec.z.real)
        report.record(abs(rec.error - expected), COUNTEREXAMPLE_TOL * expected, t=rec.t, z=rec.z)
    for prev, nxt in zip(negative, negative[1:]):
        if not nxt.error > prev.error:
            report.fail("error not increasing in |Re z|", z=nxt.z, error=nxt.error)
    return report


def spectrum_localization_suite(
    cfg: SweepConfig,
    z_values: Sequence[complex] = LOCALIZATION_Z,
    max_workers: int = 1
) -> SuiteReport:
    """Eigenvalues of A + zP inside the r-disks around 0 and z, for every instance of cfg."""
    def run(inst: Instance) -> SuiteReport:
        report = SuiteReport("spectrum_localization")
        for z in z_values:
            report.merge(check_spectrum_localization(inst.a, inst.pq, z))
        return report

    return _over_instances("spectrum_localization", build_instances(cfg), run, max_workers)
