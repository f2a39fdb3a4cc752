import math

import numpy as np
import pytest
from scipy import linalg as sla

from errors import ExponentialOverflowError
from experiments import (
    VerificationPipeline,
    VerificationStatus,
    build_instances,
    check_monotone_decay,
    contour_suite,
    counterexample_records,
    counterexample_run,
    fit_decay_exponent,
    headline_bound_suite,
    identity_suite,
    linear_rate_suite,
    main_sweep,
    neumann_suite,
    on_circle_suite,
    random_instance,
    resolvent_decay_suite,
    resolvent_formula_suite,
    semigroup_law_suite,
    spectrum_localization_suite,
    zeno_product,
    zeno_reference_suite,
    zeno_sup_by_k,
    zeno_suite,
    zeno_sweep,
)
from experiments.sweeps import instance_bound_params
from linalg_core import operator_norm
from reports import CheckStatus
from schemas import ExperimentRecord, ProjectionKind, SweepConfig


def _without_timing(records):
    return [r.model_dump(exclude={"wall_time_s"}) for r in records]


# ----------------------------------------------------------------------------
# Instances
# ----------------------------------------------------------------------------

class TestInstances:
    def test_same_seed_same_matrices(self):
        a1, pq1 = random_instance(42, 6, ProjectionKind.OBLIQUE)
        a2, pq2 = random_instance(42, 6, ProjectionKind.OBLIQUE)
        assert np.array_equal(a1, a2)
        assert np.array_equal(pq1.p, pq2.p)

    def test_scale_sets_operator_norm(self):
        a, _ = random_instance(1, 7, scale=2.5)
        assert operator_norm(a) == pytest.approx(2.5, rel=1e-10)

    def test_zero_scale(self):
        a, _ = random_instance(1, 3, scale=0.0)
        assert not np.any(a)

    def test_dimension_one(self):
        _, pq = random_instance(0, 1)
        assert np.array_equal(pq.p, np.ones((1, 1)))

    def test_projection_kinds(self):
        _, orth = random_instance(3, 7, ProjectionKind.ORTHOGONAL_COORDINATE)
        assert orth.rank == 4 and orth.norm_p == pytest.approx(1.0)
        _, oblique = random_instance(3, 7, ProjectionKind.OBLIQUE)
        assert oblique.rank == 4 and oblique.norm_p > 1.0
        _, rotated = random_instance(3, 7, ProjectionKind.RANDOM_RANK_M)
        assert rotated.rank == 4
        assert np.max(np.abs(rotated.p - rotated.p.conj().T)) < 1e-12

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            random_instance(0, 0)
        with pytest.raises(ValueError):
            random_instance(0, 3, scale=-1.0)

    @pytest.mark.parametrize("p_norm", [1.0, 3.0, 10.0])
    def test_oblique_with_exact_norm(self, p_norm):
        _, pq = random_instance(4, 6, ProjectionKind.OBLIQUE, p_norm=p_norm)
        assert pq.norm_p == pytest.approx(p_norm, rel=1e-8)
        assert pq.norm_p == pytest.approx(sla.svdvals(pq.p)[0], rel=1e-10)
        assert pq.rank == 3
        assert operator_norm(pq.p @ pq.p - pq.p) < 1e-12 * p_norm ** 2

    def test_p_norm_is_seeded_and_reaches_build_instances(self):
        cfg = SweepConfig(seed=2, dim=5, instances=2, projection_kind="oblique", p_norm=10.0)
        insts = build_instances(cfg)
        for inst in insts:
            assert inst.pq.norm_p == pytest.approx(10.0, rel=1e-8)
        again = build_instances(cfg)
        assert np.array_equal(insts[1].pq.p, again[1].pq.p)

    def test_p_norm_rejected_without_oblique(self):
        with pytest.raises(ValueError):
            random_instance(0, 4, ProjectionKind.ORTHOGONAL_COORDINATE, p_norm=2.0)
        with pytest.raises(ValueError):
            random_instance(0, 4, ProjectionKind.OBLIQUE, p_norm=0.5)
        with pytest.raises(ValueError):
            SweepConfig(p_norm=2.0)

    def test_build_instances(self):
        insts = build_instances(SweepConfig(seed=10, dim=3, instances=3))
        assert [i.seed for i in insts] == [10, 11, 12]
        ref = build_instances(SweepConfig(reference=True, dim=9))
        assert len(ref) == 1 and ref[0].dim == 2 and ref[0].kind == "reference"


# ----------------------------------------------------------------------------
# Main sweep
# ----------------------------------------------------------------------------

class TestMainSweep:
    def test_reference_closed_form(self):
        cfg = SweepConfig(reference=True, t_grid=[0.5, 1.0, 2.0], z_list=[-10, -50, -250])
        records = main_sweep(cfg)
        assert len(records) == 9
        for rec in records:
            z, t = rec.z.real, rec.t
            ez = math.exp(t * z)
            exact = sla.svdvals(np.array([[ez, (ez - 1) / z], [0, 0]]))[0]
            assert rec.error == pytest.approx(exact, rel=1e-10)
            assert rec.bound is not None and rec.ratio <= 1.0
            assert rec.delta == 1.0 and rec.big_r == pytest.approx(4.0)

    def test_records_sorted_by_modulus_then_time(self):
        cfg = SweepConfig(reference=True, t_grid=[2.0, 0.5], z_list=[-250, -10])
        records = main_sweep(cfg)
        keys = [(abs(r.z), r.t) for r in records]
        assert keys == sorted(keys)

    def test_decoupled_error_is_exponential(self):
        cfg = SweepConfig(dim=2, scale=0.0, t_grid=[1.0], z_list=[-3, -10, -20])
        for rec in main_sweep(cfg):
            assert rec.error == pytest.approx(math.exp(rec.z.real), rel=1e-12)

    def test_bound_only_inside_validity_region(self):
        cfg = SweepConfig(reference=True, t_grid=[1.0], z_list=[-5, complex(-20, 40), complex(2, -100)])
        by_z = {r.z: r for r in main_sweep(cfg)}
        assert by_z[complex(-5)].bound is None and by_z[complex(-5)].ratio is None
        assert by_z[complex(-20, 40)].bound is not None
        assert by_z[complex(2, -100)].bound is None

    def test_non_positive_time_rejected(self):
        with pytest.raises(ValueError, match="t > 0"):
            main_sweep(SweepConfig(reference=True, t_grid=[0.0, 1.0]))

    def test_thread_count_does_not_change_records(self):
        cfg = SweepConfig(seed=5, dim=6, instances=2, z_list=[-30, complex(-300, 50)])
        assert _without_timing(main_sweep(cfg, 1)) == _without_timing(main_sweep(cfg, 4))

    def test_seeded_errors_stay_below_bound(self):
        cfg = SweepConfig(seed=7, dim=8, instances=2, projection_kind="oblique", z_list=[-100, -1000, -10000])
        records = main_sweep(cfg)
        report = headline_bound_suite(records)
        assert report.passed
        assert report.checked == sum(r.bound is not None for r in records)

    def test_overflowing_limit_flags_cells(self, monkeypatch):
        import experiments.sweeps as sweeps

        def overflow(*args, **kwargs):
            raise ExponentialOverflowError("forced")

        monkeypatch.setattr(sweeps, "limit_semigroup", overflow)
        records = main_sweep(SweepConfig(seed=0, dim=6, t_grid=[3000.0], z_list=[-10]))
        assert len(records) == 1
        assert records[0].overflow and math.isinf(records[0].error)

    def test_large_time_completes(self):
        records = main_sweep(SweepConfig(seed=0, dim=6, t_grid=[3000.0], z_list=[-10]))
        assert len(records) == 1
        assert records[0].overflow == math.isinf(records[0].error)

    def test_huge_bound_constants_give_no_nan(self):
        records = main_sweep(SweepConfig(seed=0, dim=4, scale=400.0, t_grid=[1.0], z_list=[-100000]))
        assert len(records) == 1
        assert records[0].bound is not None and not math.isnan(records[0].bound)
        assert not math.isnan(records[0].error)


class TestMonotoneDecay:
    def _record(self, z, error):
        return ExperimentRecord(
            experiment="main", seed=0, dim=2, projection_kind="reference",
            t=1.0, z=z, error=error, delta=1.0, big_r=4.0,
        )

    def test_decreasing_series_passes(self):
        report = check_monotone_decay([self._record(-20, 0.05), self._record(-40, 0.02)])
        assert report.status is CheckStatus.PASSED and report.checked == 1

    def test_increase_is_only_a_warning(self):
        report = check_monotone_decay([self._record(-20, 0.02), self._record(-40, 0.05)])
        assert report.status is CheckStatus.WARNING
        assert report.passed

    def test_small_modulus_ignored(self):
        report = check_monotone_decay([self._record(-10, 0.02), self._record(-12, 0.05)])
        assert report.checked == 0


# ----------------------------------------------------------------------------
# Zeno
# ----------------------------------------------------------------------------

class TestZeno:
    def test_zeno_product_power(self):
        f = np.array([[0.5, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(zeno_product(f, 4), np.diag([1 / 16, 1.0]))

    def test_zeno_product_k_range(self):
        with pytest.raises(ValueError):
            zeno_product(np.eye(2), 0)
        with pytest.raises(ValueError):
            zeno_product(np.eye(2), 2 ** 20 + 1)

    def test_zeno_product_overflow(self):
        with pytest.raises(ExponentialOverflowError):
            zeno_product(np.diag([1e10, 1.0]), 64)

    def test_reference_error_is_t_over_k(self):
        cfg = SweepConfig(reference=True, t_grid=[-2.0, 0.5, 1.0, 2.0], k_list=[1, 4, 16, 256])
        records = zeno_sweep(cfg)
        zeno = [r for r in records if r.experiment == "zeno"]
        assert len(zeno) == 16
        for rec in zeno:
            assert rec.error == pytest.approx(abs(rec.t) / rec.k, rel=1e-12)
        sups = [r for r in records if r.experiment == "zeno_sup"]
        assert [r.k for r in sups] == [1, 4, 16, 256]
        assert sups[0].error == pytest.approx(2.0, rel=1e-12)

    def test_overflowing_limit_flags_cells(self, monkeypatch):
        import experiments.sweeps as sweeps

        real = sweeps.limit_semigroup

        def overflow_for_negative(t, a, pq):
            if t < 0:
                raise ExponentialOverflowError("forced")
            return real(t, a, pq)

        monkeypatch.setattr(sweeps, "limit_semigroup", overflow_for_negative)
        records = zeno_sweep(SweepConfig(reference=True, t_grid=[-3000.0, 1.0], k_list=[4]))
        by_t = {r.t: r for r in records if r.experiment == "zeno"}
        assert by_t[-3000.0].overflow and math.isinf(by_t[-3000.0].error)
        assert by_t[1.0].error == pytest.approx(0.25, rel=1e-12)
        sup = next(r for r in records if r.experiment == "zeno_sup")
        assert sup.overflow

    def test_large_times_complete(self):
        records = zeno_sweep(SweepConfig(seed=0, dim=6, t_grid=[-3000.0, 3000.0], k_list=[4]))
        zeno = [r for r in records if r.experiment == "zeno"]
        assert len(zeno) == 2
        for rec in zeno:
            assert rec.overflow == math.isinf(rec.error)

    def test_time_zero_has_no_error(self):
        records = zeno_sweep(SweepConfig(reference=True, t_grid=[0.0], k_list=[1, 8]))
        assert all(r.error == 0.0 for r in records)

    def test_zeno_sup_by_k_ignores_other_records(self):
        records = zeno_sweep(SweepConfig(reference=True, t_grid=[1.0, 2.0], k_list=[2, 8]))
        assert zeno_sup_by_k(records) == pytest.approx({2: 1.0, 8: 0.25}, rel=1e-12)

    def test_seeded_convergence_target(self):
        cfg = SweepConfig(seed=1, dim=6, scale=0.5, instances=5, t_grid=[-2, -1, 1, 2], k_list=[16, 256, 2 ** 14])
        report = zeno_suite(zeno_sweep(cfg))
        assert report.passed
        assert report.checked == 5

    def test_suite_requires_large_k(self):
        records = zeno_sweep(SweepConfig(reference=True, t_grid=[1.0], k_list=[16]))
        report = zeno_suite(records)
        assert report.status is CheckStatus.FAILED

    @staticmethod
    def _zeno_record(k, error):
        return ExperimentRecord(experiment="zeno", seed=0, dim=2, projection_kind="oblique", t=1.0, k=k, error=error)

    def test_suite_judges_k_2_14_not_largest_k(self):
        records = [self._zeno_record(2 ** 14, 5e-3), self._zeno_record(2 ** 16, 1e-4)]
        report = zeno_suite(records)
        assert report.status is CheckStatus.FAILED
        assert report.checked == 1
        assert report.details["sup_seed_0_k_65536"] == pytest.approx(1e-4)

    def test_suite_needs_k_2_14_itself(self):
        report = zeno_suite([self._zeno_record(2 ** 16, 1e-6)])
        assert report.status is CheckStatus.FAILED
        assert report.failures[0]["message"] == "k = 2^14 not swept"

    def test_suite_passes_at_k_2_14_despite_larger_k(self):
        records = [self._zeno_record(2 ** 14, 5e-4), self._zeno_record(2 ** 16, 2e-3)]
        assert zeno_suite(records).passed

    def test_reference_suite(self):
        report = zeno_reference_suite([1, 4, 16, 64, 1024])
        assert report.passed and report.checked == 15


def test_fit_decay_exponent():
    xs = [1e-3, 1e-4, 1e-5]
    assert fit_decay_exponent(xs, [3 * x for x in xs]) == pytest.approx(1.0, abs=1e-12)
    assert fit_decay_exponent(xs, [x ** 2 for x in xs]) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(ValueError):
        fit_decay_exponent([1.0], [1.0])
    with pytest.raises(ValueError):
        fit_decay_exponent([1.0, 2.0], [0.0, 1.0])


def test_linear_rate_on_reference():
    report = linear_rate_suite()
    assert report.passed
    assert report.details["fitted_exponent"] == pytest.approx(1.0, abs=0.05)


# ----------------------------------------------------------------------------
# Suites
# ----------------------------------------------------------------------------

def test_resolvent_suites(instance_set):
    assert resolvent_formula_suite(instance_set, seed=3).passed
    decay = resolvent_decay_suite(instance_set, samples=20, seed=3)
    assert decay.passed and decay.checked > 0
    neumann = neumann_suite(instance_set, seed=3)
    assert neumann.passed and neumann.checked > 0


@pytest.fixture(scope="module")
def wide_projection_set():
    return build_instances(SweepConfig(seed=20, dim=8, instances=3, projection_kind="oblique", p_norm=10.0))


def test_suites_hold_with_unscaled_tolerances_at_norm_p_10(wide_projection_set):
    assert all(inst.pq.norm_p == pytest.approx(10.0, rel=1e-8) for inst in wide_projection_set)
    formula = resolvent_formula_suite(wide_projection_set, seed=1)
    assert formula.passed, formula.failures
    neumann = neumann_suite(wide_projection_set, seed=1)
    assert neumann.passed, neumann.failures
    for inst in wide_projection_set:
        assert identity_suite(inst.a, inst.pq, [0.1, 0.5, 1.0, 2.0]).passed
        assert semigroup_law_suite(inst.a, inst.pq, [0.0, 0.5, 1.0, 2.0]).passed


def test_formula_tolerance_does_not_grow_with_norm_p(monkeypatch, wide_projection_set):
    import experiments.suites as suites

    real = suites.resolvent_zp_closed

    def off_by_twice_the_tolerance(lam, z, pq, long_form=False):
        exact = real(lam, z, pq, long_form=long_form)
        shift = 2.0 * suites.FORMULA_TOL * (1.0 + operator_norm(suites.resolvent_direct(lam, z * pq.p)))
        return exact + shift * np.eye(pq.dim)

    monkeypatch.setattr(suites, "resolvent_zp_closed", off_by_twice_the_tolerance)
    report = resolvent_formula_suite(wide_projection_set[:1], samples=4, seed=1)
    assert report.status is CheckStatus.FAILED
    assert report.failure_count == 4


def test_neumann_tolerance_does_not_grow_with_norm_p(monkeypatch, wide_projection_set):
    import experiments.suites as suites

    real = suites.resolvent_neumann

    def off_by_a_few_ulps_of_scale(lam, a, z, pq, tol):
        exact = suites.resolvent_direct(lam, a + z * pq.p)
        shift = tol + 5e-12 * max(1.0, operator_norm(exact))
        return real(lam, a, z, pq, tol) + shift * np.eye(pq.dim)

    monkeypatch.setattr(suites, "resolvent_neumann", off_by_a_few_ulps_of_scale)
    report = neumann_suite(wide_projection_set[:1], seed=1)
    assert report.status is CheckStatus.FAILED


def test_contour_and_on_circle_suites(instance_set):
    cfg = SweepConfig(t_grid=[0.5, 1.0])
    bps = [instance_bound_params(inst, cfg) for inst in instance_set]
    contour = contour_suite(instance_set, bps, [0.5, 1.0])
    assert contour.passed, contour.failures
    on_circle = on_circle_suite(instance_set, bps, samples=32)
    assert on_circle.passed, on_circle.failures


def test_identities_and_semigroup_law(instance_set):
    for inst in instance_set:
        assert identity_suite(inst.a, inst.pq, [0.1, 0.5, 1.0, 2.0]).passed
        assert semigroup_law_suite(inst.a, inst.pq, [0.0, 0.5, 1.0, 1.5, 2.0]).passed


def test_spectrum_localization_suite():
    report = spectrum_localization_suite(SweepConfig(seed=2, dim=16, instances=3))
    assert report.passed and report.checked == 3 * 3 * 16


class TestCounterexample:
    def test_records(self):
        errors = {(r.t, r.z.real): r.error for r in counterexample_records()}
        assert errors[(-1.0, -1.0)] == pytest.approx(math.e, rel=1e-12)
        assert errors[(-1.0, -10.0)] == pytest.approx(math.exp(10.0), rel=1e-12)
        assert errors[(1.0, -10.0)] == pytest.approx(math.exp(-10.0), rel=1e-12)

    def test_run(self):
        report = counterexample_run()
        assert report.passed
        assert report.details["t=-1,z=-5"] == pytest.approx(math.exp(5.0), rel=1e-12)


# ----------------------------------------------------------------------------
# Pipeline
# ----------------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_verification():
    cfg = SweepConfig(seed=7, dim=4)
    return cfg, VerificationPipeline(cfg, max_workers=1).run()


def test_pipeline_passes(small_verification):
    _, result = small_verification
    assert result.status is VerificationStatus.COMPLETED, [r.to_dict() for r in result.reports if not r.passed]
    names = [r.name for r in result.reports]
    for expected in ("resolvent_formula", "contour", "on_circle", "headline_bound", "monotone_decay",
                     "linear_rate", "zeno", "zeno_reference", "counterexample"):
        assert expected in names
    assert result.metrics.suites_run == len(result.reports)
    assert result.metrics.records == len(result.records)


def test_pipeline_reports_instance_gauge_and_clears_bound_fields(small_verification):
    import experiments.verification as verification
    from observability import get_metrics

    assert get_metrics().get_stats()["gauges"]["verify.instances"] == 3
    assert verification.logger._bound == {}


def test_pipeline_is_deterministic(small_verification):
    cfg, first = small_verification
    second = VerificationPipeline(cfg, max_workers=3).run()
    assert first.run_hash == second.run_hash
    assert [r.to_row() for r in first.reports] == [r.to_row() for r in second.reports]
    assert _without_timing(first.records) == _without_timing(second.records)


def test_pipeline_turns_numerical_failure_into_failed_suite(monkeypatch):
    from errors import QuadratureError
    import experiments.verification as verification

    def broken(*args, **kwargs):
        raise QuadratureError("forced")

    monkeypatch.setattr(verification, "contour_suite", broken)
    result = VerificationPipeline(SweepConfig(seed=1, dim=2, k_list=[1])).run()
    contour = next(r for r in result.reports if r.name == "contour")
    assert contour.status is CheckStatus.FAILED
    assert result.status is VerificationStatus.FAILED
    assert result.metrics.errors[0]["suite"] == "contour"
