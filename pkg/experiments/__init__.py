"""
Semigroup Lab Experiments Package
Instances, convergence sweeps, verification suites and the pipeline running them.
"""
from .instances import (
    Instance,
    build_instances,
    decoupled_instance,
    random_instance,
    reference_instance,
    scalar_instance,
)
from .sweeps import (
    check_monotone_decay,
    fit_decay_exponent,
    main_sweep,
    zeno_product,
    zeno_sup_by_k,
    zeno_sweep,
)
from .suites import (
    contour_suite,
    counterexample_records,
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
from .verification import VerificationPipeline, VerificationResult, VerificationStatus, run_verification

__all__ = [
    'Instance',
    'build_instances',
    'decoupled_instance',
    'random_instance',
    'reference_instance',
    'scalar_instance',
    'check_monotone_decay',
    'fit_decay_exponent',
    'main_sweep',
    'zeno_product',
    'zeno_sup_by_k',
    'zeno_sweep',
    'contour_suite',
    'counterexample_records',
    'counterexample_run',
    'headline_bound_suite',
    'identity_suite',
    'linear_rate_suite',
    'neumann_suite',
    'on_circle_suite',
    'resolvent_decay_suite',
    'resolvent_formula_suite',
    'semigroup_law_suite',
    'spectrum_localization_suite',
    'zeno_reference_suite',
    'zeno_suite',
    'VerificationPipeline',
    'VerificationResult',
    'VerificationStatus',
    'run_verification',
]
