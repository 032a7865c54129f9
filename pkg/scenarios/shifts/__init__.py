# scenarios/shifts/__init__.py
from scenarios.shifts.base import (
    CLASS_COUNT,
    DEFAULT_IN_DOMAIN,
    InDomainParams,
    ShiftKind,
    ShiftScenario,
    axes,
    class_means,
    sample_in_domain,
)
from scenarios.shifts.covariate_shift import (
    IDENTITY,
    AffineTransform,
    covariate_transform,
    gen_covariate_shift,
    plane_rotation,
)
from scenarios.shifts.in_domain import bayes_accuracy, gen_in_domain
from scenarios.shifts.modality_shift import DEFAULT_MODALITY, ModalityTransform, gen_modality_shift
from scenarios.shifts.novel_condition import gen_novel_condition, preset_displacement
from scenarios.shifts.subtype_shift import gen_subtype_shift, subtype_centers
from scenarios.shifts.suite import (
    DEFAULT_SUITE,
    SuiteConfig,
    describe_suite,
    gen_suite,
    run_scenario,
    suite_scenarios,
    write_suite,
)

__all__ = [
    "CLASS_COUNT",
    "DEFAULT_IN_DOMAIN",
    "DEFAULT_MODALITY",
    "DEFAULT_SUITE",
    "IDENTITY",
    "AffineTransform",
    "InDomainParams",
    "ModalityTransform",
    "ShiftKind",
    "ShiftScenario",
    "SuiteConfig",
    "axes",
    "bayes_accuracy",
    "class_means",
    "covariate_transform",
    "describe_suite",
    "gen_covariate_shift",
    "gen_in_domain",
    "gen_modality_shift",
    "gen_novel_condition",
    "gen_subtype_shift",
    "gen_suite",
    "plane_rotation",
    "preset_displacement",
    "run_scenario",
    "sample_in_domain",
    "subtype_centers",
    "suite_scenarios",
    "write_suite",
]
