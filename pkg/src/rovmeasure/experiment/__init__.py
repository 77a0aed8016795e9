"""Controlled ROV experiments: plans, drivers, observation classes, inference."""
from .plan import (
    DIFFERING_IN_C1,
    INELIGIBLE,
    NO_REFERENCE,
    O1,
    O2,
    O3,
    CandidateSet,
    ExperimentPlan,
    Observation,
    PolicyInference,
    RoundRecord,
    Verdict,
)
from .driver import Driver, DriverError, ReplayDriver, SimDriver
from .runner import (
    ExperimentResult,
    PreferValidResult,
    classify_round,
    infer_filtering,
    intersect_candidates,
    run_filter_experiment,
    run_prefer_valid_experiment,
    run_withdraw_reannounce_variant,
)
