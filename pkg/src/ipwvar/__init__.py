"""Inverse-probability weighting for cohort attrition.

Response-probability estimation, weighted association-model fitting, three
variance estimators (naive, robust, linearized), a calibrated synthetic-
cohort generator, and a Monte-Carlo harness for the nine-scenario
relative-bias study. The ``ipwvar`` console script exposes the same
functionality on the command line.
"""
from . import errors
from .association import AssociationFit, fit_weighted_linear
from .datagen import (
    ASSOC_COEF_NAMES,
    DEFAULT_DERIVATION_SEED,
    EXPOSURE_COEF_INDEX,
    SCENARIO_GAMMAS,
    SCENARIO_LABELS,
    GeneratedCohort,
    GeneratorCoefficients,
    ScenarioSpec,
    calibrate_gamma0,
    default_coefficients,
    derive_exposure_coefficient,
    derive_outcome_coefficients,
    export_registry,
    generate_cohort,
    replicate_stream,
    scenario_by_label,
    scenario_specs,
    to_analysis_dataset,
    true_association_coefficients,
)
from .dataset import AnalysisDataset
from .harness import (
    ReplicateRecord,
    ScenarioResult,
    SimulationReport,
    build_report,
    empirical_beta_variance,
    read_records,
    reference_variance,
    relative_bias,
    run_replicate,
    run_scenario,
    write_records,
    write_report,
)
from .response import (
    FitOptions,
    ResponseFit,
    fit_response,
    ipw_weights,
    known_probability_fit,
    linearized_weight_approx,
)
from .variance import (
    ESTIMATOR_KINDS,
    InfluenceDecomposition,
    VarianceEstimate,
    gamma_hat,
    linearized_variance,
    naive_variance,
    robust_variance,
    unscaled_full_sample_matrix,
)

__all__ = [
    "errors",
    "AnalysisDataset",
    "AssociationFit",
    "FitOptions",
    "ResponseFit",
    "VarianceEstimate",
    "InfluenceDecomposition",
    "GeneratedCohort",
    "GeneratorCoefficients",
    "ScenarioSpec",
    "ReplicateRecord",
    "ScenarioResult",
    "SimulationReport",
    "fit_response",
    "known_probability_fit",
    "ipw_weights",
    "linearized_weight_approx",
    "fit_weighted_linear",
    "naive_variance",
    "robust_variance",
    "linearized_variance",
    "gamma_hat",
    "unscaled_full_sample_matrix",
    "derive_exposure_coefficient",
    "derive_outcome_coefficients",
    "default_coefficients",
    "true_association_coefficients",
    "calibrate_gamma0",
    "scenario_specs",
    "scenario_by_label",
    "generate_cohort",
    "to_analysis_dataset",
    "replicate_stream",
    "export_registry",
    "run_replicate",
    "run_scenario",
    "reference_variance",
    "empirical_beta_variance",
    "relative_bias",
    "build_report",
    "write_report",
    "write_records",
    "read_records",
    "ASSOC_COEF_NAMES",
    "EXPOSURE_COEF_INDEX",
    "SCENARIO_LABELS",
    "SCENARIO_GAMMAS",
    "DEFAULT_DERIVATION_SEED",
    "ESTIMATOR_KINDS",
]
