"""Splits, metrics, model selection, cold-start CV, deployment scenarios and ablation."""

from .ablation import CONDITION_NAMES, ablation_conditions, ablation_run, apply_holm, check_nested
from .logo import LogoPlan, logo_cv, make_logo_plan, summarize_logo
from .metrics import (METRICS, EvaluationError, MetricResult, PairedDelta, auc_ovr_macro,
                      balanced_accuracy, bootstrap_ci, bootstrap_suite, confusion_matrix,
                      metric_suite, paired_auc_delta, ppv_worsening, predict_labels,
                      sensitivity_worsening)
from .modeling import (FAMILIES, FeatureSet, FittedModel, ModelSpec, fit_model, grid_search,
                       select_features)
from .scenarios import SUBGROUP_AXES, stale_prior, staleness_scenario, subgroup_report
from .splits import SPLITS, SplitAssignment, SplitError, assign_splits, split_sizes, temporal_split

__all__ = [
    "CONDITION_NAMES", "ablation_conditions", "ablation_run", "apply_holm", "check_nested",
    "LogoPlan", "logo_cv", "make_logo_plan", "summarize_logo", "METRICS", "EvaluationError",
    "MetricResult", "PairedDelta", "auc_ovr_macro", "balanced_accuracy", "bootstrap_ci",
    "bootstrap_suite", "confusion_matrix", "metric_suite", "paired_auc_delta", "ppv_worsening",
    "predict_labels", "sensitivity_worsening", "FAMILIES", "FeatureSet", "FittedModel",
    "ModelSpec", "fit_model", "grid_search", "select_features", "SUBGROUP_AXES", "stale_prior",
    "staleness_scenario", "subgroup_report", "SPLITS", "SplitAssignment", "SplitError",
    "assign_splits", "split_sizes", "temporal_split",
]
