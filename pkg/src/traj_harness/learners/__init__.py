"""Elastic-net and gradient-boosted learners, rule baselines and introspection."""

from .baselines import (BASELINES, BaselinePredictor, band_direction, baseline_predict,
                        fit_baseline, pseudo_scores, with_prev_label)
from .elasticnet import (ElasticNetModel, fit_elasticnet, kkt_residual, objective, odds_ratios,
                         smooth_gradient, smooth_objective)
from .gbdt import PRESETS, GbdtModel, GbdtParams, Tree, fit_gbdt, gain_importance
from .io import FORMAT_VERSION, load_model, model_from_json, model_to_json, save_model
from .weights import (ClassWeights, LearnerError, balanced_class_weights, log_softmax, softmax,
                      weighted_log_loss)

__all__ = [
    "BASELINES", "BaselinePredictor", "band_direction", "baseline_predict", "fit_baseline",
    "pseudo_scores", "with_prev_label", "ElasticNetModel", "fit_elasticnet", "kkt_residual",
    "objective", "odds_ratios", "smooth_gradient", "smooth_objective", "PRESETS", "GbdtModel",
    "GbdtParams", "Tree", "fit_gbdt", "gain_importance", "FORMAT_VERSION", "load_model",
    "model_from_json", "model_to_json", "save_model", "ClassWeights", "LearnerError",
    "balanced_class_weights", "log_softmax", "softmax", "weighted_log_loss",
]
