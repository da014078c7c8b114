"""Classification metrics, percentile bootstrap and paired AUC differences."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .. import N_CLASSES, WORSENING

log = logging.getLogger(__name__)

METRICS = ("auc", "balanced_accuracy", "sensitivity_worsening", "ppv_worsening")
N_RESAMPLES = 1000
BOOTSTRAP_SEED = 42
MAX_DEGENERATE = 0.5


class EvaluationError(ValueError):
    pass


def _check(y_true, other):
    y = np.asarray(y_true, dtype=int)
    o = np.asarray(other)
    if len(y) != len(o):
        raise EvaluationError(f"length mismatch: {len(y)} labels vs {len(o)} predictions")
    return y, o


def predict_labels(proba, worsening_threshold: float | None = None) -> np.ndarray:
    """Argmax, or worsening whenever its probability reaches ``worsening_threshold``."""
    proba = np.asarray(proba, dtype=float)
    pred = proba.argmax(axis=1)
    if worsening_threshold is not None:
        rest = proba[:, :WORSENING].argmax(axis=1)
        pred = np.where(proba[:, WORSENING] >= worsening_threshold, WORSENING, rest)
    return pred


def auc_binary(pos_mask, scores) -> float:
    """Mann-Whitney AUC with tied scores counted as one half."""
    pos_mask = np.asarray(pos_mask, dtype=bool)
    n_pos = int(pos_mask.sum())
    n_neg = len(pos_mask) - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = rankdata(scores)
    return float((ranks[pos_mask].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def auc_per_class(y_true, proba) -> np.ndarray:
    y, proba = _check(y_true, proba)
    return np.array([auc_binary(y == c, proba[:, c]) for c in range(N_CLASSES)])


def auc_ovr_macro(y_true, proba) -> float:
    """One-vs-rest AUC averaged over the classes present in ``y_true``."""
    per = auc_per_class(y_true, proba)
    present = ~np.isnan(per)
    if present.sum() < N_CLASSES:
        warnings.warn(f"classes {np.flatnonzero(~present).tolist()} absent or universal in "
                      "y_true; macro AUC averages the rest", RuntimeWarning, stacklevel=2)
    if not present.any():
        return float("nan")
    return float(per[present].mean())


def confusion_matrix(y_true, y_pred) -> np.ndarray:
    y, p = _check(y_true, y_pred)
    return np.bincount(y * N_CLASSES + p.astype(int),
                       minlength=N_CLASSES ** 2).reshape(N_CLASSES, N_CLASSES)


def recalls(y_true, y_pred) -> np.ndarray:
    cm = confusion_matrix(y_true, y_pred)
    support = cm.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(support > 0, np.diag(cm) / np.maximum(support, 1), np.nan)


def balanced_accuracy(y_true, y_pred) -> float:
    r = recalls(y_true, y_pred)
    return float(np.nanmean(r)) if np.any(~np.isnan(r)) else float("nan")


def sensitivity_worsening(y_true, y_pred) -> float:
    return float(recalls(y_true, y_pred)[WORSENING])


def ppv_worsening(y_true, y_pred) -> float:
    """NaN when nothing is predicted worsening."""
    y, p = _check(y_true, y_pred)
    called = p == WORSENING
    return float(np.mean(y[called] == WORSENING)) if called.any() else float("nan")


def metric_suite(y_true, proba, y_pred=None) -> dict:
    proba = np.asarray(proba, dtype=float)
    if y_pred is None:
        y_pred = predict_labels(proba)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        auc = auc_ovr_macro(y_true, proba)
    return {"auc": auc, "balanced_accuracy": balanced_accuracy(y_true, y_pred),
            "sensitivity_worsening": sensitivity_worsening(y_true, y_pred),
            "ppv_worsening": ppv_worsening(y_true, y_pred)}


@dataclass(frozen=True)
class MetricResult:
    point: float
    ci_low: float
    ci_high: float
    n_resamples: int = N_RESAMPLES
    seed: int = BOOTSTRAP_SEED
    n_degenerate: int = 0
    n_undefined: int = 0

    @property
    def defined(self) -> bool:
        return bool(np.isfinite(self.point))

    def as_dict(self, prefix: str = "") -> dict:
        return {f"{prefix}": self.point, f"{prefix}_ci_low": self.ci_low,
                f"{prefix}_ci_high": self.ci_high}


def resample_indices(n: int, n_resamples: int = N_RESAMPLES, seed: int = BOOTSTRAP_SEED):
    if n < 2:
        raise EvaluationError("bootstrap needs at least 2 observations")
    return np.random.default_rng(seed).integers(0, n, size=(n_resamples, n))


def _degenerate(y: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Resamples missing a class that appears in the full sample."""
    present = np.bincount(y, minlength=N_CLASSES) > 0
    counts = np.stack([(y[idx] == c).sum(axis=1) for c in range(N_CLASSES)], axis=1)
    return np.any((counts == 0) & present, axis=1)


def _usable(y, idx):
    bad = _degenerate(y, idx)
    if bad.mean() > MAX_DEGENERATE:
        raise EvaluationError(
            f"{int(bad.sum())} of {len(idx)} bootstrap resamples miss a class; the test set "
            "is too small or too imbalanced for a percentile interval (pool more rows)")
    return idx[~bad], int(bad.sum())


def batch_auc(y, proba, idx) -> np.ndarray:
    """Macro OvR AUC for every resample row of ``idx``, vectorized."""
    yb = y[idx]
    out = np.zeros(len(idx))
    n_present = np.zeros(len(idx))
    for c in range(N_CLASSES):
        ranks = rankdata(proba[idx, c], axis=1)
        pos = yb == c
        n_pos = pos.sum(axis=1)
        n_neg = idx.shape[1] - n_pos
        ok = (n_pos > 0) & (n_neg > 0)
        rsum = np.where(pos, ranks, 0.0).sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            auc = (rsum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)
        out += np.where(ok, auc, 0.0)
        n_present += ok
    with np.errstate(invalid="ignore"):  # single-class resamples have no AUC
        return out / n_present


def batch_label_metrics(y, pred, idx) -> dict:
    yb, pb = y[idx], pred[idx]
    rec = []
    for c in range(N_CLASSES):
        sup = (yb == c).sum(axis=1)
        hit = ((yb == c) & (pb == c)).sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            rec.append(np.where(sup > 0, hit / sup, np.nan))
    rec = np.stack(rec, axis=1)
    called = (pb == WORSENING).sum(axis=1)
    tp = ((pb == WORSENING) & (yb == WORSENING)).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return {"balanced_accuracy": np.nanmean(rec, axis=1),
                "sensitivity_worsening": rec[:, WORSENING],
                "ppv_worsening": np.where(called > 0, tp / np.maximum(called, 1), np.nan)}


def _interval(point, values, n_resamples, seed, n_bad) -> MetricResult:
    finite = values[np.isfinite(values)]
    undefined = len(values) - len(finite)
    if not np.isfinite(point) or len(finite) < (1 - MAX_DEGENERATE) * len(values):
        return MetricResult(point, float("nan"), float("nan"), n_resamples, seed, n_bad, undefined)
    lo, hi = np.percentile(finite, [2.5, 97.5])
    return MetricResult(float(point), float(lo), float(hi), n_resamples, seed, n_bad, undefined)


def bootstrap_suite(y_true, proba, y_pred=None, n_resamples: int = N_RESAMPLES,
                    seed: int = BOOTSTRAP_SEED) -> dict[str, MetricResult]:
    """All four metrics with percentile intervals over one shared set of resamples."""
    y, proba = _check(y_true, proba)
    proba = np.asarray(proba, dtype=float)
    pred = predict_labels(proba) if y_pred is None else np.asarray(y_pred, dtype=int)
    point = metric_suite(y, proba, pred)
    idx, n_bad = _usable(y, resample_indices(len(y), n_resamples, seed))
    values = {"auc": batch_auc(y, proba, idx), **batch_label_metrics(y, pred, idx)}
    return {k: _interval(point[k], values[k], n_resamples, seed, n_bad) for k in METRICS}


def bootstrap_ci(metric_fn, y_true, scores, n_resamples: int = N_RESAMPLES,
                 seed: int = BOOTSTRAP_SEED) -> MetricResult:
    """Percentile interval for any ``metric_fn(y, scores)``; resamples as in :func:`bootstrap_suite`."""
    y, scores = _check(y_true, scores)
    point = float(metric_fn(y, scores))
    idx, n_bad = _usable(y, resample_indices(len(y), n_resamples, seed))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        values = np.array([metric_fn(y[i], scores[i]) for i in idx], dtype=float)
    return _interval(point, values, n_resamples, seed, n_bad)


@dataclass(frozen=True)
class PairedDelta:
    delta: float
    ci_low: float
    ci_high: float
    p_value: float
    n_used: int
    boot_mean: float = float("nan")


def paired_auc_delta(y_true, proba_base, proba_new, n_resamples: int = N_RESAMPLES,
                     seed: int = BOOTSTRAP_SEED) -> PairedDelta:
    """AUC(new) - AUC(base) on shared resamples; p is the share of resamples with delta <= 0."""
    y = np.asarray(y_true, dtype=int)
    a, b = np.asarray(proba_base, dtype=float), np.asarray(proba_new, dtype=float)
    if not len(y) == len(a) == len(b):
        raise EvaluationError("paired comparison needs aligned predictions")
    point = metric_suite(y, b)["auc"] - metric_suite(y, a)["auc"]
    idx, _ = _usable(y, resample_indices(len(y), n_resamples, seed))
    d = batch_auc(y, b, idx) - batch_auc(y, a, idx)
    lo, hi = np.percentile(d, [2.5, 97.5])
    return PairedDelta(float(point), float(lo), float(hi), float(np.mean(d <= 0)), len(idx),
                       float(d.mean()))
