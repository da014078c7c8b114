"""Balanced class weights and the shared softmax helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import N_CLASSES


class LearnerError(ValueError):
    pass


@dataclass(frozen=True)
class ClassWeights:
    weights: tuple[float, float, float]

    def sample_weights(self, y) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)[np.asarray(y, dtype=int)]

    def to_dict(self) -> dict:
        return {"weights": list(self.weights)}


def balanced_class_weights(y) -> ClassWeights:
    """n_total / (n_classes * n_c); absent classes get weight 0."""
    y = np.asarray(y, dtype=int)
    counts = np.bincount(y, minlength=N_CLASSES).astype(float)
    w = np.where(counts > 0, len(y) / (N_CLASSES * np.maximum(counts, 1)), 0.0)
    return ClassWeights(tuple(float(v) for v in w))


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def weighted_log_loss(y, margins, sample_weight=None) -> float:
    """Weighted mean cross-entropy of softmax(margins)."""
    y = np.asarray(y, dtype=int)
    w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    lp = log_softmax(np.asarray(margins, dtype=float))
    return float(-(w * lp[np.arange(len(y)), y]).sum() / w.sum())


def check_xy(X, y=None, feature_names=None):
    """Return float X, int y and feature names; reject non-finite input."""
    names = list(X.columns) if hasattr(X, "columns") else None
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise LearnerError("X must be two-dimensional")
    if not np.all(np.isfinite(X)):
        raise LearnerError("X contains non-finite values")
    if names is None:
        names = list(feature_names) if feature_names is not None else [
            f"x{j}" for j in range(X.shape[1])]
    if y is None:
        return X, None, names
    y = np.asarray(y)
    if len(y) != len(X):
        raise LearnerError(f"X has {len(X)} rows but y has {len(y)}")
    if not np.all(np.isin(y, np.arange(N_CLASSES))):
        raise LearnerError("labels must be in {0, 1, 2}")
    y = y.astype(int)
    if len(np.unique(y)) < 2:
        raise LearnerError("y has a single class; nothing to learn")
    return X, y, names


def check_predict_input(X, feature_names) -> np.ndarray:
    if hasattr(X, "columns"):
        if list(X.columns) != list(feature_names):
            missing = set(feature_names) - set(X.columns)
            raise LearnerError(f"column mismatch with training features (missing {sorted(missing)})"
                               if missing else "column order differs from training features")
        X = X.to_numpy(dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(feature_names):
        raise LearnerError(f"expected {len(feature_names)} columns, got "
                           f"{X.shape[1] if X.ndim == 2 else X.ndim}")
    return X
