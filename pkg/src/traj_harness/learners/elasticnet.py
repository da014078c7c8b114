"""Elastic-net multinomial logistic regression fit by accelerated proximal gradient.

Objective (sklearn convention, intercepts unpenalized)::

    C * sum_i w_i * CE_i  +  l1_ratio * |W|_1  +  (1 - l1_ratio) / 2 * |W|_2^2
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import N_CLASSES, WORSENING
from .weights import (ClassWeights, LearnerError, check_predict_input, check_xy,
                      log_softmax, softmax)

STANDARDIZED_TOL = 1e-6


@dataclass(frozen=True)
class ElasticNetModel:
    coef: np.ndarray  # (3, p)
    intercept: np.ndarray  # (3,)
    C: float
    l1_ratio: float
    feature_names: tuple[str, ...]
    n_iter: int = 0
    converged: bool = False
    standardized: bool = False
    lipschitz: float = float("nan")
    trace: tuple = field(default=(), repr=False)

    kind = "elasticnet"

    def decision_function(self, X) -> np.ndarray:
        X = check_predict_input(X, self.feature_names)
        return X @ self.coef.T + self.intercept

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "coef": self.coef.tolist(),
                "intercept": self.intercept.tolist(), "C": self.C,
                "l1_ratio": self.l1_ratio, "feature_names": list(self.feature_names),
                "n_iter": self.n_iter, "converged": self.converged,
                "standardized": self.standardized, "lipschitz": self.lipschitz,
                "trace": [list(t) for t in self.trace]}

    @classmethod
    def from_dict(cls, d: dict) -> "ElasticNetModel":
        return cls(np.asarray(d["coef"], dtype=float), np.asarray(d["intercept"], dtype=float),
                   float(d["C"]), float(d["l1_ratio"]), tuple(d["feature_names"]),
                   int(d["n_iter"]), bool(d["converged"]), bool(d["standardized"]),
                   float(d["lipschitz"]), tuple(tuple(t) for t in d.get("trace", ())))


def smooth_objective(W, b, X, Y, w, C, l1_ratio) -> float:
    """Weighted cross-entropy term plus the ridge part of the penalty."""
    lp = log_softmax(X @ W.T + b)
    return float(-C * np.sum(w[:, None] * Y * lp) + 0.5 * (1 - l1_ratio) * np.sum(W * W))


def smooth_gradient(W, b, X, Y, w, C, l1_ratio):
    """Gradient of :func:`smooth_objective` with respect to (W, b)."""
    R = C * w[:, None] * (softmax(X @ W.T + b) - Y)
    return R.T @ X + (1 - l1_ratio) * W, R.sum(axis=0)


def objective(W, b, X, Y, w, C, l1_ratio) -> float:
    return smooth_objective(W, b, X, Y, w, C, l1_ratio) + l1_ratio * float(np.abs(W).sum())


def kkt_residual(model: ElasticNetModel, X, y, sample_weight) -> float:
    """Largest violation of the subgradient optimality conditions."""
    X = check_predict_input(X, model.feature_names)
    Y = np.eye(N_CLASSES)[np.asarray(y, dtype=int)]
    gW, gb = smooth_gradient(model.coef, model.intercept, X, Y, np.asarray(sample_weight, float),
                             model.C, model.l1_ratio)
    a = model.l1_ratio
    nz = model.coef != 0
    viol = np.where(nz, np.abs(gW + a * np.sign(model.coef)), np.maximum(np.abs(gW) - a, 0.0))
    return float(max(viol.max(initial=0.0), np.abs(gb).max()))


def _is_standardized(X: np.ndarray) -> bool:
    mean, sd = X.mean(axis=0), X.std(axis=0)
    return bool(np.all(np.abs(mean) < STANDARDIZED_TOL)
                and np.all((np.abs(sd - 1) < STANDARDIZED_TOL) | (sd < STANDARDIZED_TOL)))


def fit_elasticnet(X, y, C: float = 1.0, l1_ratio: float = 0.5,
                   class_weights: ClassWeights | None = None, tol: float = 1e-6,
                   max_epochs: int = 2000, seed: int = 42, sample_weight=None,
                   feature_names=None) -> ElasticNetModel:
    """FISTA with gradient-based restarts; stops when no coefficient moves more than ``tol``.

    The solver is full-batch and deterministic, so ``seed`` only exists for a
    uniform learner signature.
    """
    X, y, names = check_xy(X, y, feature_names)
    if not C > 0:
        raise LearnerError(f"C must be positive, got {C}")
    if not 0 <= l1_ratio <= 1:
        raise LearnerError(f"l1_ratio must be in [0, 1], got {l1_ratio}")
    n, p = X.shape
    if sample_weight is None:
        sample_weight = class_weights.sample_weights(y) if class_weights else np.ones(n)
    w = np.asarray(sample_weight, dtype=float)
    Y = np.eye(N_CLASSES)[y]

    Xa = np.column_stack([X, np.ones(n)])
    # softmax Hessian is bounded by I/2 per row
    L = 0.5 * C * float(np.linalg.eigvalsh((Xa * w[:, None]).T @ Xa)[-1]) + (1 - l1_ratio)
    step = 1.0 / L
    thresh = step * l1_ratio

    W = np.zeros((N_CLASSES, p))
    b = np.zeros(N_CLASSES)
    ZW, Zb, t = W.copy(), b.copy(), 1.0
    converged, it, trace = False, 0, []
    for it in range(1, max_epochs + 1):
        gW, gb = smooth_gradient(ZW, Zb, X, Y, w, C, l1_ratio)
        V = ZW - step * gW
        W_new = np.sign(V) * np.maximum(np.abs(V) - thresh, 0.0)
        b_new = Zb - step * gb
        dW, db = W_new - W, b_new - b
        change = max(np.abs(dW).max(initial=0.0), np.abs(db).max())
        # restart momentum when it points against the proximal step
        if np.sum((ZW - W_new) * dW) + np.sum((Zb - b_new) * db) > 0:
            t = 1.0
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        mom = (t - 1) / t_new
        ZW, Zb = W_new + mom * dW, b_new + mom * db
        W, b, t = W_new, b_new, t_new
        if it % 100 == 0:
            trace.append((it, objective(W, b, X, Y, w, C, l1_ratio)))
        if change < tol:
            converged = True
            break
    trace.append((it, objective(W, b, X, Y, w, C, l1_ratio)))
    return ElasticNetModel(W, b, float(C), float(l1_ratio), tuple(names), it, converged,
                           _is_standardized(X), L, tuple(trace))


def odds_ratios(model: ElasticNetModel, cls: int = WORSENING) -> dict[str, float]:
    """exp(coefficient) per feature, ordered by |log OR| descending (stable on ties)."""
    if not model.standardized:
        raise LearnerError("odds ratios need a model fit on z-scored features")
    c = model.coef[cls]
    order = sorted(range(len(c)), key=lambda j: -abs(c[j]))
    return {model.feature_names[j]: float(np.exp(c[j])) for j in order}
