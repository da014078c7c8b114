"""Model specifications, grid search and fitted-model bundles (VIF set + scaler + learner)."""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import hashlib
import json

import numpy as np
import pandas as pd

from ..features.design import BASE, BEHAVIORAL, DEMOGRAPHIC, PERSON_MEAN, PRIOR, VIF_EXCLUDED
from ..features.scaling import Scaler, apply_scaler, fit_scaler
from ..features.vif import vif_screen
from ..learners import (PRESETS, ClassWeights, GbdtParams, balanced_class_weights,
                        fit_elasticnet, fit_gbdt)
from .metrics import EvaluationError, balanced_accuracy

FAMILIES = ("gbdt", "gbdt_leafwise", "elasticnet")
VIF_THRESHOLD = 10.0

DEFAULT_GRIDS = {
    "gbdt": {"learning_rate": [0.01, 0.05], "max_depth": [3, 5], "n_estimators": [50, 100],
             "min_child_weight": [1.0, 3.0]},
    "gbdt_leafwise": {"learning_rate": [0.01, 0.05], "max_depth": [3, 5],
                      "n_estimators": [50, 100], "num_leaves": [15],
                      "min_child_samples": [10, 30]},
    "elasticnet": {"C": [0.01, 0.1, 0.5, 1.0], "l1_ratio": [0.5, 0.9, 0.99]},
}


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get("TRAJ_HARNESS_THREADS", "1") or 1)
    return max(1, int(threads))


def parallel_map(fn, items, threads: int | None = None) -> list:
    """Ordered map; each item carries its own seed so scheduling cannot change results."""
    items = list(items)
    n = resolve_threads(threads)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def task_seed(master: int, *task) -> int:
    """Stable 32-bit seed from a master seed and a task id."""
    blob = json.dumps([int(master), *map(str, task)]).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:4], "little")


@dataclass(frozen=True)
class ModelSpec:
    family: str
    params: dict = field(default_factory=dict)
    seed: int = 42

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise EvaluationError(f"unknown model family {self.family!r}; expected {FAMILIES}")

    @property
    def scaler_family(self) -> str:
        return "elasticnet" if self.family == "elasticnet" else "tree"

    def gbdt_params(self) -> GbdtParams:
        base = PRESETS[self.family]
        return GbdtParams(**{**base.__dict__, **self.params})

    def complexity(self) -> tuple:
        """Ordering key for tie-breaks: smaller is the simpler model."""
        if self.family == "elasticnet":
            return (self.params.get("C", 1.0), -self.params.get("l1_ratio", 0.5))
        p = self.gbdt_params()
        return (p.n_estimators, p.max_depth, p.leaf_cap, p.learning_rate,
                -p.min_child_weight, -p.min_child_samples)

    def fit_learner(self, X, y, names, weights: ClassWeights):
        if self.family == "elasticnet":
            prm = {"C": 1.0, "l1_ratio": 0.5, **self.params}
            return fit_elasticnet(X, y, class_weights=weights, seed=self.seed,
                                  feature_names=names, **prm)
        return fit_gbdt(X, y, self.gbdt_params(), weights, seed=self.seed, feature_names=names)

    def to_dict(self) -> dict:
        return {"family": self.family, "params": dict(self.params), "seed": self.seed}


@dataclass(frozen=True)
class FittedModel:
    spec: ModelSpec
    features: tuple[str, ...]
    scaler: Scaler
    model: object
    class_weights: ClassWeights

    def design(self, frame: pd.DataFrame) -> np.ndarray:
        return apply_scaler(self.scaler, frame[list(self.features)])[list(self.features)] \
            .to_numpy(dtype=float)

    def predict_proba(self, frame: pd.DataFrame) -> np.ndarray:
        return self.model.predict_proba(self.design(frame))


def fit_model(spec: ModelSpec, train: pd.DataFrame, features) -> FittedModel:
    """Scaler, class weights and learner, all from ``train`` rows only."""
    features = list(features)
    scaler = fit_scaler(train, spec.scaler_family, features)
    X = apply_scaler(scaler, train[features])[features].to_numpy(dtype=float)
    y = train["label"].to_numpy(dtype=int)
    weights = balanced_class_weights(y)
    model = spec.fit_learner(X, y, features, weights)
    return FittedModel(spec, tuple(features), scaler, model, weights)


@dataclass(frozen=True)
class FeatureSet:
    base: tuple[str, ...]
    behavioral: tuple[str, ...]
    demographic: tuple[str, ...]
    lags: tuple[str, ...]
    vif_log: tuple = ()

    @property
    def full(self) -> list[str]:
        return list(self.base) + list(self.lags) + [PERSON_MEAN]


def select_features(train: pd.DataFrame, threshold: float = VIF_THRESHOLD,
                    screen: bool = True) -> FeatureSet:
    """VIF-screen the base candidates on train rows; lags follow surviving behavioral columns."""
    candidates = BASE + [c for c in VIF_EXCLUDED if c in train.columns]
    if screen:
        kept, log = vif_screen(train[candidates], candidates, threshold)
    else:
        kept, log = list(BASE), []
    behavioral = [c for c in kept if c in BEHAVIORAL or c in VIF_EXCLUDED]
    demographic = [c for c in kept if c in DEMOGRAPHIC]
    base = [c for c in kept if c == PRIOR] + demographic + behavioral
    lags = [f"{c}_lag" for c in behavioral if f"{c}_lag" in train.columns]
    return FeatureSet(tuple(base), tuple(behavioral), tuple(demographic), tuple(lags),
                      tuple(log))


def expand_grid(grid: dict) -> list[dict]:
    keys = sorted(grid)
    return [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]


@dataclass(frozen=True)
class GridResult:
    best: ModelSpec
    table: pd.DataFrame


def grid_search(family: str, grid: dict, train: pd.DataFrame, val: pd.DataFrame, features,
                seed: int = 42, threads: int | None = None) -> GridResult:
    """Fit each grid point on train, score balanced accuracy on val.

    Equal scores go to the simpler model (fewer trees, then shallower; for the
    elastic net the larger penalty).
    """
    specs = [ModelSpec(family, p, seed) for p in expand_grid(grid)]
    y_val = val["label"].to_numpy(dtype=int)

    def score(spec):
        fm = fit_model(spec, train, features)
        return balanced_accuracy(y_val, fm.predict_proba(val).argmax(axis=1))

    scores = parallel_map(score, specs, threads)
    rows = [{"rank_key": i, **s.params, "val_balanced_accuracy": sc}
            for i, (s, sc) in enumerate(zip(specs, scores))]
    best = min(range(len(specs)), key=lambda i: (-scores[i], specs[i].complexity(), i))
    table = pd.DataFrame(rows).drop(columns="rank_key")
    table["selected"] = [i == best for i in range(len(specs))]
    return GridResult(specs[best], table)
