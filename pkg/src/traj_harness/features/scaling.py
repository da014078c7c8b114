"""Split-aware z-scoring with per-family column policies."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .design import BOUNDED, PRIOR

log = logging.getLogger(__name__)

SD_FLOOR = 1e-12
FAMILIES = ("tree", "elasticnet")


@dataclass(frozen=True)
class Scaler:
    columns: tuple[str, ...]
    mean: tuple[float, ...]
    sd: tuple[float, ...]
    policy: tuple[str, ...]  # "zscore" or "passthrough" per column
    family: str

    def to_dict(self) -> dict:
        return {"family": self.family,
                "columns": {c: {"mean": m, "sd": s, "policy": p}
                            for c, m, s, p in zip(self.columns, self.mean, self.sd,
                                                  self.policy)}}


def column_policy(column: str, family: str) -> str:
    if family == "elasticnet":
        return "zscore"
    if family == "tree":
        return "passthrough" if column in BOUNDED or column == PRIOR else "zscore"
    raise ValueError(f"unknown model family {family!r}; expected one of {FAMILIES}")


def fit_scaler(train: pd.DataFrame, family: str, columns=None) -> Scaler:
    """Estimate column means and SDs (population SD) on training rows only."""
    columns = list(columns if columns is not None else train.columns)
    X = train[columns].to_numpy(dtype=float)
    mean = X.mean(axis=0) if len(X) else np.zeros(len(columns))
    sd = X.std(axis=0) if len(X) else np.ones(len(columns))
    policy = [column_policy(c, family) for c in columns]
    for c, s, p in zip(columns, sd, policy):
        if p == "zscore" and s < SD_FLOOR:
            log.warning("column %s is constant on train rows; scaled to 0", c)
    return Scaler(tuple(columns), tuple(map(float, mean)), tuple(map(float, sd)),
                  tuple(policy), family)


def apply_scaler(scaler: Scaler, matrix: pd.DataFrame) -> pd.DataFrame:
    """Scaled copy; constant train columns map to 0 everywhere."""
    out = matrix.copy()
    for c, m, s, p in zip(scaler.columns, scaler.mean, scaler.sd, scaler.policy):
        if p != "zscore":
            continue
        x = out[c].to_numpy(dtype=float)
        out[c] = np.zeros_like(x) if s < SD_FLOOR else (x - m) / s
    return out
