"""Rule-based comparators scored with one-hot pseudo-probabilities."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .. import IMPROVING, N_CLASSES, STABLE, WORSENING
from ..labels import severity_band, severity_bands
from .weights import LearnerError

log = logging.getLogger(__name__)

BASELINES = ("all_stable", "person_modal", "last_value_carried_forward",
             "regression_to_person_mean")
DEFAULT_MARGIN = 0.9


def pseudo_scores(pred, margin: float = DEFAULT_MARGIN) -> np.ndarray:
    """One-hot rows with ``margin`` on the predicted class and the rest split evenly."""
    pred = np.asarray(pred, dtype=int)
    if not 1 / N_CLASSES <= margin <= 1:
        raise LearnerError(f"margin must be in [1/3, 1], got {margin}")
    out = np.full((len(pred), N_CLASSES), (1 - margin) / (N_CLASSES - 1))
    out[np.arange(len(pred)), pred] = margin
    return out


def band_direction(current_band: int, typical_band: int) -> int:
    """Class that moves the current band back toward the typical one."""
    if current_band < typical_band:
        return WORSENING
    if current_band > typical_band:
        return IMPROVING
    return STABLE


@dataclass(frozen=True)
class BaselinePredictor:
    kind: str
    modal: dict = field(default_factory=dict)
    typical_band: dict = field(default_factory=dict)
    margin: float = DEFAULT_MARGIN

    def predict(self, frame: pd.DataFrame) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Predicted class, pseudo-scores and a fallback flag per row.

        ``last_value_carried_forward`` reads the ``prev_label`` column, the true
        label of the participant's preceding period (NaN for the first one).
        """
        n = len(frame)
        pred = np.full(n, STABLE, dtype=int)
        fallback = np.zeros(n, dtype=bool)
        pids = frame["participant_id"].to_numpy()
        if self.kind == "person_modal":
            known = np.array([p in self.modal for p in pids], dtype=bool)
            pred[known] = [self.modal[p] for p in pids[known]]
            fallback = ~known
        elif self.kind == "regression_to_person_mean":
            known = np.array([p in self.typical_band for p in pids], dtype=bool)
            cur = severity_bands(frame["prior_cesd"].to_numpy(dtype=float))
            typ = np.array([self.typical_band.get(p, 0) for p in pids])
            pred = np.where(cur < typ, WORSENING, np.where(cur > typ, IMPROVING, STABLE))
            pred[~known] = STABLE
            fallback = ~known
        elif self.kind == "last_value_carried_forward":
            if "prev_label" not in frame:
                raise LearnerError("last_value_carried_forward needs a prev_label column")
            prev = frame["prev_label"].to_numpy(dtype=float)
            pred = np.where(np.isnan(prev), STABLE, np.nan_to_num(prev)).astype(int)
        if fallback.any():
            log.warning("%s: %d rows from participants without train state; predicted stable",
                        self.kind, int(fallback.sum()))
        return pred, pseudo_scores(pred, self.margin), fallback

    def to_dict(self) -> dict:
        return {"kind": "baseline", "baseline": self.kind, "modal": self.modal,
                "typical_band": self.typical_band, "margin": self.margin}

    @classmethod
    def from_dict(cls, d: dict) -> "BaselinePredictor":
        return cls(d["baseline"], dict(d["modal"]), dict(d["typical_band"]), float(d["margin"]))


def fit_baseline(kind: str, train: pd.DataFrame, margin: float = DEFAULT_MARGIN) -> BaselinePredictor:
    """Per-participant state from train rows: modal label and typical severity band."""
    if kind not in BASELINES:
        raise LearnerError(f"unknown baseline {kind!r}; expected one of {BASELINES}")
    modal, typical = {}, {}
    if kind == "person_modal":
        for pid, labels in train.groupby("participant_id")["label"]:
            counts = np.bincount(labels.to_numpy(dtype=int), minlength=N_CLASSES)
            top = np.flatnonzero(counts == counts.max())
            modal[pid] = STABLE if STABLE in top or len(top) > 1 else int(top[0])
    elif kind == "regression_to_person_mean":
        for pid, pm in train.groupby("participant_id")["person_mean_cesd"].first().items():
            typical[pid] = int(severity_band(float(pm)))
    return BaselinePredictor(kind, modal, typical, margin)


def with_prev_label(labeled: pd.DataFrame) -> pd.DataFrame:
    """Add ``prev_label``: the label of each row's preceding retained period."""
    out = labeled.sort_values(["participant_id", "period_index"], kind="stable").copy()
    out["prev_label"] = out.groupby("participant_id")["label"].shift(1)
    return out.loc[labeled.index]


def baseline_predict(kind: str, state: BaselinePredictor | None, row: dict):
    """Single-row convenience wrapper returning ``(class, pseudo-scores)``."""
    frame = pd.DataFrame([row])
    if kind == "last_value_carried_forward" and "prev_label" not in frame:
        frame["prev_label"] = np.nan
    predictor = state if state is not None else BaselinePredictor(kind)
    if predictor.kind != kind:
        raise LearnerError(f"state was fit for {predictor.kind}, not {kind}")
    pred, scores, _ = predictor.predict(frame)
    return int(pred[0]), scores[0]
