"""Three-class trajectory labels from consecutive CES-D scores.

Each design-matrix row pairs the score that opens its period (``prior_cesd``)
with the score that closes it (``next_cesd``); the label describes that change.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
import pandas as pd

from .datamodel.records import CESD_MAX, CESD_MIN

OPERATIONALIZATIONS = ("sev_crossing", "personal_sd", "balanced_tercile")
MODERATE_CUT, SEVERE_CUT = 16, 24
SD_FLOOR = 3.0


class LabelError(ValueError):
    pass


class TrajectoryLabel(IntEnum):
    IMPROVING = 0
    STABLE = 1
    WORSENING = 2


class SeverityBand(IntEnum):
    MINIMAL = 0
    MODERATE = 1
    SEVERE = 2


def severity_band(cesd: float) -> SeverityBand:
    if not CESD_MIN <= cesd <= CESD_MAX:
        raise LabelError(f"CES-D {cesd} outside {CESD_MIN}-{CESD_MAX}")
    if cesd < MODERATE_CUT:
        return SeverityBand.MINIMAL
    if cesd < SEVERE_CUT:
        return SeverityBand.MODERATE
    return SeverityBand.SEVERE


def severity_bands(cesd) -> np.ndarray:
    c = np.asarray(cesd, dtype=float)
    if np.any((c < CESD_MIN) | (c > CESD_MAX)):
        raise LabelError(f"CES-D outside {CESD_MIN}-{CESD_MAX}")
    return np.digitize(c, [MODERATE_CUT, SEVERE_CUT])


def _direction(diff) -> np.ndarray:
    return np.sign(np.asarray(diff)).astype(int) + 1  # -1/0/+1 -> 0/1/2


def label_severity_crossing(current_cesd: float, next_cesd: float) -> TrajectoryLabel:
    b0, b1 = severity_band(current_cesd), severity_band(next_cesd)
    return TrajectoryLabel(int(_direction(int(b1) - int(b0))))


@dataclass(frozen=True)
class PersonalThreshold:
    participant_id: str
    sd_train: float
    k: float = 1.0
    floor: float = SD_FLOOR

    @property
    def threshold(self) -> float:
        sd = self.sd_train if np.isfinite(self.sd_train) else 0.0
        return self.k * max(sd, self.floor)


def label_personalized(delta: float, threshold: PersonalThreshold | float) -> TrajectoryLabel:
    """Worsening/improving only when |delta| strictly exceeds the threshold."""
    t = threshold.threshold if isinstance(threshold, PersonalThreshold) else float(threshold)
    if delta > t:
        return TrajectoryLabel.WORSENING
    if delta < -t:
        return TrajectoryLabel.IMPROVING
    return TrajectoryLabel.STABLE


def fit_personal_thresholds(deltas_by_participant: dict, k: float = 1.0,
                            floor: float = SD_FLOOR) -> dict[str, PersonalThreshold]:
    """Sample (n-1) SD of each participant's train deltas; fewer than 2 falls back to the floor."""
    out = {}
    for pid, d in deltas_by_participant.items():
        d = np.asarray(d, dtype=float)
        sd = float(np.std(d, ddof=1)) if len(d) >= 2 else float("nan")
        out[pid] = PersonalThreshold(pid, sd, k, floor)
    return out


@dataclass(frozen=True)
class TercileCuts:
    """Cut values from train deltas ranked with seeded random tie-breaking.

    ``tie_probs`` maps each cut value to the class shares of the tied train
    observations; new deltas equal to a cut are drawn from those shares.
    """

    lower_cut: float
    upper_cut: float
    tie_seed: int
    tie_probs: dict = field(default_factory=dict)
    train_labels: tuple = ()


def fit_terciles(train_deltas, tie_seed: int = 42) -> TercileCuts:
    d = np.asarray(train_deltas, dtype=float)
    n = len(d)
    if n < 3:
        raise LabelError("need at least 3 train deltas for terciles")
    if np.all(d == d[0]):
        raise LabelError("all train deltas identical; terciles undefined")
    keys = np.random.default_rng([int(tie_seed), 0]).random(n)
    order = np.lexsort((keys, d))
    sizes = [n // 3 + (i < n % 3) for i in range(3)]
    labels = np.empty(n, dtype=int)
    labels[order] = np.repeat([0, 1, 2], sizes)
    ranked = d[order]
    lower, upper = float(ranked[sizes[0] - 1]), float(ranked[sizes[0] + sizes[1] - 1])
    probs = {}
    for cut in {lower, upper}:
        tied = labels[d == cut]
        probs[cut] = tuple(float(np.mean(tied == c)) for c in range(3))
    return TercileCuts(lower, upper, int(tie_seed), probs, tuple(labels.tolist()))


def label_terciles(deltas, cuts: TercileCuts, u=None) -> np.ndarray:
    """Vectorized tercile labels; ``u`` are uniforms used only for deltas equal to a cut."""
    d = np.asarray(deltas, dtype=float)
    if u is None:
        u = np.random.default_rng([cuts.tie_seed, 1]).random(len(d))
    u = np.asarray(u, dtype=float)
    out = np.where(d < cuts.lower_cut, 0, np.where(d > cuts.upper_cut, 2, 1))
    for cut, p in cuts.tie_probs.items():
        hit = d == cut
        if hit.any():
            out[hit] = np.searchsorted(np.cumsum(p)[:-1], u[hit], side="right")
    return out


def label_tercile(delta: float, cuts: TercileCuts, u: float = 0.5) -> TrajectoryLabel:
    return TrajectoryLabel(int(label_terciles([delta], cuts, [u])[0]))


@dataclass
class LabeledDataset:
    """Design-matrix rows joined to a trajectory label under one operationalization."""

    frame: pd.DataFrame
    operationalization: str
    config: dict
    thresholds: dict = field(default_factory=dict)
    cuts: TercileCuts | None = None

    @property
    def y(self) -> np.ndarray:
        return self.frame["label"].to_numpy(dtype=int)

    @property
    def config_hash(self) -> str:
        blob = json.dumps({"operationalization": self.operationalization, **self.config},
                          sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def split(self, name: str) -> pd.DataFrame:
        return self.frame[self.frame["split"] == name]

    def class_distribution(self) -> pd.DataFrame:
        tab = pd.crosstab(self.frame["split"], self.frame["label"]).reindex(
            columns=[0, 1, 2], fill_value=0)
        tab.columns = [t.name.lower() for t in TrajectoryLabel]
        return tab

    def to_csv(self, path, feature_columns) -> None:
        cols = ["participant_id", "period_index", "split"] + list(feature_columns) + ["label"]
        out = self.frame[cols].copy()
        out["label_config"] = self.config_hash
        out.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")


def label_dataset(matrix: pd.DataFrame, operationalization: str = "sev_crossing",
                  k: float = 1.0, floor: float = SD_FLOOR,
                  tie_seed: int = 42) -> LabeledDataset:
    """Attach ``delta`` and ``label`` columns; rows without a target score are dropped."""
    if operationalization not in OPERATIONALIZATIONS:
        raise LabelError(f"unknown operationalization {operationalization!r}; "
                         f"expected one of {OPERATIONALIZATIONS}")
    frame = matrix[matrix["next_cesd"].notna()].copy().reset_index(drop=True)
    cur = frame["prior_cesd"].to_numpy(dtype=float)
    nxt = frame["next_cesd"].to_numpy(dtype=float)
    delta = nxt - cur
    frame["delta"] = delta
    config = {"k": k, "floor": floor, "tie_seed": tie_seed}
    thresholds, cuts = {}, None

    if operationalization == "sev_crossing":
        labels = _direction(severity_bands(nxt) - severity_bands(cur))
    else:
        if "split" not in frame or frame["split"].isna().any():
            raise LabelError(f"{operationalization} needs train statistics; assign splits first")
        train = (frame["split"] == "train").to_numpy()
        if operationalization == "personal_sd":
            by_pid = {pid: delta[train & (frame["participant_id"] == pid).to_numpy()]
                      for pid in frame["participant_id"].unique()}
            thresholds = fit_personal_thresholds(by_pid, k, floor)
            t = frame["participant_id"].map(lambda p: thresholds[p].threshold).to_numpy()
            labels = np.where(delta > t, 2, np.where(delta < -t, 0, 1))
        else:
            cuts = fit_terciles(delta[train], tie_seed)
            labels = label_terciles(delta, cuts)
            labels[train] = cuts.train_labels
    frame["label"] = labels.astype(int)
    return LabeledDataset(frame, operationalization, config, thresholds, cuts)
