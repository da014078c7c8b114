"""Observation periods, sessionization and per-period behavioral features."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Collection

import numpy as np

from ..datamodel.records import AssessmentSeries, EmbeddingStream, EventStream

log = logging.getLogger(__name__)

DAY = 86400.0
OVERNIGHT_END = 6 * 3600.0
SESSION_GAP = 15.0  # three missed 5-second captures


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class ObservationPeriod:
    participant_id: str
    period_index: int
    start_ts: float
    end_ts: float
    n_active_days: int = 0
    excluded: bool = False

    def __post_init__(self):
        if not self.start_ts < self.end_ts:
            raise FeatureError(f"period {self.period_index}: start {self.start_ts} "
                               f">= end {self.end_ts}")


@dataclass(frozen=True)
class Session:
    start: float
    end: float
    n_screens: int
    apps: frozenset


@dataclass(frozen=True)
class PeriodFeatures:
    mean_daily_screens: float
    mean_daily_unique_apps: float
    mean_daily_sessions: float
    sessions_per_screen: float
    overnight_ratio: float
    social_ratio: float
    social_screens: float
    clip_dispersion: float
    active_day_ratio: float
    overnight_screens: float = 0.0  # VIF-screened candidate, never a model input
    n_active_days: int = 0
    n_calendar_days: int = 0
    n_screens: int = 0
    n_sessions: int = 0
    degenerate: bool = False
    dispersion_degenerate: bool = False


def segment_periods(assessments: AssessmentSeries, exclusion_flags: Collection[int] = (),
                    participant_id: str = "") -> list[ObservationPeriod]:
    """Period k runs from assessment k-1 to assessment k; the first assessment opens none."""
    ts = np.asarray(assessments.ts, dtype=float)
    if np.any(np.diff(ts) <= 0):
        raise FeatureError(f"{participant_id}: assessment timestamps not strictly increasing")
    flags = set(int(f) for f in exclusion_flags)
    out = []
    for k in range(1, len(ts)):
        idx = int(assessments.index[k])
        out.append(ObservationPeriod(participant_id, idx, float(ts[k - 1]), float(ts[k]),
                                     excluded=idx in flags))
    return out


def session_ids(ts: np.ndarray, gap_seconds: float = SESSION_GAP) -> np.ndarray:
    """Session number per record; a gap strictly longer than ``gap_seconds`` starts a new one."""
    ts = np.asarray(ts, dtype=float)
    if len(ts) == 0:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate([[0], np.cumsum(np.diff(ts) > gap_seconds)])


def sessionize(ts, apps=None, gap_seconds: float = SESSION_GAP) -> list[Session]:
    ts = np.asarray(ts, dtype=float)
    if len(ts) == 0:
        return []
    if apps is None:
        apps = np.full(len(ts), "", dtype=object)
    apps = np.asarray(apps)
    sid = session_ids(ts, gap_seconds)
    bounds = np.flatnonzero(np.diff(sid)) + 1
    starts = np.concatenate([[0], bounds])
    ends = np.concatenate([bounds, [len(ts)]])
    return [Session(float(ts[s]), float(ts[e - 1]), int(e - s), frozenset(apps[s:e].tolist()))
            for s, e in zip(starts, ends)]


def clip_dispersion(vectors) -> float:
    """Mean cosine distance of each vector from the mean vector; 0 for no vectors."""
    x = np.asarray(vectors, dtype=float)
    if x.size == 0:
        return 0.0
    x = x.reshape(len(x), -1)
    mu = x.mean(axis=0)
    mu_norm = np.linalg.norm(mu)
    if mu_norm == 0:
        raise FeatureError("mean embedding is the zero vector; cosine undefined")
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0):
        raise FeatureError("zero embedding vector; cosine undefined")
    cos = (x @ mu) / (norms * mu_norm)
    return float(np.mean(1.0 - np.clip(cos, -1.0, 1.0)))


def _window(ts: np.ndarray, start: float, end: float) -> slice:
    lo, hi = np.searchsorted(ts, [start, end], side="left")
    return slice(int(lo), int(hi))


def compute_period_features(events: EventStream, embeddings: EmbeddingStream | None,
                            period: ObservationPeriod, utc_offset: float = 0.0,
                            gap_seconds: float = SESSION_GAP) -> PeriodFeatures:
    """Daily-average behavior over records in ``[period.start_ts, period.end_ts)``."""
    w = _window(events.ts, period.start_ts, period.end_ts)
    ts, apps, social = events.ts[w], events.app_id[w], events.is_social[w]
    # local calendar days touched by the half-open window [start, end)
    n_cal = int(np.ceil((period.end_ts + utc_offset) / DAY)
                - np.floor((period.start_ts + utc_offset) / DAY))
    n = len(ts)
    if n == 0:
        return PeriodFeatures(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                              n_calendar_days=n_cal, degenerate=True, dispersion_degenerate=True)

    local = ts + utc_offset
    day = np.floor(local / DAY).astype(np.int64)
    uniq_days = np.unique(day)
    n_active = len(uniq_days)
    sid = session_ids(ts, gap_seconds)
    n_sessions = int(sid[-1]) + 1
    _, app_codes = np.unique(apps, return_inverse=True)
    n_day_apps = len(np.unique(day * (int(app_codes.max()) + 1) + app_codes))
    overnight = int(np.sum((local - day * DAY) < OVERNIGHT_END))
    n_social = int(np.sum(social))

    mean_screens = n / n_active
    social_ratio = n_social / n
    overnight_ratio = overnight / n

    disp, disp_degenerate = 0.0, True
    if embeddings is not None and len(embeddings):
        ew = _window(embeddings.ts, period.start_ts, period.end_ts)
        if ew.stop > ew.start:
            disp, disp_degenerate = clip_dispersion(embeddings.vectors[ew]), False

    return PeriodFeatures(
        mean_daily_screens=mean_screens,
        mean_daily_unique_apps=n_day_apps / n_active,
        # sessions are counted on the day they start; every start day is an active day
        mean_daily_sessions=n_sessions / n_active,
        sessions_per_screen=n_sessions / n,
        overnight_ratio=overnight_ratio,
        social_ratio=social_ratio,
        social_screens=mean_screens * social_ratio,
        clip_dispersion=disp,
        active_day_ratio=n_active / n_cal,
        overnight_screens=overnight / n_active,
        n_active_days=n_active, n_calendar_days=n_cal, n_screens=n, n_sessions=n_sessions,
        degenerate=False, dispersion_degenerate=disp_degenerate,
    )
