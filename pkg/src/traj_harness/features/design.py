"""The 39-column design matrix: levels, deltas, lags, CES-D anchors, demographics."""

from __future__ import annotations

import numpy as np
import pandas as pd

from ..datamodel.records import Cohort
from .periods import SESSION_GAP, FeatureError, compute_period_features, segment_periods

LEVELS = [
    "mean_daily_screens", "mean_daily_unique_apps", "mean_daily_sessions",
    "sessions_per_screen", "overnight_ratio", "social_ratio", "social_screens",
    "clip_dispersion",
]
DELTAS = [f"{c}_delta" for c in LEVELS] + ["active_day_ratio_delta"]
BEHAVIORAL = LEVELS + DELTAS
LAGS = [f"{c}_lag" for c in BEHAVIORAL]
DEMOGRAPHIC = ["age", "gender_male", "gender_female"]
PRIOR = "prior_cesd"
PERSON_MEAN = "person_mean_cesd"
BASE = [PRIOR] + DEMOGRAPHIC + BEHAVIORAL
FEATURES = BASE + LAGS + [PERSON_MEAN]
# Screened out before modeling; only emitted on request for VIF audits.
VIF_EXCLUDED = ["active_day_ratio", "overnight_screens"]

BOUNDED = {"overnight_ratio", "social_ratio", "overnight_ratio_lag", "social_ratio_lag",
           "active_day_ratio",
           "gender_male", "gender_female"}

META = ["participant_id", "period_index", "split", "start_ts", "end_ts", "n_active_days",
        "next_cesd", "degenerate", "gap_flag"]

assert len(BASE) == 21 and len(LAGS) == 17 and len(FEATURES) == 39


def period_feature_table(cohort: Cohort, gap_seconds: float = SESSION_GAP) -> pd.DataFrame:
    """Behavioral levels for every non-excluded period of every participant."""
    rows = []
    for p in cohort:
        pid = p.participant_id
        flags = {k for (q, k) in cohort.excluded_periods if q == pid}
        a = p.assessments
        for pos, period in enumerate(segment_periods(a, flags, pid), start=1):
            if period.excluded:
                continue
            f = compute_period_features(p.events, p.embeddings, period,
                                        p.demographics.utc_offset, gap_seconds)
            rows.append({
                "participant_id": pid, "period_index": period.period_index,
                "position": pos, "start_ts": period.start_ts, "end_ts": period.end_ts,
                "n_active_days": f.n_active_days, "degenerate": f.degenerate,
                "prior_cesd": int(a.cesd[pos - 1]), "next_cesd": int(a.cesd[pos]),
                **{c: getattr(f, c) for c in LEVELS},
                "active_day_ratio": f.active_day_ratio,
                "overnight_screens": f.overnight_screens,
            })
    cols = (["participant_id", "period_index", "position", "start_ts", "end_ts",
             "n_active_days", "degenerate", "prior_cesd", "next_cesd"] + LEVELS + VIF_EXCLUDED)
    return pd.DataFrame(rows, columns=cols)


def person_means(cohort: Cohort, splits) -> dict[str, float]:
    """Mean CES-D over each participant's train-split assessments."""
    out = {}
    for p in cohort:
        a = p.assessments
        train = [int(c) for i, c in zip(a.index.tolist(), a.cesd.tolist())
                 if splits.tag(p.participant_id, i) == "train"]
        if not train:
            raise FeatureError(f"participant {p.participant_id} has no train assessments")
        out[p.participant_id] = float(np.mean(train))
    return out


def build_design_matrix(cohort: Cohort, splits, periods: pd.DataFrame | None = None,
                        vif_candidates: bool = False,
                        gap_seconds: float = SESSION_GAP) -> pd.DataFrame:
    """One row per retained period with :data:`META` columns then :data:`FEATURES`.

    Deltas and lags reach back to the nearest earlier retained period; rows
    where that skips an excluded period carry ``gap_flag``. A participant's
    first retained row has zero deltas and zero lags.
    """
    if periods is None:
        periods = period_feature_table(cohort, gap_seconds)
    means = person_means(cohort, splits)
    extra = VIF_EXCLUDED if vif_candidates else []
    blocks = []
    for pid, grp in periods.groupby("participant_id", sort=True):
        grp = grp.sort_values("period_index", kind="stable").reset_index(drop=True)
        demo = cohort[pid].demographics
        lev = grp[LEVELS].to_numpy(dtype=float)
        adr = grp["active_day_ratio"].to_numpy(dtype=float)
        n = len(grp)
        delta = np.zeros_like(lev)
        delta[1:] = lev[1:] - lev[:-1]
        adr_delta = np.zeros(n)
        adr_delta[1:] = adr[1:] - adr[:-1]
        behav = np.column_stack([lev, delta, adr_delta])
        lag = np.zeros_like(behav)
        lag[1:] = behav[:-1]
        pos = grp["position"].to_numpy()
        gap = np.zeros(n, dtype=bool)
        gap[1:] = np.diff(pos) > 1

        block = pd.DataFrame({
            "participant_id": pid,
            "period_index": grp["period_index"].to_numpy(),
            "split": [splits.tag(pid, k) for k in grp["period_index"].tolist()],
            "start_ts": grp["start_ts"].to_numpy(), "end_ts": grp["end_ts"].to_numpy(),
            "n_active_days": grp["n_active_days"].to_numpy(),
            "next_cesd": grp["next_cesd"].to_numpy(),
            "degenerate": grp["degenerate"].to_numpy(dtype=bool),
            "gap_flag": gap,
            PRIOR: grp["prior_cesd"].to_numpy(dtype=float),
            "age": float(demo.age_years),
            "gender_male": float(demo.gender == "male"),
            "gender_female": float(demo.gender == "female"),
        })
        for j, c in enumerate(BEHAVIORAL):
            block[c] = behav[:, j]
        for j, c in enumerate(LAGS):
            block[c] = lag[:, j]
        block[PERSON_MEAN] = means[pid]
        for c in extra:
            block[c] = grp[c].to_numpy(dtype=float)
        blocks.append(block)
    if not blocks:
        raise FeatureError("no retained periods to build a design matrix from")
    out = pd.concat(blocks, ignore_index=True)
    for pid, grp in out.groupby("participant_id"):
        if not (grp["split"] == "train").any():
            raise FeatureError(f"participant {pid} has zero train rows")
    return out[META + FEATURES + extra]


def with_person_mean(matrix: pd.DataFrame, participant_ids, value: float) -> pd.DataFrame:
    """Copy of ``matrix`` with the person-mean anchor overwritten for some participants."""
    out = matrix.copy()
    out.loc[out["participant_id"].isin(set(participant_ids)), PERSON_MEAN] = float(value)
    return out


def write_matrix_csv(matrix: pd.DataFrame, path) -> None:
    matrix.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
