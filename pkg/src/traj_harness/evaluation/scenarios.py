"""Deployment scenarios (stale assessments) and demographic subgroup reports."""

from __future__ import annotations

import logging

import numpy as np
import pandas as pd

from ..datamodel.records import Cohort
from ..features.design import PRIOR
from .metrics import METRICS, EvaluationError, bootstrap_suite, confusion_matrix

log = logging.getLogger(__name__)

SUBGROUP_AXES = ("sex", "race", "ethnicity", "age_tercile", "income")


def stale_prior(frame: pd.DataFrame, cohort: Cohort, k: int) -> tuple[pd.DataFrame, int]:
    """Replace ``prior_cesd`` with the score ``k`` assessments before the current one.

    Rows without that much history are dropped; returns the frame and the drop count.
    ``k = 0`` is the identity.
    """
    if k < 0:
        raise EvaluationError(f"staleness must be >= 0 periods, got {k}")
    lookup = {}
    for p in cohort:
        idx = p.assessments.index.tolist()
        cesd = p.assessments.cesd.tolist()
        for pos, i in enumerate(idx):
            opening = pos - 1  # assessment that opens period i
            if opening - k >= 0:
                lookup[(p.participant_id, i)] = float(cesd[opening - k])
    keys = list(zip(frame["participant_id"], frame["period_index"].astype(int)))
    vals = np.array([lookup.get(key, np.nan) for key in keys])
    keep = ~np.isnan(vals)
    out = frame.loc[keep].copy()
    out[PRIOR] = vals[keep]
    return out, int((~keep).sum())


def staleness_scenario(test: pd.DataFrame, cohort: Cohort, model, k: int,
                       n_resamples: int = 1000, seed: int = 42) -> dict:
    """Metrics of an already-fitted model when its prior CES-D is ``k`` periods old."""
    if k <= 0:
        raise EvaluationError(f"staleness scenario needs k >= 1, got {k}")
    stale, dropped = stale_prior(test, cohort, k)
    y = stale["label"].to_numpy(dtype=int)
    res = bootstrap_suite(y, model.predict_proba(stale), n_resamples=n_resamples, seed=seed)
    return {"scenario": f"stale_{k}", "n_obs": len(stale), "n_dropped": dropped,
            "results": res}


def _age_terciles(ages: pd.Series):
    q1, q2 = np.quantile(ages.to_numpy(dtype=float), [1 / 3, 2 / 3])
    return q1, q2


def subgroup_labels(cohort: Cohort, axis: str) -> dict[str, str | None]:
    """Group per participant on one axis; ``None`` leaves a participant out of the split."""
    demo = {p.participant_id: p.demographics for p in cohort}
    if axis == "sex":
        return {k: d.gender if d.gender in ("female", "male") else None for k, d in demo.items()}
    if axis == "race":
        return {k: "white" if d.is_white_only else "non_white" for k, d in demo.items()}
    if axis == "ethnicity":
        return {k: d.ethnicity if d.ethnicity != "unknown" else None for k, d in demo.items()}
    if axis == "income":
        return {k: d.income_band if d.income_band != "undisclosed" else None
                for k, d in demo.items()}
    if axis == "age_tercile":
        ages = pd.Series({k: d.age_years for k, d in demo.items()})
        q1, q2 = _age_terciles(ages)
        return {k: "younger" if a <= q1 else "middle" if a <= q2 else "older"
                for k, a in ages.items()}
    raise EvaluationError(f"unknown subgroup axis {axis!r}; expected one of {SUBGROUP_AXES}")


def subgroup_report(test: pd.DataFrame, proba, cohort: Cohort, axes=SUBGROUP_AXES,
                    min_n: int = 10, n_resamples: int = 1000, seed: int = 42) -> pd.DataFrame:
    """Fixed predictions sliced by demographic group; no refitting.

    Groups under ``min_n`` test rows, or whose bootstrap cannot be formed, keep
    their counts but carry blank metrics and a note.
    """
    proba = np.asarray(proba, dtype=float)
    y = test["label"].to_numpy(dtype=int)
    pids = test["participant_id"].to_numpy()
    rows = [_group_row("overall", "all", np.ones(len(y), dtype=bool), y, proba, pids,
                       min_n, n_resamples, seed)]
    for axis in axes:
        groups = subgroup_labels(cohort, axis)
        g = np.array([groups.get(p) for p in pids], dtype=object)
        for name in sorted({v for v in groups.values() if v is not None}):
            rows.append(_group_row(axis, name, g == name, y, proba, pids, min_n,
                                   n_resamples, seed))
    return pd.DataFrame(rows)


def _group_row(axis, name, mask, y, proba, pids, min_n, n_resamples, seed) -> dict:
    yy, pp = y[mask], proba[mask]
    row = {"axis": axis, "group": name, "n_participants": len(set(pids[mask])),
           "n_obs": int(mask.sum()), "n_worsening": int((yy == 2).sum())}
    cm = confusion_matrix(yy, pp.argmax(axis=1)) if len(yy) else np.zeros((3, 3), int)
    row.update({f"cm_{i}{j}": int(cm[i, j]) for i in range(3) for j in range(3)})
    note = ""
    res = None
    if mask.sum() < min_n:
        note = f"suppressed: fewer than {min_n} observations"
    else:
        try:
            res = bootstrap_suite(yy, pp, n_resamples=n_resamples, seed=seed)
        except EvaluationError as exc:
            note = f"suppressed: {exc}"
    for m in METRICS:
        r = res[m] if res else None
        row[m] = r.point if r else np.nan
        row[f"{m}_ci_low"] = r.ci_low if r else np.nan
        row[f"{m}_ci_high"] = r.ci_high if r else np.nan
    if res and np.isnan(row["sensitivity_worsening"]):
        note = "no worsening events; sensitivity undefined"
    row["note"] = note
    return row
