"""Leave-group-out cross-validation over participants (cold start)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..features.design import PERSON_MEAN, with_person_mean
from .metrics import METRICS, EvaluationError, metric_suite
from .modeling import ModelSpec, fit_model, parallel_map, select_features, VIF_THRESHOLD


@dataclass(frozen=True)
class LogoPlan:
    participants: tuple[str, ...]
    n_repeats: int = 5
    n_folds: int = 5
    seed: int = 42
    folds: tuple = ()  # folds[repeat][fold] -> tuple of held-out participant ids

    def held_out(self, repeat: int, fold: int) -> tuple[str, ...]:
        return self.folds[repeat][fold]


def make_logo_plan(participants, n_repeats: int = 5, n_folds: int = 5, seed: int = 42) -> LogoPlan:
    """Shuffle participants per repeat and cut into near-equal folds (larger folds first)."""
    pids = tuple(sorted(participants))
    if n_folds < 2 or n_folds > len(pids):
        raise EvaluationError(f"cannot cut {len(pids)} participants into {n_folds} folds")
    folds = []
    for r in range(n_repeats):
        perm = np.random.default_rng([seed, r]).permutation(len(pids))
        folds.append(tuple(tuple(sorted(pids[i] for i in part))
                           for part in np.array_split(perm, n_folds)))
    return LogoPlan(pids, n_repeats, n_folds, seed, tuple(folds))


def logo_cv(labeled: pd.DataFrame, plan: LogoPlan, spec: ModelSpec,
            vif_threshold: float = VIF_THRESHOLD, screen: bool = True,
            threads: int | None = None) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Per-fold metrics and the repeat/overall summary.

    Each fold refits VIF screening, scaler and model on the held-in
    participants' train+val rows and scores the held-out participants' test
    rows, whose person-mean anchor is replaced by the held-in average.
    """
    tasks = [(r, f) for r in range(plan.n_repeats) for f in range(plan.n_folds)]

    def run(task):
        r, f = task
        out = set(plan.held_out(r, f))
        is_out = labeled["participant_id"].isin(out)
        held_in = labeled[~is_out]
        fit_rows = held_in[held_in["split"].isin(["train", "val"])]
        fs = select_features(fit_rows, vif_threshold, screen)
        model = fit_model(spec, fit_rows, fs.full)
        pop_mean = float(held_in.groupby("participant_id")[PERSON_MEAN].first().mean())
        test = labeled[is_out & (labeled["split"] == "test")]
        test = with_person_mean(test, out, pop_mean)
        y = test["label"].to_numpy(dtype=int)
        m = metric_suite(y, model.predict_proba(test))
        return {"repeat": r + 1, "fold": f + 1, "held_out_participants": len(out),
                "held_out_observations": len(test),
                "train_n": int((held_in["split"] == "train").sum()),
                "val_n": int((held_in["split"] == "val").sum()),
                "n_worsening": int((y == 2).sum()), **m,
                "no_worsening_predictions": bool(np.isnan(m["ppv_worsening"]))}

    folds = pd.DataFrame(parallel_map(run, tasks, threads))
    return folds, summarize_logo(folds)


def summarize_logo(folds: pd.DataFrame) -> pd.DataFrame:
    """Per-repeat means, the mean over all evaluations and the per-repeat range."""
    per = folds.groupby("repeat")[list(METRICS)].mean().reset_index()
    per["row"] = [f"repeat_{r}" for r in per["repeat"]]
    mean = {"row": "mean", **{m: float(folds[m].mean()) for m in METRICS}}
    lo = {"row": "range_min", **{m: float(per[m].min()) for m in METRICS}}
    hi = {"row": "range_max", **{m: float(per[m].max()) for m in METRICS}}
    out = pd.concat([per.drop(columns="repeat"), pd.DataFrame([mean, lo, hi])],
                    ignore_index=True)
    return out[["row", *METRICS]]
