"""Nested feature-condition ablation with paired bootstrap tests."""

from __future__ import annotations

import numpy as np
import pandas as pd

from ..features.design import PERSON_MEAN, PRIOR
from ..inference_stats import holm_bonferroni
from .metrics import EvaluationError, bootstrap_suite, paired_auc_delta
from .modeling import FeatureSet, ModelSpec, fit_model, parallel_map

CONDITION_NAMES = ("prior_cesd_only", "+behavioral", "+lags", "+person_mean")


def ablation_conditions(fs: FeatureSet) -> list[tuple[str, list[str]]]:
    c1 = [PRIOR]
    c2 = c1 + list(fs.demographic) + list(fs.behavioral)
    c3 = c2 + list(fs.lags)
    c4 = c3 + [PERSON_MEAN]
    return list(zip(CONDITION_NAMES, [c1, c2, c3, c4]))


def check_nested(conditions) -> None:
    for (n0, a), (n1, b) in zip(conditions, conditions[1:]):
        if not set(a) <= set(b):
            raise EvaluationError(f"condition {n1!r} does not contain {n0!r}; "
                                  "ablation conditions must be nested")


def ablation_run(labeled: pd.DataFrame, spec: ModelSpec, conditions,
                 n_resamples: int = 1000, seed: int = 42, threads: int | None = None,
                 predictions: dict | None = None) -> pd.DataFrame:
    """Fit each condition on train rows, score test rows, test each step against the last.

    ``p_raw`` is the share of paired resamples whose AUC gain is <= 0. Pass a
    dict as ``predictions`` to collect the test probabilities per condition.
    """
    check_nested(conditions)
    train = labeled[labeled["split"] == "train"]
    test = labeled[labeled["split"] == "test"]
    y = test["label"].to_numpy(dtype=int)

    def run(cond):
        name, cols = cond
        return fit_model(spec, train, cols).predict_proba(test)

    probas = parallel_map(run, conditions, threads)
    rows = []
    for step, ((name, cols), proba) in enumerate(zip(conditions, probas), start=1):
        res = bootstrap_suite(y, proba, n_resamples=n_resamples, seed=seed)["auc"]
        row = {"step": step, "condition": name, "n_features": len(cols),
               "auc": res.point, "auc_ci_low": res.ci_low, "auc_ci_high": res.ci_high,
               "delta_auc": np.nan, "delta_auc_boot_mean": np.nan, "delta_ci_low": np.nan,
               "delta_ci_high": np.nan, "p_raw": np.nan}
        if step > 1:
            d = paired_auc_delta(y, probas[step - 2], proba, n_resamples, seed)
            row.update(delta_auc=d.delta, delta_auc_boot_mean=d.boot_mean,
                       delta_ci_low=d.ci_low, delta_ci_high=d.ci_high, p_raw=d.p_value)
        rows.append(row)
        if predictions is not None:
            predictions[name] = proba
    return pd.DataFrame(rows)


def apply_holm(tables: dict[str, pd.DataFrame], family_step: int = 4,
               alpha: float = 0.05) -> pd.DataFrame:
    """Stack per-label tables and Holm-correct the ``family_step`` rows across labels.

    Other steps keep raw p-values only; they are not part of the corrected family.
    """
    labels = list(tables)
    out = pd.concat([t.assign(label=lab) for lab, t in tables.items()], ignore_index=True)
    fam = out["step"] == family_step
    out["p_holm"] = np.nan
    out.loc[fam, "p_holm"] = holm_bonferroni(out.loc[fam, "p_raw"].to_numpy())
    out["significant"] = out["p_holm"] < alpha
    cols = ["label", *[c for c in out.columns if c != "label"]]
    out = out[cols]
    out["label"] = pd.Categorical(out["label"], categories=labels, ordered=True)
    return out.sort_values(["label", "step"], kind="stable").reset_index(drop=True) \
        .astype({"label": str})
