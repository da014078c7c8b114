"""End-to-end run: ingest, include, split, featurize, screen, label, tune, fit, evaluate."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import CLASS_NAMES, __version__
from .config import RunConfig
from .datamodel import apply_inclusion, load_cohort_dir, synth_cohort
from .evaluation.ablation import ablation_conditions, ablation_run, apply_holm
from .evaluation.logo import logo_cv, make_logo_plan
from .evaluation.metrics import (METRICS, bootstrap_ci, bootstrap_suite, confusion_matrix,
                                 predict_labels)
from .evaluation.modeling import fit_model, grid_search, resolve_threads, select_features
from .evaluation.scenarios import staleness_scenario, subgroup_report
from .evaluation.splits import assign_splits
from .features.design import (DELTAS, LEVELS, PERSON_MEAN, PRIOR, build_design_matrix,
                              period_feature_table)
from .inference_stats import icc_oneway, within_person_correlations
from .labels import label_dataset
from .learners import (ElasticNetModel, GbdtModel, fit_baseline, gain_importance,
                       odds_ratios, save_model, with_prev_label)

log = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"
TABLE2_COLUMNS = ["model", "label", "n_test"] + [
    f"{m}{s}" for m in ("balanced_accuracy", "auc", "sensitivity_worsening", "ppv_worsening")
    for s in ("", "_ci_low", "_ci_high")] + ["ppv_defined"]


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str, config_hash: str = ""):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.message = message
        self.config_hash = config_hash

    def to_json(self) -> str:
        return json.dumps({"status": "error", "stage": self.stage, "error": self.message,
                           "config_hash": self.config_hash}, sort_keys=True)


@dataclass
class RunResult:
    out_dir: Path
    tables: dict = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)


def _metric_row(results: dict, **lead) -> dict:
    row = dict(lead)
    for m in ("balanced_accuracy", "auc", "sensitivity_worsening", "ppv_worsening"):
        r = results[m]
        row[m], row[f"{m}_ci_low"], row[f"{m}_ci_high"] = r.point, r.ci_low, r.ci_high
    row["ppv_defined"] = bool(np.isfinite(results["ppv_worsening"].point))
    return row


def _confusion_rows(name, y, pred) -> list[dict]:
    cm = confusion_matrix(y, pred)
    return [{"model": name, "true_class": CLASS_NAMES[i],
             **{f"pred_{CLASS_NAMES[j]}": int(cm[i, j]) for j in range(3)},
             "total": int(cm[i].sum())} for i in range(3)]


def icc_table(cohort, periods: pd.DataFrame) -> pd.DataFrame:
    rows = []
    pids = [p.participant_id for p in cohort for _ in range(len(p.assessments))]
    cesd = np.concatenate([p.assessments.cesd for p in cohort]).astype(float)
    for name, values, groups in [("cesd", cesd, pids)] + [
            (c, periods[c].to_numpy(dtype=float), periods["participant_id"].to_numpy())
            for c in LEVELS + ["active_day_ratio"]]:
        r = icc_oneway(values, groups)
        rows.append({"variable": name, "icc": r.icc, "msb": r.msb, "msw": r.msw,
                     "k_bar": r.k_bar, "n_groups": r.n_groups, "n_obs": r.n_obs,
                     "var_between": r.var_between, "var_within": r.var_within})
    return pd.DataFrame(rows)


def within_person_tables(labeled: pd.DataFrame) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Per-participant r between each behavioral change and the CES-D change over the same step."""
    frame = labeled.sort_values(["participant_id", "period_index"], kind="stable")
    first = frame.groupby("participant_id").cumcount() == 0
    frame = frame[~first].assign(cesd_delta=lambda d: d["next_cesd"] - d[PRIOR])
    per, summary = [], []
    for feat in DELTAS:
        s = within_person_correlations(frame, feat, "cesd_delta")
        per += [{"feature": feat, "participant_id": p, "r": r} for p, r in s.r.items()]
        summary.append(s.summary())
    return pd.DataFrame(per, columns=["feature", "participant_id", "r"]), pd.DataFrame(summary)


class _Stages:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.timings = {}

    def __call__(self, name, fn, *a, **kw):
        t0 = time.perf_counter()
        try:
            out = fn(*a, **kw)
        except PipelineError:
            raise
        except Exception as exc:  # surfaced with stage context
            raise PipelineError(name, f"{type(exc).__name__}: {exc}", self.cfg.config_hash) from exc
        self.timings[name] = round(time.perf_counter() - t0, 3)
        return out


def run_pipeline(cfg: RunConfig, out_dir=None, threads: int | None = None) -> RunResult:
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    threads = resolve_threads(threads if threads is not None else cfg.threads)
    stage = _Stages(cfg)
    tables: dict[str, pd.DataFrame] = {}
    flags: list[str] = []

    if cfg.input_dir:
        cohort = stage("ingest", load_cohort_dir, cfg.input_dir)
    else:
        cohort = stage("ingest", synth_cohort, cfg.synth_config(), cfg.seed)
    cohort, inclusion = stage("inclusion", apply_inclusion, cohort)
    splits = stage("split", assign_splits, cohort)
    periods = stage("featurize", period_feature_table, cohort)
    matrix = stage("featurize", build_design_matrix, cohort, splits, periods,
                   vif_candidates=True)

    labels_needed = [cfg.label] + [lab for lab in (cfg.ablation_labels if cfg.ablate else ())
                                   if lab != cfg.label]
    labeled = {lab: stage("label", label_dataset, matrix, lab, cfg.sd_k, tie_seed=cfg.tie_seed)
               for lab in labels_needed}
    main = labeled[cfg.label]
    frame = with_prev_label(main.frame)
    train, val, test = (frame[frame["split"] == s] for s in ("train", "val", "test"))
    tables["class_distribution"] = main.class_distribution().reset_index()

    fs = stage("vif", select_features, train, cfg.vif_threshold, cfg.vif_screen)
    tables["vif_log"] = pd.DataFrame(list(fs.vif_log),
                                     columns=["step", "column", "vif", "n_remaining"])
    features = fs.full

    grid = stage("grid_search", grid_search, cfg.model, cfg.grids[cfg.model], train, val,
                 features, cfg.model_seed, threads)
    tables["grid_search"] = grid.table
    model = stage("fit", fit_model, grid.best, train, features)
    save_model(model.model, out / "model.json")

    y_test = test["label"].to_numpy(dtype=int)
    boot = dict(n_resamples=cfg.n_resamples, seed=cfg.bootstrap_seed)

    def evaluate():
        proba = model.predict_proba(test)
        pred = predict_labels(proba, cfg.worsening_threshold)
        res = bootstrap_suite(y_test, proba, pred, **boot)
        rows = [_metric_row(res, model=cfg.model, label=cfg.label, n_test=len(y_test))]
        conf = _confusion_rows(cfg.model, y_test, pred)
        for kind in ("regression_to_person_mean", "last_value_carried_forward",
                     "person_modal", "all_stable"):
            b = fit_baseline(kind, train, cfg.baseline_margin)
            bpred, bscore, _ = b.predict(test)
            rows.append(_metric_row(bootstrap_suite(y_test, bscore, bpred, **boot),
                                    model=kind, label=cfg.label, n_test=len(y_test)))
            conf += _confusion_rows(kind, y_test, bpred)
        return proba, res, pd.DataFrame(rows, columns=TABLE2_COLUMNS), pd.DataFrame(conf)

    proba, main_res, tables["table2"], tables["s2_confusion"] = stage("evaluate", evaluate)
    for _, r in tables["table2"].iterrows():
        if not r["ppv_defined"]:
            flags.append(f"ppv_undefined:{r['model']}")

    if isinstance(model.model, GbdtModel):
        imp = gain_importance(model.model)
        tables["fig3_importance"] = pd.DataFrame(
            sorted(imp.items(), key=lambda kv: (-kv[1], kv[0])), columns=["feature", "gain_share"])
    if isinstance(model.model, ElasticNetModel):
        ors = odds_ratios(model.model)
        tables["fig4_odds_ratios"] = pd.DataFrame(
            [(f, v, float(np.log(v))) for f, v in ors.items()],
            columns=["feature", "odds_ratio", "log_odds_ratio"])
    tables["fig1_icc"] = stage("icc", icc_table, cohort, periods)
    tables["fig5_withinperson"], tables["fig5_summary"] = stage(
        "within_person", within_person_tables, main.frame)

    scenario_rows = []
    if cfg.stale or cfg.logo:
        scenario_rows.append(_metric_row(main_res, scenario="full", n_obs=len(y_test),
                                         n_dropped=0, interval="bootstrap"))
    if cfg.logo:
        plan = make_logo_plan(cohort.ids, cfg.logo_repeats, cfg.logo_folds, cfg.logo_seed)
        folds, summary = stage("logo", logo_cv, frame, plan, grid.best, cfg.vif_threshold,
                               cfg.vif_screen, threads)
        tables["s6_logo"] = pd.concat(
            [folds.assign(row="fold"), summary.assign(repeat=np.nan, fold=np.nan)],
            ignore_index=True)[["row", "repeat", "fold", "held_out_participants",
                                "held_out_observations", "train_n", "val_n", "n_worsening",
                                *METRICS, "no_worsening_predictions"]]
        if folds["no_worsening_predictions"].any():
            flags.append(f"logo_folds_without_worsening_predictions:"
                         f"{int(folds['no_worsening_predictions'].sum())}")
        s = summary.set_index("row")
        row = {"scenario": "cold_start", "n_obs": int(folds["held_out_observations"].mean()),
               "n_dropped": 0, "interval": "per_repeat_range"}
        for m in ("balanced_accuracy", "auc", "sensitivity_worsening", "ppv_worsening"):
            row[m], row[f"{m}_ci_low"], row[f"{m}_ci_high"] = (
                s.loc["mean", m], s.loc["range_min", m], s.loc["range_max", m])
        row["ppv_defined"] = bool(np.isfinite(row["ppv_worsening"]))
        scenario_rows.append(row)
    for k in sorted(set(int(k) for k in cfg.stale)):
        st = stage("staleness", staleness_scenario, test, cohort, model, k, **boot)
        scenario_rows.append(_metric_row(st["results"], scenario=st["scenario"],
                                         n_obs=st["n_obs"], n_dropped=st["n_dropped"],
                                         interval="bootstrap"))
    if scenario_rows:
        tables["table4"] = pd.DataFrame(scenario_rows)[
            ["scenario", "n_obs", "n_dropped", "interval", *TABLE2_COLUMNS[3:]]]

    if cfg.ablate:
        def ablate():
            per_label = {}
            for lab in cfg.ablation_labels:
                tab = ablation_run(labeled[lab].frame, grid.best, ablation_conditions(fs),
                                   threads=threads, **boot)
                per_label[lab] = tab.assign(model=cfg.model)
            return apply_holm(per_label)
        tables["s4_ablation"] = stage("ablation", ablate)
        tables["fig2_ablation"] = tables["s4_ablation"][
            ["label", "step", "condition", "auc", "auc_ci_low", "auc_ci_high", "significant"]]

    if cfg.two_feature:
        tables["s5_two_feature"] = stage("two_feature", two_feature_comparison, cfg, train, val,
                                         test, features, model, threads)

    if cfg.subgroups:
        tables["s9_subgroups"] = stage("subgroups", subgroup_report, test, proba, cohort,
                                       min_n=cfg.subgroup_min_n, **boot)

    files = {}
    for name, table in tables.items():
        path = out / f"{name}.csv"
        table.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        files[path.name] = {"sha256": _sha256(path), "rows": int(len(table))}
    files["model.json"] = {"sha256": _sha256(out / "model.json"), "rows": None}
    manifest = {
        "status": "ok", "version": __version__, "config": cfg.to_dict(),
        "config_hash": cfg.config_hash, "created_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "seeds": {"cohort": cfg.seed, "model": cfg.model_seed,
                  "bootstrap": cfg.bootstrap_seed, "tie": cfg.tie_seed, "logo": cfg.logo_seed},
        "threads": threads, "label_config_hash": main.config_hash,
        "inclusion": inclusion.summary(), "features": features,
        "selected_params": grid.best.to_dict(), "flags": flags,
        "row_counts": {"design": int(len(matrix)), "train": int(len(train)),
                       "val": int(len(val)), "test": int(len(test))},
        "stage_seconds": stage.timings, "files": files,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True,
                                                  default=_json_default) + "\n",
                                       encoding="utf-8")
    return RunResult(out, tables, manifest)


def two_feature_comparison(cfg, train, val, test, features, full_model, threads) -> pd.DataFrame:
    """Prior CES-D plus person mean, tuned on the same grid, against the full model."""
    two = [PRIOR, PERSON_MEAN]
    g = grid_search(cfg.model, cfg.grids[cfg.model], train, val, two, cfg.model_seed, threads)
    small = fit_model(g.best, train, two)
    y = test["label"].to_numpy(dtype=int)
    boot = dict(n_resamples=cfg.n_resamples, seed=cfg.bootstrap_seed)
    pa, pb = small.predict_proba(test), full_model.predict_proba(test)
    ra, rb = bootstrap_suite(y, pa, **boot), bootstrap_suite(y, pb, **boot)
    rows = [{"metric": m, "two_feature": ra[m].point, "two_feature_ci_low": ra[m].ci_low,
             "two_feature_ci_high": ra[m].ci_high, "full": rb[m].point,
             "full_ci_low": rb[m].ci_low, "full_ci_high": rb[m].ci_high} for m in METRICS]
    agree_pred = np.column_stack([pa.argmax(axis=1), pb.argmax(axis=1)])
    agree = bootstrap_ci(lambda _y, s: float(np.mean(s[:, 0] == s[:, 1])), y, agree_pred, **boot)
    rows.append({"metric": "prediction_agreement", "two_feature": agree.point,
                 "two_feature_ci_low": agree.ci_low, "two_feature_ci_high": agree.ci_high,
                 "full": np.nan, "full_ci_low": np.nan, "full_ci_high": np.nan})
    for c in range(3):
        mask = y == c
        rows.append({"metric": f"agreement_{CLASS_NAMES[c]}",
                     "two_feature": float(np.mean(agree_pred[mask, 0] == agree_pred[mask, 1]))
                     if mask.any() else np.nan,
                     "two_feature_ci_low": np.nan, "two_feature_ci_high": np.nan,
                     "full": np.nan, "full_ci_low": np.nan, "full_ci_high": np.nan})
    return pd.DataFrame(rows)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
