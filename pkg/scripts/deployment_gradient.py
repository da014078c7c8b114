"""Test AUC of one fitted model as its inputs degrade: stale prior scores and unseen people."""

import argparse

from traj_harness.datamodel import SynthConfig, apply_inclusion, synth_cohort
from traj_harness.evaluation import (ModelSpec, assign_splits, fit_model, logo_cv, make_logo_plan,
                                     metric_suite, select_features, stale_prior)
from traj_harness.features.design import build_design_matrix
from traj_harness.labels import label_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--ar", type=float, default=0.0)
    ap.add_argument("--repeats", type=int, default=1)
    args = ap.parse_args()
    spec = ModelSpec("gbdt")
    print("seed   full  stale_1  stale_2  cold_start")
    for s in range(args.seeds):
        cohort, _ = apply_inclusion(synth_cohort(SynthConfig(ar_coef=args.ar), s))
        frame = label_dataset(build_design_matrix(cohort, assign_splits(cohort))).frame
        train, test = frame[frame["split"] == "train"], frame[frame["split"] == "test"]
        fs = select_features(train)
        model = fit_model(spec, train, fs.full)
        row = [metric_suite(test["label"], model.predict_proba(test))["auc"]]
        for k in (1, 2):
            st, _ = stale_prior(test, cohort, k)
            row.append(metric_suite(st["label"], model.predict_proba(st))["auc"])
        plan = make_logo_plan(cohort.ids, args.repeats, 5, seed=s)
        row.append(logo_cv(frame, plan, spec)[1].set_index("row").loc["mean", "auc"])
        print(f"{s:4d}  " + "  ".join(f"{v:.3f}" for v in row), flush=True)


if __name__ == "__main__":
    main()
