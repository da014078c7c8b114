import json
import shutil

import pandas as pd
import pytest

from traj_harness.cli import main, render_report, verify_report, ReportError
from traj_harness.datamodel import load_cohort_dir

SMALL_RUN = """
[run]
n_resamples = 200
logo_repeats = 1
logo_folds = 4

[run.grids.gbdt]
learning_rate = [0.1]
max_depth = [3]
n_estimators = [20, 40]

[synth]
n_participants = 24
n_assessments = 14
sessions_per_day = 3.0
screens_per_session = 3.0
"""


def run_cli(capsys, *argv):
    code = main(list(map(str, argv)))
    out = capsys.readouterr().out
    return code, out


@pytest.fixture(scope="module")
def default_cohort(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim") / "cohort"
    assert main(["simulate", "--seed", "7", "--out", str(d)]) == 0
    return d


@pytest.fixture(scope="module")
def small_config(tmp_path_factory):
    p = tmp_path_factory.mktemp("cfg") / "small.toml"
    p.write_text(SMALL_RUN)
    return p


@pytest.fixture(scope="module")
def full_report(tmp_path_factory, small_config):
    out = tmp_path_factory.mktemp("run") / "report"
    assert main(["run", "--config", str(small_config), "--ablate", "--stale", "1",
                 "--subgroups", "--out", str(out)]) == 0
    return out


def test_simulate_default_shape(default_cohort):
    a = pd.read_csv(default_cohort / "assessments.csv")
    assert len(a) == 96 * 21 and a["participant_id"].nunique() == 96
    cohort = load_cohort_dir(default_cohort)
    assert len(cohort) == 96
    manifest = json.loads((default_cohort / "manifest.json").read_text())
    assert manifest["seed"] == 7 and "assessments.csv" in manifest["files"]


def test_simulate_seed_byte_identical(tmp_path, capsys):
    for name in ("a", "b"):
        code, _ = run_cli(capsys, "simulate", "--seed", 3, "--participants", 5,
                          "--assessments", 10, "--out", tmp_path / name)
        assert code == 0
    for f in ("assessments.csv", "events.jsonl", "demographics.csv", "embeddings.jsonl",
              "manifest.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_simulate_bad_config_is_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"no_such_knob": 1}')
    code, out = run_cli(capsys, "simulate", "--config", bad, "--out", tmp_path / "x")
    msg = json.loads(out)
    assert code == 1 and msg["status"] == "error" and msg["stage"] == "config"


def test_run_tables_and_ablation(full_report):
    t2 = pd.read_csv(full_report / "table2.csv")
    assert set(t2["model"]) == {"gbdt", "regression_to_person_mean",
                                "last_value_carried_forward", "person_modal", "all_stable"}
    ab = pd.read_csv(full_report / "s4_ablation.csv")
    assert ab.groupby("label").size().eq(4).all() and ab["label"].nunique() == 3
    assert ab.loc[ab["step"] == 4, "p_holm"].notna().all()
    assert ab.loc[ab["step"] != 4, "p_holm"].isna().all()
    t4 = pd.read_csv(full_report / "table4.csv")
    assert t4["scenario"].tolist() == ["full", "stale_1"]
    assert not (full_report / "s6_logo.csv").exists()


def test_run_from_input_dir(tmp_path, capsys, small_config):
    code, _ = run_cli(capsys, "simulate", "--seed", 1, "--participants", 20,
                      "--assessments", 14, "--out", tmp_path / "c")
    assert code == 0
    code, out = run_cli(capsys, "run", "--config", small_config, "--input", tmp_path / "c",
                        "--out", tmp_path / "r")
    assert code == 0 and json.loads(out)["status"] == "ok"
    m = json.loads((tmp_path / "r" / "manifest.json").read_text())
    assert m["config"]["input_dir"] == str(tmp_path / "c")


def test_run_deterministic_across_threads(tmp_path, small_config):
    dirs = []
    for t in (1, 3):
        d = tmp_path / f"t{t}"
        assert main(["run", "--config", str(small_config), "--logo", "--threads", str(t),
                     "--out", str(d)]) == 0
        dirs.append(d)
    files = sorted(p.name for p in dirs[0].iterdir() if p.name != "manifest.json")
    assert files == sorted(p.name for p in dirs[1].iterdir() if p.name != "manifest.json")
    for f in files:
        assert (dirs[0] / f).read_bytes() == (dirs[1] / f).read_bytes(), f


def test_run_failure_reports_stage(tmp_path, capsys):
    code, out = run_cli(capsys, "run", "--input", tmp_path / "missing", "--out", tmp_path / "r")
    msg = json.loads(out)
    assert code == 1 and msg["stage"] == "ingest" and msg["config_hash"]


def test_run_rejects_bad_stale(tmp_path, capsys):
    code, out = run_cli(capsys, "run", "--stale", 0, "--out", tmp_path / "r")
    assert code == 1 and json.loads(out)["stage"] == "config"


def test_report_sections(full_report, capsys):
    code, out = run_cli(capsys, "report", full_report)
    assert code == 0
    for m in ("balanced_accuracy", "auc", "sensitivity_worsening", "ppv_worsening"):
        assert m in out
    logo = out.split("Leave-participants-out CV")[1].splitlines()[1]
    assert logo == "not run"
    assert "\033[" not in out  # stdout is captured, not a terminal
    assert "\033[1m" in render_report(full_report, color=True)


def test_report_missing_manifest(tmp_path, capsys):
    code, out = run_cli(capsys, "report", tmp_path)
    assert code == 1 and "manifest" in json.loads(out)["error"]


def test_report_detects_tampering(full_report, tmp_path):
    copy = tmp_path / "rep"
    shutil.copytree(full_report, copy)
    (copy / "table4.csv").unlink()
    assert "table4.csv" in verify_report(copy)[1]
    assert "file_missing:table4.csv" in render_report(copy)
    with open(copy / "table2.csv", "a") as fh:
        fh.write("extra\n")
    with pytest.raises(ReportError, match="hash mismatch"):
        verify_report(copy)
