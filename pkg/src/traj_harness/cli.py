"""Command-line entry point: ``simulate``, ``run`` and ``report``."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import pandas as pd

from . import __version__
from .config import RunConfig, load_run_config
from .datamodel import SynthConfig, load_synth_config, synth_cohort, write_cohort
from .evaluation.modeling import FAMILIES
from .labels import OPERATIONALIZATIONS
from .pipeline import PipelineError, run_pipeline

log = logging.getLogger("traj_harness")


class ReportError(RuntimeError):
    pass


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _emit(obj: dict, stream=None) -> None:
    print(json.dumps(obj, sort_keys=True), file=stream or sys.stdout)


def _error(stage: str, exc: Exception, config_hash: str = "") -> int:
    _emit({"status": "error", "stage": stage, "error": f"{type(exc).__name__}: {exc}",
           "config_hash": config_hash})
    return 1


# -- simulate ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    try:
        data = {}
        if args.config:
            data = load_synth_config(args.config).to_dict()
        if args.participants is not None:
            data["n_participants"] = args.participants
        if args.assessments is not None:
            data["n_assessments"] = args.assessments
        cfg = SynthConfig.from_dict(data)
    except Exception as exc:
        return _error("config", exc)
    seed = 0 if args.seed is None else args.seed
    try:
        out = Path(args.out)
        paths = write_cohort(synth_cohort(cfg, seed), out)
    except Exception as exc:
        return _error("simulate", exc)
    manifest = {
        "status": "ok", "version": __version__, "seed": seed, "synth": cfg.to_dict(),
        "files": {p.name: {"sha256": _sha256(p)} for p in sorted(paths.values())},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")
    _emit({"status": "ok", "out_dir": str(out), "seed": seed})
    return 0


# -- run --------------------------------------------------------------------

def build_run_config(args) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    stale = tuple(cfg.stale) + tuple(args.stale or ())
    over = dict(seed=args.seed, label=args.label, model=args.model, input_dir=args.input,
                out_dir=args.out, threads=args.threads)
    if args.ablate:
        over["ablate"] = True
    if args.logo:
        over["logo"] = True
    if args.subgroups:
        over["subgroups"] = True
    if args.stale:
        over["stale"] = tuple(sorted(set(int(k) for k in stale)))
    return cfg.with_overrides(**over)


def cmd_run(args) -> int:
    try:
        cfg = build_run_config(args)
    except Exception as exc:
        return _error("config", exc)
    try:
        result = run_pipeline(cfg, cfg.out_dir, cfg.threads)
    except PipelineError as exc:
        print(exc.to_json())
        return 1
    except Exception as exc:
        return _error("run", exc, cfg.config_hash)
    _emit({"status": "ok", "out_dir": str(result.out_dir), "config_hash": cfg.config_hash,
           "tables": sorted(result.tables)})
    return 0


# -- report -----------------------------------------------------------------

class _Style:
    def __init__(self, enabled: bool):
        self.enabled = enabled

    def head(self, text: str) -> str:
        return f"\033[1m{text}\033[0m" if self.enabled else text


def _fmt(x, digits=3) -> str:
    if x is None or (isinstance(x, float) and x != x):
        return "-"
    if isinstance(x, float):
        return f"{x:.{digits}f}"
    return str(x)


def _with_ci(row, metric) -> str:
    p, lo, hi = row.get(metric), row.get(f"{metric}_ci_low"), row.get(f"{metric}_ci_high")
    if p is None or p != p:
        return "-"
    p = float(p)
    if lo is None or lo != lo:
        return _fmt(p)
    return f"{_fmt(p)} [{_fmt(float(lo))}, {_fmt(float(hi))}]"


REPORT_METRICS = ("balanced_accuracy", "auc", "sensitivity_worsening", "ppv_worsening")


def _table(frame: pd.DataFrame, lead: list[str], metrics=REPORT_METRICS) -> list[str]:
    rows = [lead + list(metrics)]
    for _, r in frame.iterrows():
        rows.append([_fmt(r[c]) for c in lead] + [_with_ci(r, m) for m in metrics])
    widths = [max(len(str(row[j])) for row in rows) for j in range(len(rows[0]))]
    return ["  ".join(str(v).ljust(w) for v, w in zip(row, widths)).rstrip() for row in rows]


def verify_report(report_dir) -> tuple[dict, dict]:
    """Load the manifest and check every listed file's hash.

    Returns ``(manifest, missing)``; a listed file that is absent is reported
    as missing, while one whose content changed raises :class:`ReportError`.
    """
    d = Path(report_dir)
    mpath = d / "manifest.json"
    if not mpath.exists():
        raise ReportError(f"no manifest.json in {d}")
    manifest = json.loads(mpath.read_text(encoding="utf-8"))
    missing = {}
    for name, entry in sorted(manifest.get("files", {}).items()):
        path = d / name
        if not path.exists():
            missing[name] = "missing"
            continue
        if _sha256(path) != entry["sha256"]:
            raise ReportError(f"hash mismatch for {name}; report was modified after the run")
    return manifest, missing


def render_report(report_dir, color: bool = False) -> str:
    d = Path(report_dir)
    manifest, missing = verify_report(d)
    st = _Style(color)
    cfg = manifest.get("config", {})
    out = [st.head("Run"),
           f"config_hash  {manifest.get('config_hash', '-')}",
           f"label        {cfg.get('label', '-')}",
           f"model        {cfg.get('model', '-')}",
           f"seeds        " + ", ".join(f"{k}={v}" for k, v in
                                        sorted(manifest.get("seeds", {}).items())),
           f"rows         " + ", ".join(f"{k}={v}" for k, v in
                                        manifest.get("row_counts", {}).items()),
           ""]

    def load(name):
        path = d / f"{name}.csv"
        return pd.read_csv(path) if path.exists() else None

    def section(title, name, body):
        out.append(st.head(title))
        frame = load(name)
        if frame is None:
            out.append("not run")
        else:
            out.extend(body(frame))
        out.append("")

    section("Test-set metrics (95% bootstrap CI)", "table2",
            lambda f: _table(f, ["model", "n_test"]))

    def confusion(f):
        f = f[f["model"] == cfg.get("model", f["model"].iloc[0])]
        cols = ["true_class"] + [c for c in f.columns if c.startswith("pred_")] + ["total"]
        lines = ["  ".join(c.ljust(16) for c in cols).rstrip()]
        lines += ["  ".join(str(r[c]).ljust(16) for c in cols).rstrip() for _, r in f.iterrows()]
        return lines

    section("Confusion matrix (rows true, columns predicted)", "s2_confusion", confusion)
    section("Deployment scenarios", "table4", lambda f: _table(f, ["scenario", "n_obs"]))
    section("Leave-participants-out CV", "s6_logo",
            lambda f: _table(f[f["row"] != "fold"], ["row"],
                             ("balanced_accuracy", "auc", "sensitivity_worsening",
                              "ppv_worsening")))

    def ablation(f):
        lines = [f"{'label':18}{'step':>5}  {'condition':18}{'auc':>7}{'delta':>9}"
                 f"{'p_raw':>8}{'p_holm':>8}"]
        for _, r in f.iterrows():
            lines.append(f"{r['label']:18}{int(r['step']):>5}  {r['condition']:18}"
                         f"{_fmt(r['auc']):>7}{_fmt(r['delta_auc']):>9}"
                         f"{_fmt(r['p_raw']):>8}{_fmt(r['p_holm']):>8}")
        return lines

    section("Ablation", "s4_ablation", ablation)
    section("Subgroups", "s9_subgroups",
            lambda f: _table(f, ["axis", "group", "n_obs"], ("auc", "balanced_accuracy")))

    out.append(st.head("Flags"))
    flags = list(manifest.get("flags", [])) + [f"file_missing:{k}" for k in missing]
    out.extend(flags or ["none"])
    return "\n".join(out) + "\n"


def cmd_report(args) -> int:
    try:
        text = render_report(args.report_dir, color=sys.stdout.isatty())
    except Exception as exc:
        return _error("report", exc)
    sys.stdout.write(text)
    return 0


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="traj-harness",
                                description="Trajectory-prediction harness on screen-use data.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write a synthetic cohort")
    s.add_argument("--config", help="TOML or JSON generator config")
    s.add_argument("--seed", type=int)
    s.add_argument("--participants", type=int)
    s.add_argument("--assessments", type=int)
    s.add_argument("--out", default="cohort")
    s.set_defaults(fn=cmd_simulate)

    r = sub.add_parser("run", help="execute the pipeline and write a report directory")
    r.add_argument("--config", help="TOML or JSON run config")
    r.add_argument("--input", help="cohort directory; synthesize when omitted")
    r.add_argument("--seed", type=int)
    r.add_argument("--label", choices=OPERATIONALIZATIONS)
    r.add_argument("--model", choices=FAMILIES)
    r.add_argument("--ablate", action="store_true")
    r.add_argument("--logo", action="store_true")
    r.add_argument("--stale", type=int, action="append", metavar="K",
                   help="evaluate with a prior score K periods old (repeatable)")
    r.add_argument("--subgroups", action="store_true")
    r.add_argument("--threads", type=int, help="worker cap (env TRAJ_HARNESS_THREADS)")
    r.add_argument("--out")
    r.set_defaults(fn=cmd_run)

    rep = sub.add_parser("report", help="summarize a finished run")
    rep.add_argument("report_dir")
    rep.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
