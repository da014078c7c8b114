"""Reading and writing the four cohort input files.

events.jsonl      {"participant_id", "ts", "app_id", "is_social"} per line
embeddings.jsonl  {"participant_id", "ts", "vector"} per line
assessments.csv   participant_id, assessment_index, ts, cesd, missingness
demographics.csv  participant_id, age, gender, race (";"-joined), ethnicity, income_band
                  [, utc_offset]
"""

from __future__ import annotations

import csv
import json
import logging
from collections import defaultdict
from pathlib import Path

import numpy as np

from .records import (CESD_MAX, CESD_MIN, AssessmentSeries, Cohort, Demographics,
                      EmbeddingStream, EventStream, Participant, ValidationError)

log = logging.getLogger(__name__)

ASSESSMENT_COLUMNS = ["participant_id", "assessment_index", "ts", "cesd", "missingness"]
DEMOGRAPHIC_COLUMNS = ["participant_id", "age", "gender", "race", "ethnicity", "income_band",
                       "utc_offset"]
FILENAMES = {"events": "events.jsonl", "assessments": "assessments.csv",
             "demographics": "demographics.csv", "embeddings": "embeddings.jsonl"}


def fmt_num(x: float) -> str:
    """Shortest exact text for a float; integral values lose the trailing '.0'."""
    x = float(x)
    if x.is_integer() and abs(x) < 2**53:
        return str(int(x))
    return repr(x)


def _jsonl_rows(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"invalid JSON ({exc.msg})", path, lineno) from None
            if not isinstance(obj, dict):
                raise ValidationError("expected a JSON object", path, lineno)
            yield lineno, obj


def _require(obj, key, path, lineno):
    if key not in obj:
        raise ValidationError("missing key", path, lineno, key)
    return obj[key]


def _number(value, path, lineno, name, positive=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise ValidationError(f"not a number: {value!r}", path, lineno, name) from None
    value = float(value)
    if not np.isfinite(value):
        raise ValidationError("non-finite number", path, lineno, name)
    if positive and value <= 0:
        raise ValidationError(f"must be > 0, got {value}", path, lineno, name)
    return value


def _read_events(path: Path):
    out = defaultdict(lambda: ([], [], []))
    n = 0
    for lineno, obj in _jsonl_rows(path):
        pid = _require(obj, "participant_id", path, lineno)
        ts = _number(_require(obj, "ts", path, lineno), path, lineno, "ts", positive=True)
        app = _require(obj, "app_id", path, lineno)
        social = _require(obj, "is_social", path, lineno)
        if not isinstance(pid, str) or not pid:
            raise ValidationError("participant_id must be a non-empty string", path, lineno,
                                  "participant_id")
        if not isinstance(app, str):
            raise ValidationError("app_id must be a string", path, lineno, "app_id")
        if not isinstance(social, bool):
            raise ValidationError("is_social must be true/false", path, lineno, "is_social")
        t, a, s = out[pid]
        t.append(ts)
        a.append(app)
        s.append(social)
        n += 1
    return out, n


def _read_embeddings(path: Path):
    out = defaultdict(lambda: ([], []))
    dim = None
    n = 0
    for lineno, obj in _jsonl_rows(path):
        pid = _require(obj, "participant_id", path, lineno)
        ts = _number(_require(obj, "ts", path, lineno), path, lineno, "ts", positive=True)
        vec = _require(obj, "vector", path, lineno)
        if not isinstance(vec, list) or not vec:
            raise ValidationError("vector must be a non-empty array", path, lineno, "vector")
        vec = [_number(v, path, lineno, "vector") for v in vec]
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise ValidationError(f"vector dimension {len(vec)} != {dim}", path, lineno,
                                  "vector")
        if not any(vec):
            raise ValidationError("zero vector rejected (not normalizable)", path, lineno,
                                  "vector")
        out[pid][0].append(ts)
        out[pid][1].append(vec)
        n += 1
    return out, dim or 0, n


def _csv_rows(path: Path, required: list[str]):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise ValidationError(f"missing columns {missing}", path, 1)
        for row in reader:
            yield reader.line_num, row


def _int(value, path, lineno, name) -> int:
    try:
        f = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"not an integer: {value!r}", path, lineno, name) from None
    if not f.is_integer():
        raise ValidationError(f"not an integer: {value!r}", path, lineno, name)
    return int(f)


def _read_assessments(path: Path):
    out = defaultdict(list)
    seen = set()
    n = 0
    for lineno, row in _csv_rows(path, ASSESSMENT_COLUMNS):
        pid = row["participant_id"]
        if not pid:
            raise ValidationError("empty participant_id", path, lineno, "participant_id")
        idx = _int(row["assessment_index"], path, lineno, "assessment_index")
        if idx < 0:
            raise ValidationError("assessment_index must be >= 0", path, lineno,
                                  "assessment_index")
        ts = _number(row["ts"], path, lineno, "ts", positive=True)
        cesd = _int(row["cesd"], path, lineno, "cesd")
        if not CESD_MIN <= cesd <= CESD_MAX:
            raise ValidationError(f"cesd {cesd} outside range {CESD_MIN}-{CESD_MAX}", path,
                                  lineno, "cesd")
        miss = _number(row["missingness"] or 0.0, path, lineno, "missingness")
        if not 0.0 <= miss <= 1.0:
            raise ValidationError(f"missingness {miss} outside [0, 1]", path, lineno,
                                  "missingness")
        if (pid, idx) in seen:
            raise ValidationError(f"duplicate (participant, assessment_index) ({pid}, {idx})",
                                  path, lineno, "assessment_index")
        seen.add((pid, idx))
        out[pid].append((idx, ts, cesd, miss, lineno))
        n += 1
    return out, n


def _read_demographics(path: Path):
    out = {}
    for lineno, row in _csv_rows(path, DEMOGRAPHIC_COLUMNS[:-1]):
        pid = row["participant_id"]
        if pid in out:
            raise ValidationError(f"duplicate participant {pid!r}", path, lineno,
                                  "participant_id")
        race = frozenset(r.strip() for r in (row["race"] or "").split(";") if r.strip())
        try:
            out[pid] = Demographics(
                participant_id=pid,
                age_years=_int(row["age"], path, lineno, "age"),
                gender=row["gender"], race=race,
                ethnicity=row["ethnicity"] or "unknown",
                income_band=row["income_band"] or "undisclosed",
                utc_offset=_number(row.get("utc_offset") or 0.0, path, lineno, "utc_offset"),
            )
        except ValidationError as exc:
            raise ValidationError(exc.detail, path, lineno,
                                  exc.field) from None
    return out


def load_cohort(events_path, assessments_path, demographics_path,
                embeddings_path=None) -> Cohort:
    """Parse and validate the input files into a :class:`Cohort`."""
    events_path, assessments_path = Path(events_path), Path(assessments_path)
    demographics_path = Path(demographics_path)
    demo = _read_demographics(demographics_path)
    assess, n_assess = _read_assessments(assessments_path)
    events, n_events = _read_events(events_path)
    if embeddings_path is not None:
        embeds, dim, n_embeds = _read_embeddings(Path(embeddings_path))
    else:
        embeds, dim, n_embeds = {}, 0, 0

    for source, ids, path in ((assess, assess.keys(), assessments_path),
                              (events, events.keys(), events_path),
                              (embeds, embeds.keys(), embeddings_path)):
        unknown = sorted(set(ids) - set(demo))
        if unknown:
            raise ValidationError(f"participants not in demographics: {unknown[:5]}", path,
                                  field="participant_id")

    participants = {}
    for pid, d in demo.items():
        rows = sorted(assess.get(pid, []))
        try:
            series = AssessmentSeries(index=[r[0] for r in rows], ts=[r[1] for r in rows],
                                      cesd=[r[2] for r in rows],
                                      missingness=[r[3] for r in rows])
        except ValidationError as exc:
            raise ValidationError(f"participant {pid}: {exc.detail}", assessments_path,
                                  field=exc.field) from None
        t, a, s = events.get(pid, ([], [], []))
        ev = EventStream(np.array(t, dtype=np.float64), np.array(a, dtype=str),
                         np.array(s, dtype=bool)) if t else EventStream.empty()
        if pid in embeds:
            et, ev_vec = embeds[pid]
            em = EmbeddingStream(np.array(et), np.array(ev_vec, dtype=np.float64))
        else:
            em = EmbeddingStream.empty(dim)
        participants[pid] = Participant(d, series, ev, em)

    counts = {"participants": len(participants), "assessments": n_assess,
              "events": n_events, "embeddings": n_embeds}
    log.info("loaded cohort: %s", counts)
    return Cohort(participants, counts=counts)


def load_cohort_dir(directory) -> Cohort:
    d = Path(directory)
    emb = d / FILENAMES["embeddings"]
    return load_cohort(d / FILENAMES["events"], d / FILENAMES["assessments"],
                       d / FILENAMES["demographics"], emb if emb.exists() else None)


def write_cohort(cohort: Cohort, directory) -> dict[str, Path]:
    """Write the cohort in canonical order; returns the written paths."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {k: d / v for k, v in FILENAMES.items()}

    with open(paths["demographics"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DEMOGRAPHIC_COLUMNS)
        for p in cohort:
            dm = p.demographics
            w.writerow([dm.participant_id, dm.age_years, dm.gender, ";".join(sorted(dm.race)),
                        dm.ethnicity, dm.income_band, fmt_num(dm.utc_offset)])

    with open(paths["assessments"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ASSESSMENT_COLUMNS)
        for p in cohort:
            a = p.assessments
            for i in range(len(a)):
                w.writerow([p.participant_id, int(a.index[i]), fmt_num(a.ts[i]),
                            int(a.cesd[i]), fmt_num(a.missingness[i])])

    with open(paths["events"], "w", encoding="utf-8") as fh:
        for p in cohort:
            pid = json.dumps(p.participant_id)
            ev = p.events
            lines = [f'{{"participant_id": {pid}, "ts": {fmt_num(t)}, '
                     f'"app_id": {json.dumps(str(app))}, "is_social": {"true" if s else "false"}}}\n'
                     for t, app, s in zip(ev.ts.tolist(), ev.app_id.tolist(),
                                          ev.is_social.tolist())]
            fh.writelines(lines)

    with open(paths["embeddings"], "w", encoding="utf-8") as fh:
        for p in cohort:
            pid = json.dumps(p.participant_id)
            em = p.embeddings
            for t, vec in zip(em.ts.tolist(), em.vectors.tolist()):
                fh.write(f'{{"participant_id": {pid}, "ts": {fmt_num(t)}, '
                         f'"vector": {json.dumps(vec)}}}\n')
    return paths
