"""Versioned JSON serialization for every learner."""

from __future__ import annotations

import json
from pathlib import Path

from .baselines import BaselinePredictor
from .elasticnet import ElasticNetModel
from .gbdt import GbdtModel
from .weights import LearnerError

FORMAT_VERSION = 1
_KINDS = {"elasticnet": ElasticNetModel, "gbdt": GbdtModel, "baseline": BaselinePredictor}


def model_to_json(model) -> str:
    payload = {"format_version": FORMAT_VERSION, "model": model.to_dict()}
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def model_from_json(text: str):
    payload = json.loads(text)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise LearnerError(f"unsupported model format version {version!r}")
    d = payload["model"]
    if d.get("kind") not in _KINDS:
        raise LearnerError(f"unknown model kind {d.get('kind')!r}")
    return _KINDS[d["kind"]].from_dict(d)


def save_model(model, path) -> None:
    Path(path).write_text(model_to_json(model) + "\n", encoding="utf-8")


def load_model(path):
    return model_from_json(Path(path).read_text(encoding="utf-8"))
