"""Run configuration: one serializable record per pipeline execution."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .datamodel.records import ConfigError
from .datamodel.synth import SynthConfig
from .evaluation.modeling import DEFAULT_GRIDS, FAMILIES
from .labels import OPERATIONALIZATIONS

# Not part of the result-determining hash.
_UNHASHED = {"out_dir", "threads"}


@dataclass(frozen=True)
class RunConfig:
    input_dir: str | None = None
    synth: dict = field(default_factory=dict)
    seed: int = 42
    label: str = "sev_crossing"
    model: str = "gbdt"
    grids: dict = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULT_GRIDS.items()})
    model_seed: int = 42
    bootstrap_seed: int = 42
    n_resamples: int = 1000
    tie_seed: int = 42
    sd_k: float = 1.0
    vif_threshold: float = 10.0
    vif_screen: bool = True
    worsening_threshold: float | None = None
    baseline_margin: float = 0.9
    ablate: bool = False
    ablation_labels: tuple = OPERATIONALIZATIONS
    two_feature: bool = False
    logo: bool = False
    logo_repeats: int = 5
    logo_folds: int = 5
    logo_seed: int = 42
    stale: tuple = ()
    subgroups: bool = False
    subgroup_min_n: int = 10
    threads: int | None = None
    out_dir: str = "report"

    def __post_init__(self):
        self.validate()

    def validate(self) -> "RunConfig":
        if self.label not in OPERATIONALIZATIONS:
            raise ConfigError(f"unknown label {self.label!r}; expected one of {OPERATIONALIZATIONS}")
        for lab in self.ablation_labels:
            if lab not in OPERATIONALIZATIONS:
                raise ConfigError(f"unknown ablation label {lab!r}")
        if self.model not in FAMILIES:
            raise ConfigError(f"unknown model {self.model!r}; expected one of {FAMILIES}")
        if self.model not in self.grids or not self.grids[self.model]:
            raise ConfigError(f"no hyperparameter grid for model {self.model!r}")
        if any(int(k) < 1 for k in self.stale):
            raise ConfigError(f"stale periods must be >= 1, got {list(self.stale)}")
        if self.n_resamples < 1:
            raise ConfigError("n_resamples must be positive")
        SynthConfig.from_dict(self.synth)
        return self

    def synth_config(self) -> SynthConfig:
        return SynthConfig.from_dict(self.synth)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ablation_labels"] = list(self.ablation_labels)
        d["stale"] = [int(k) for k in self.stale]
        return d

    @property
    def config_hash(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in _UNHASHED}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown run config keys: {unknown}")
        data = dict(data)
        for key in ("ablation_labels", "stale"):
            if key in data:
                data[key] = tuple(data[key])
        if "grids" in data:
            data["grids"] = {**{k: dict(v) for k, v in DEFAULT_GRIDS.items()}, **data["grids"]}
        return cls(**data)

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def load_run_config(path) -> RunConfig:
    """TOML or JSON; a top-level [synth] table feeds the generator."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        data = tomllib.loads(text)
    else:
        data = json.loads(text)
    run = data.get("run", {k: v for k, v in data.items() if k != "synth"})
    if "synth" in data:
        run = {**run, "synth": data["synth"]}
    return RunConfig.from_dict(run)
