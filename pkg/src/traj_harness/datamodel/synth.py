"""Seeded synthetic cohort generator.

CES-D series are a random-intercept model with AR(1) within-person deviations,
rounded and clipped to 0-60. Screen behavior in each period is modulated by the
standardized deviation of the score that closes the period, through
person-specific coupling coefficients whose signs follow a two-point mixture.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .records import (AssessmentSeries, Cohort, ConfigError, Demographics, EmbeddingStream,
                      EventStream, Participant)

DAY = 86400.0
CHANNELS = ("activity", "length", "social", "overnight", "active_days", "diversity")

# Demographic marginals for sampled participants.
GENDER_P = {"male": 0.396, "female": 0.583, "other": 0.021}
RACE_P = {"white": 0.75, "black": 0.10, "asian": 0.05, "native_american": 0.03,
          "pacific_islander": 0.01, "other": 0.06}
INCOME_P = {"lt_25k": 0.396, "25k_100k": 0.229, "ge_100k": 0.312, "undisclosed": 0.063}


@dataclass(frozen=True)
class SynthConfig:
    """Generator parameters. Defaults give a cohort shaped like the study sample."""

    n_participants: int = 96
    n_assessments: int = 21
    interval_days: float = 14.0
    jitter_days: float = 1.0          # uniform +/- jitter on each inter-assessment gap
    enroll_spread_days: float = 120.0  # staggered enrolment window
    start_epoch: float = 1_593_561_600.0  # 2020-07-01 UTC

    cesd_mean: float = 14.0
    between_var: float = 25.0 * 0.763 / 0.237  # person-mean variance; ICC 0.763 at AR 0
    within_var: float = 25.0
    ar_coef: float = 0.5

    coupling_scale: float = 1.0        # 0 switches all behavioral coupling off
    coupling_mean: float = 0.5         # magnitude of per-person coefficients
    coupling_sd: float = 0.15
    coupling_positive_frac: float = 0.57
    period_noise: float = 0.15         # log-scale period-to-period behavioral noise

    sessions_per_day: float = 6.0
    screens_per_session: float = 5.0
    p_active_day: float = 0.85
    overnight_frac: float = 0.08
    social_frac: float = 0.30
    n_apps: int = 24
    n_social_apps: int = 6
    capture_seconds: float = 5.0
    min_session_gap: float = 60.0

    embedding_dim: int = 8
    embedding_fraction: float = 0.1
    embedding_noise: float = 0.6

    missing_high_prob: float = 0.02    # chance a period exceeds the 10% missingness cut
    utc_offsets_hours: tuple = (-8.0, -7.0, -6.0, -5.0)
    emit_events: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.between_var < 0 or self.within_var < 0:
            raise ConfigError("variances must be non-negative")
        if self.between_var + self.within_var <= 0:
            raise ConfigError("total CES-D variance must be positive")
        if not -1 < self.ar_coef < 1:
            raise ConfigError("ar_coef must lie in (-1, 1)")
        if self.n_participants < 1 or self.n_assessments < 1:
            raise ConfigError("need at least one participant and one assessment")
        if self.interval_days - self.jitter_days <= 0 or self.jitter_days < 0:
            raise ConfigError("jitter_days must be non-negative and below interval_days")
        if not 0 <= self.coupling_positive_frac <= 1:
            raise ConfigError("coupling_positive_frac must be in [0, 1]")
        if not 0 < self.n_social_apps < self.n_apps:
            raise ConfigError("need 0 < n_social_apps < n_apps")
        if self.embedding_dim < 1 or not 0 <= self.embedding_fraction <= 1:
            raise ConfigError("bad embedding settings")
        for name in ("sessions_per_day", "screens_per_session", "capture_seconds"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("p_active_day", "overnight_frac", "social_frac", "missing_high_prob"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must be in [0, 1]")

    @property
    def icc(self) -> float:
        return self.between_var / (self.between_var + self.within_var)

    @classmethod
    def from_icc(cls, icc: float, total_var: float = 25.0 / 0.237, **kw) -> "SynthConfig":
        return cls(between_var=icc * total_var, within_var=(1 - icc) * total_var, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["utc_offsets_hours"] = list(self.utc_offsets_hours)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown synth config keys: {unknown}")
        data = dict(data)
        if "utc_offsets_hours" in data:
            data["utc_offsets_hours"] = tuple(data["utc_offsets_hours"])
        return cls(**data)


def load_synth_config(path) -> SynthConfig:
    """Read a TOML or JSON synth config; a [synth] table is used when present."""
    path = Path(path)
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    else:
        data = json.loads(path.read_text(encoding="utf-8"))
    return SynthConfig.from_dict(data.get("synth", data))


def _rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), *stream])


def _logit(p):
    p = np.clip(p, 1e-6, 1 - 1e-6)
    return np.log(p / (1 - p))


def _expit(x):
    return 1.0 / (1.0 + np.exp(-x))


def _demographics(cfg: SynthConfig, pid: str, rng) -> Demographics:
    age = int(np.clip(np.rint(rng.normal(47.4, 15.7)), 20, 78))
    gender = rng.choice(list(GENDER_P), p=list(GENDER_P.values()))
    races = list(RACE_P)
    race = {races[rng.choice(len(races), p=list(RACE_P.values()))]}
    if rng.random() < 0.115:
        race.add(races[rng.integers(len(races))])
    ethnicity = "hispanic" if rng.random() < 0.167 else "non_hispanic"
    income = rng.choice(list(INCOME_P), p=list(INCOME_P.values()))
    offset = float(rng.choice(cfg.utc_offsets_hours)) * 3600.0 if cfg.utc_offsets_hours else 0.0
    return Demographics(pid, age, str(gender), frozenset(race), ethnicity, str(income), offset)


def _cesd_series(cfg: SynthConfig, rng):
    n = cfg.n_assessments
    mu = cfg.cesd_mean + np.sqrt(cfg.between_var) * rng.standard_normal()
    sd = np.sqrt(cfg.within_var)
    innov = rng.standard_normal(n)
    e = np.empty(n)
    e[0] = sd * innov[0]
    scale = sd * np.sqrt(1 - cfg.ar_coef ** 2)
    for t in range(1, n):
        e[t] = cfg.ar_coef * e[t - 1] + scale * innov[t]
    cesd = np.clip(np.rint(mu + e), 0, 60).astype(np.int64)
    z = e / sd if sd > 0 else np.zeros(n)
    return mu, cesd, z


def _timestamps(cfg: SynthConfig, rng):
    start = cfg.start_epoch + np.floor(rng.uniform(0, cfg.enroll_spread_days)) * DAY + 12 * 3600
    gaps = cfg.interval_days + rng.uniform(-cfg.jitter_days, cfg.jitter_days,
                                           cfg.n_assessments - 1)
    ts = start + np.concatenate([[0.0], np.cumsum(gaps)]) * DAY
    return np.round(ts)


def _missingness(cfg: SynthConfig, rng, min_usable=(6, 2, 2)):
    from ..evaluation.splits import split_tags

    n = cfg.n_assessments
    miss = np.round(rng.beta(1.0, 80.0, n), 4)
    high = rng.random(n) < cfg.missing_high_prob
    miss[high] = np.round(rng.uniform(0.11, 0.6, high.sum()), 4)
    miss[0] = 0.0
    # high-missingness periods never push a participant below the split minima
    tags = split_tags(n)
    for tag, minimum in zip(("train", "val", "test"), min_usable):
        in_split = np.flatnonzero(tags == tag)
        bad = [i for i in in_split if miss[i] > 0.10]
        while len(in_split) - len(bad) < minimum and bad:
            miss[bad.pop()] = 0.01
    return miss


def _coupling(cfg: SynthConfig, rng) -> dict[str, float]:
    out = {}
    for ch in CHANNELS:
        sign = 1.0 if rng.random() < cfg.coupling_positive_frac else -1.0
        mag = abs(cfg.coupling_mean + cfg.coupling_sd * rng.standard_normal())
        out[ch] = cfg.coupling_scale * sign * mag
    return out


def _events(cfg: SynthConfig, rng, ts, z, offset, beta):
    """Screen records and embeddings for all periods of one participant."""
    n_social, n_apps = cfg.n_social_apps, cfg.n_apps
    social_apps = np.arange(n_social)
    other_apps = np.arange(n_social, n_apps)
    pref_social = rng.dirichlet(np.full(n_social, 0.7))
    pref_other = rng.dirichlet(np.full(n_apps - n_social, 0.7))
    lam0 = cfg.sessions_per_day * np.exp(0.3 * rng.standard_normal())
    len0 = cfg.screens_per_session * np.exp(0.2 * rng.standard_normal())
    soc0 = _logit(cfg.social_frac) + 0.5 * rng.standard_normal()
    night0 = _logit(cfg.overnight_frac) + 0.5 * rng.standard_normal()
    act0 = _logit(cfg.p_active_day) + 0.3 * rng.standard_normal()
    centers = rng.standard_normal((n_apps, cfg.embedding_dim))
    noise = cfg.period_noise

    ev_t, ev_app, emb_t, emb_v = [], [], [], []
    for k in range(1, len(ts)):
        zk = z[k]
        lam = lam0 * np.exp(beta["activity"] * zk + noise * rng.standard_normal())
        length = len0 * np.exp(beta["length"] * zk + noise * rng.standard_normal())
        p_soc = _expit(soc0 + beta["social"] * zk + noise * rng.standard_normal())
        p_night = _expit(night0 + beta["overnight"] * zk + noise * rng.standard_normal())
        p_act = _expit(act0 + beta["active_days"] * zk + noise * rng.standard_normal())
        spread = cfg.embedding_noise * np.exp(beta["diversity"] * zk
                                              + noise * rng.standard_normal())

        lo, hi = ts[k - 1], ts[k]
        first_day = np.floor((lo + offset) / DAY)
        last_day = np.floor((hi + offset) / DAY)
        days = np.arange(first_day, last_day + 1)
        active = rng.random(len(days)) < p_act
        n_sess = np.where(active, np.maximum(rng.poisson(lam, len(days)), 1), 0)
        day_of = np.repeat(days, n_sess)
        m = len(day_of)
        if m == 0:
            continue
        night = rng.random(m) < p_night
        tod = np.where(night, rng.uniform(0, 6 * 3600, m), rng.uniform(6 * 3600, DAY, m))
        start = np.floor(day_of * DAY + tod - offset)
        order = np.argsort(start, kind="stable")
        start = start[order]
        n_scr = rng.geometric(1.0 / max(length, 1.0), m)
        dur = (n_scr - 1) * cfg.capture_seconds + cfg.min_session_gap
        # push sessions later so they never overlap: a_j = max(s_j, a_{j-1} + d_{j-1})
        offs = np.concatenate([[0.0], np.cumsum(dur)[:-1]])
        start = np.maximum.accumulate(start - offs) + offs
        is_soc = rng.random(m) < p_soc
        app = np.where(is_soc, rng.choice(social_apps, m, p=pref_social),
                       rng.choice(other_apps, m, p=pref_other))
        t = np.repeat(start, n_scr) + cfg.capture_seconds * (
            np.arange(n_scr.sum()) - np.repeat(np.cumsum(n_scr) - n_scr, n_scr))
        a = np.repeat(app, n_scr)
        keep = (t >= lo) & (t < hi)
        t, a = t[keep], a[keep]
        ev_t.append(t)
        ev_app.append(a)
        pick = rng.random(len(t)) < cfg.embedding_fraction
        if pick.any():
            v = centers[a[pick]] + spread * rng.standard_normal((pick.sum(), cfg.embedding_dim))
            v /= np.linalg.norm(v, axis=1, keepdims=True)
            v = np.round(v, 6)
            v[~np.any(v != 0, axis=1), 0] = 1.0
            emb_t.append(t[pick])
            emb_v.append(v)

    if ev_t:
        t = np.concatenate(ev_t)
        a = np.concatenate(ev_app)
    else:
        t, a = np.zeros(0), np.zeros(0, dtype=int)
    names = np.array([f"app{j:02d}" for j in range(n_apps)])
    events = EventStream(t, names[a] if len(a) else np.zeros(0, dtype=str), a < n_social)
    if emb_t:
        embeds = EmbeddingStream(np.concatenate(emb_t), np.concatenate(emb_v))
    else:
        embeds = EmbeddingStream.empty(cfg.embedding_dim)
    return events, embeds


def synth_cohort(config: SynthConfig | None = None, seed: int = 0) -> Cohort:
    """Generate a cohort; a pure function of ``(config, seed)``."""
    cfg = config or SynthConfig()
    cfg.validate()
    participants = {}
    width = max(3, len(str(cfg.n_participants)))
    for i in range(cfg.n_participants):
        pid = f"P{i + 1:0{width}d}"
        demo = _demographics(cfg, pid, _rng(seed, 0, i))
        _, cesd, z = _cesd_series(cfg, _rng(seed, 1, i))
        ts = _timestamps(cfg, _rng(seed, 2, i))
        miss = _missingness(cfg, _rng(seed, 3, i))
        series = AssessmentSeries(np.arange(cfg.n_assessments), ts, cesd, miss)
        beta = _coupling(cfg, _rng(seed, 4, i))
        if cfg.emit_events:
            events, embeds = _events(cfg, _rng(seed, 5, i), ts, z, demo.utc_offset, beta)
        else:
            events, embeds = EventStream.empty(), EmbeddingStream.empty(cfg.embedding_dim)
        participants[pid] = Participant(demo, series, events, embeds)
    return Cohort(participants, counts={"participants": cfg.n_participants})


def synth_coupling(config: SynthConfig, seed: int) -> dict[str, dict[str, float]]:
    """The planted per-participant coupling coefficients (for checking recovery)."""
    width = max(3, len(str(config.n_participants)))
    return {f"P{i + 1:0{width}d}": _coupling(config, _rng(seed, 4, i))
            for i in range(config.n_participants)}
