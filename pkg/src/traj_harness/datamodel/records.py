"""Record types and the columnar per-participant containers that hold them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

CESD_MIN, CESD_MAX = 0, 60
GENDERS = ("male", "female", "other")
ETHNICITIES = ("hispanic", "non_hispanic", "unknown")
INCOME_BANDS = ("lt_25k", "25k_100k", "ge_100k", "undisclosed")
WHITE = "white"


class ValidationError(ValueError):
    """Bad input data. Carries the file, line and field when known."""

    def __init__(self, message: str, file: str | None = None, line: int | None = None,
                 field: str | None = None):
        self.file, self.line, self.field = file, line, field
        self.detail = message
        where = []
        if file is not None:
            where.append(str(file))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{': '.join(where)}: {message}" if where else message)


class ConfigError(ValueError):
    """Invalid generator or run configuration."""


@dataclass(frozen=True)
class ScreenRecord:
    participant_id: str
    timestamp: float
    app_id: str
    is_social: bool


@dataclass(frozen=True)
class EmbeddingRecord:
    participant_id: str
    timestamp: float
    vector: tuple[float, ...]


@dataclass(frozen=True)
class AssessmentRecord:
    participant_id: str
    assessment_index: int
    timestamp: float
    cesd: int
    missingness: float = 0.0


@dataclass(frozen=True)
class Demographics:
    participant_id: str
    age_years: int
    gender: str
    race: frozenset[str] = frozenset()
    ethnicity: str = "unknown"
    income_band: str = "undisclosed"
    utc_offset: float = 0.0  # seconds east of UTC, used for the local-clock overnight window

    def __post_init__(self):
        if self.age_years < 18:
            raise ValidationError(f"age {self.age_years} < 18", field="age")
        if self.gender not in GENDERS:
            raise ValidationError(f"gender {self.gender!r} not in {GENDERS}", field="gender")
        if self.ethnicity not in ETHNICITIES:
            raise ValidationError(f"ethnicity {self.ethnicity!r} not in {ETHNICITIES}",
                                  field="ethnicity")
        if self.income_band not in INCOME_BANDS:
            raise ValidationError(f"income_band {self.income_band!r} not in {INCOME_BANDS}",
                                  field="income_band")

    @property
    def is_white_only(self) -> bool:
        return self.race == frozenset({WHITE})


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class AssessmentSeries:
    """Ordered fortnightly CES-D scores of one participant."""

    index: np.ndarray
    ts: np.ndarray
    cesd: np.ndarray
    missingness: np.ndarray  # fraction for the period closed by each assessment

    def __post_init__(self):
        order = np.argsort(self.index, kind="stable")
        idx = np.asarray(self.index, dtype=np.int64)[order]
        ts = np.asarray(self.ts, dtype=np.float64)[order]
        cesd = np.asarray(self.cesd, dtype=np.int64)[order]
        miss = np.asarray(self.missingness, dtype=np.float64)[order]
        if len({len(idx), len(ts), len(cesd), len(miss)}) != 1:
            raise ValidationError("assessment arrays differ in length")
        if np.any(idx < 0):
            raise ValidationError("assessment_index must be >= 0", field="assessment_index")
        if np.any(np.diff(idx) <= 0):
            raise ValidationError("duplicate assessment_index", field="assessment_index")
        if np.any(np.diff(ts) <= 0):
            raise ValidationError("assessment timestamps not strictly increasing", field="ts")
        if np.any((cesd < CESD_MIN) | (cesd > CESD_MAX)):
            raise ValidationError(f"cesd outside range {CESD_MIN}-{CESD_MAX}", field="cesd")
        if np.any((miss < 0) | (miss > 1)) or not np.all(np.isfinite(miss)):
            raise ValidationError("missingness outside [0, 1]", field="missingness")
        for name, arr in (("index", idx), ("ts", ts), ("cesd", cesd), ("missingness", miss)):
            object.__setattr__(self, name, _frozen(arr))

    def __len__(self) -> int:
        return len(self.index)

    @classmethod
    def from_records(cls, records: Iterable[AssessmentRecord]) -> "AssessmentSeries":
        records = list(records)
        return cls(index=np.array([r.assessment_index for r in records], dtype=np.int64),
                   ts=np.array([r.timestamp for r in records], dtype=np.float64),
                   cesd=np.array([r.cesd for r in records], dtype=np.int64),
                   missingness=np.array([r.missingness for r in records], dtype=np.float64))


@dataclass(frozen=True, eq=False)
class EventStream:
    """Screen records of one participant, sorted by timestamp."""

    ts: np.ndarray
    app_id: np.ndarray
    is_social: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=np.float64)
        apps = np.asarray(self.app_id, dtype=str)
        social = np.asarray(self.is_social, dtype=bool)
        if not (len(ts) == len(apps) == len(social)):
            raise ValidationError("event arrays differ in length")
        if np.any(ts <= 0) or not np.all(np.isfinite(ts)):
            raise ValidationError("event timestamps must be finite and > 0", field="ts")
        order = np.lexsort((apps, ts))
        for name, arr in (("ts", ts[order]), ("app_id", apps[order]),
                          ("is_social", social[order])):
            object.__setattr__(self, name, _frozen(arr))

    def __len__(self) -> int:
        return len(self.ts)

    @classmethod
    def empty(cls) -> "EventStream":
        return cls(np.zeros(0), np.zeros(0, dtype=str), np.zeros(0, dtype=bool))


@dataclass(frozen=True, eq=False)
class EmbeddingStream:
    ts: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=np.float64)
        vec = np.asarray(self.vectors, dtype=np.float64)
        if vec.size == 0 and vec.ndim != 2:
            vec = np.zeros((0, 0))
        if vec.ndim != 2 or len(vec) != len(ts):
            raise ValidationError("embedding vectors must be an (n, d) array aligned with ts")
        if len(vec) and np.any(~np.any(vec != 0, axis=1)):
            raise ValidationError("zero embedding vector cannot be normalized", field="vector")
        if not np.all(np.isfinite(vec)):
            raise ValidationError("non-finite embedding value", field="vector")
        order = np.argsort(ts, kind="stable")
        object.__setattr__(self, "ts", _frozen(ts[order]))
        object.__setattr__(self, "vectors", _frozen(vec[order]))

    def __len__(self) -> int:
        return len(self.ts)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1] if self.vectors.ndim == 2 else 0

    @classmethod
    def empty(cls, dim: int = 0) -> "EmbeddingStream":
        return cls(np.zeros(0), np.zeros((0, dim)))


@dataclass(frozen=True, eq=False)
class Participant:
    demographics: Demographics
    assessments: AssessmentSeries
    events: EventStream
    embeddings: EmbeddingStream

    @property
    def participant_id(self) -> str:
        return self.demographics.participant_id


@dataclass(frozen=True, eq=False)
class Cohort:
    """Immutable collection of participants keyed by id, in sorted id order.

    ``excluded_periods`` holds (participant_id, period_index) pairs removed from
    featurization by the missingness rule.
    """

    participants: Mapping[str, Participant]
    excluded_periods: frozenset = frozenset()
    counts: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        ordered = {pid: self.participants[pid] for pid in sorted(self.participants)}
        for pid, p in ordered.items():
            if p.participant_id != pid:
                raise ValidationError(f"participant key {pid!r} != demographics id")
        dims = {p.embeddings.dim for p in ordered.values() if len(p.embeddings)}
        if len(dims) > 1:
            raise ValidationError(f"embedding dimension differs across cohort: {sorted(dims)}",
                                  field="vector")
        object.__setattr__(self, "participants", ordered)
        object.__setattr__(self, "excluded_periods", frozenset(self.excluded_periods))

    def __len__(self) -> int:
        return len(self.participants)

    def __iter__(self):
        return iter(self.participants.values())

    def __getitem__(self, pid: str) -> Participant:
        return self.participants[pid]

    @property
    def ids(self) -> list[str]:
        return list(self.participants)

    @property
    def metadata_missingness(self) -> dict[tuple[str, int], float]:
        out = {}
        for pid, p in self.participants.items():
            a = p.assessments
            for i in range(1, len(a)):
                out[(pid, int(a.index[i]))] = float(a.missingness[i])
        return out

    def subset(self, ids: Iterable[str]) -> "Cohort":
        keep = set(ids)
        return Cohort({pid: p for pid, p in self.participants.items() if pid in keep},
                      frozenset(e for e in self.excluded_periods if e[0] in keep),
                      dict(self.counts))

    def with_exclusions(self, excluded: Iterable[tuple[str, int]]) -> "Cohort":
        return Cohort(self.participants, frozenset(excluded), dict(self.counts))

    def equals(self, other: "Cohort") -> bool:
        if self.ids != other.ids or self.excluded_periods != other.excluded_periods:
            return False
        for pid in self.ids:
            a, b = self[pid], other[pid]
            if a.demographics != b.demographics:
                return False
            pairs = [(a.assessments.index, b.assessments.index),
                     (a.assessments.ts, b.assessments.ts),
                     (a.assessments.cesd, b.assessments.cesd),
                     (a.assessments.missingness, b.assessments.missingness),
                     (a.events.ts, b.events.ts), (a.events.app_id, b.events.app_id),
                     (a.events.is_social, b.events.is_social),
                     (a.embeddings.ts, b.embeddings.ts)]
            if not all(x.shape == y.shape and np.array_equal(x, y) for x, y in pairs):
                return False
            if len(a.embeddings) or len(b.embeddings):
                if not np.array_equal(a.embeddings.vectors, b.embeddings.vectors):
                    return False
        return True
