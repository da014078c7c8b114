"""Cohort inclusion criteria: survey count, split minima, metadata missingness."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .records import Cohort


class InclusionError(ValueError):
    pass


@dataclass
class ExclusionReport:
    participants: dict[str, str] = field(default_factory=dict)  # pid -> reason
    periods: list[tuple[str, int, float]] = field(default_factory=list)
    retained: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        return {"n_retained": len(self.retained),
                "n_excluded_participants": len(self.participants),
                "n_excluded_periods": len(self.periods),
                "reasons": {r: sum(v == r for v in self.participants.values())
                            for r in sorted(set(self.participants.values()))}}


def apply_inclusion(cohort: Cohort, min_surveys: int = 10, min_train: int = 6,
                    min_val: int = 2, min_test: int = 2, max_missingness: float = 0.10,
                    fractions=(0.6, 0.2, 0.2)) -> tuple[Cohort, ExclusionReport]:
    """Drop participants failing inclusion and flag high-missingness periods.

    A period is flagged when its missingness exceeds ``max_missingness``. Split
    minima count usable assessments: the first assessment, plus every later one
    whose preceding period is not flagged.
    """
    from ..evaluation.splits import split_tags

    report = ExclusionReport()
    keep, flagged = [], set()
    for p in cohort:
        pid, a = p.participant_id, p.assessments
        if len(a) < min_surveys:
            report.participants[pid] = "min_surveys"
            continue
        bad = np.zeros(len(a), dtype=bool)
        bad[1:] = a.missingness[1:] > max_missingness
        tags = split_tags(len(a), fractions)
        usable = ~bad
        for tag, minimum in (("train", min_train), ("val", min_val), ("test", min_test)):
            if int(np.sum(usable & (tags == tag))) < minimum:
                report.participants[pid] = f"min_{tag}"
                break
        else:
            keep.append(pid)
            for i in np.flatnonzero(bad):
                flagged.add((pid, int(a.index[i])))
                report.periods.append((pid, int(a.index[i]), float(a.missingness[i])))
    if not keep:
        raise InclusionError("no participant survives inclusion criteria; "
                             f"reasons: {ExclusionReport(report.participants).summary()}")
    report.retained = keep
    out = cohort.subset(keep).with_exclusions(flagged)
    return out, report
