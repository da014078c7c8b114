"""Chronological within-person train/val/test assignment."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import pandas as pd

SPLITS = ("train", "val", "test")
DEFAULT_FRACTIONS = (0.6, 0.2, 0.2)


class SplitError(ValueError):
    pass


def split_sizes(n: int, fractions=DEFAULT_FRACTIONS) -> tuple[int, int, int]:
    """Per-participant split counts; val and test are floored, train takes the remainder.

    >>> split_sizes(21)
    (13, 4, 4)
    """
    f_train, f_val, f_test = fractions
    if min(fractions) < 0 or not math.isclose(sum(fractions), 1.0):
        raise SplitError(f"fractions must be non-negative and sum to 1, got {fractions}")
    n_val = int(math.floor(f_val * n + 1e-9))
    n_test = int(math.floor(f_test * n + 1e-9))
    return n - n_val - n_test, n_val, n_test


def split_tags(n: int, fractions=DEFAULT_FRACTIONS) -> np.ndarray:
    n_train, n_val, n_test = split_sizes(n, fractions)
    return np.array(["train"] * n_train + ["val"] * n_val + ["test"] * n_test, dtype=object)


@dataclass(frozen=True)
class SplitAssignment:
    """Split tag per (participant_id, assessment_index).

    A design-matrix row for period k inherits the tag of assessment k, the
    assessment that closes the period and supplies the row's target score.
    """

    tags: Mapping[tuple[str, int], str]
    fractions: tuple[float, float, float] = DEFAULT_FRACTIONS
    minima: tuple[int, int, int] = field(default=(0, 0, 0))

    def tag(self, pid: str, index: int) -> str:
        return self.tags[(pid, int(index))]

    def participants(self) -> list[str]:
        return sorted({pid for pid, _ in self.tags})

    def counts(self) -> pd.DataFrame:
        df = pd.DataFrame([(pid, t) for (pid, _), t in self.tags.items()],
                          columns=["participant_id", "split"])
        return (df.groupby(["participant_id", "split"]).size().unstack(fill_value=0)
                .reindex(columns=list(SPLITS), fill_value=0))


def assign_splits(cohort, fractions=DEFAULT_FRACTIONS, minima=(6, 2, 2)) -> SplitAssignment:
    """Split every participant's assessment sequence chronologically."""
    tags = {}
    for p in cohort:
        idx = p.assessments.index
        n_train, n_val, n_test = split_sizes(len(idx), fractions)
        if any(s < m for s, m in zip((n_train, n_val, n_test), minima)):
            raise SplitError(f"participant {p.participant_id}: split sizes "
                             f"{(n_train, n_val, n_test)} below minima {tuple(minima)}")
        for i, tag in zip(idx.tolist(), split_tags(len(idx), fractions)):
            tags[(p.participant_id, i)] = tag
    return SplitAssignment(tags, tuple(fractions), tuple(minima))


def temporal_split(rows: pd.DataFrame, fractions=DEFAULT_FRACTIONS, minima=(6, 2, 2),
                   order_col: str = "period_index") -> pd.Series:
    """Tag each row train/val/test by its chronological position within participant.

    Returns a Series aligned with ``rows.index``.
    """
    out = pd.Series(index=rows.index, dtype=object)
    for pid, grp in rows.groupby("participant_id", sort=True):
        grp = grp.sort_values(order_col, kind="stable")
        sizes = split_sizes(len(grp), fractions)
        if any(s < m for s, m in zip(sizes, minima)):
            raise SplitError(f"participant {pid}: split sizes {sizes} below minima "
                             f"{tuple(minima)}")
        out.loc[grp.index] = split_tags(len(grp), fractions)
    return out
