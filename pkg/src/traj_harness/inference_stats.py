"""ICC variance decomposition, within-person correlations and Holm step-down."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

log = logging.getLogger(__name__)

MIN_PAIRS = 3


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class IccResult:
    icc: float
    msb: float
    msw: float
    k_bar: float
    n_groups: int
    n_obs: int
    var_between: float
    var_within: float

    @property
    def negative(self) -> bool:
        return self.icc < 0


def icc_oneway(values, groups=None) -> IccResult:
    """One-way random-effects ICC(1) by ANOVA moments, unbalanced group sizes.

    ``values`` is either a flat array with a parallel ``groups`` array or a
    sequence of per-group arrays.
    """
    if groups is None:
        parts = [np.asarray(v, dtype=float) for v in values]
    else:
        v = np.asarray(values, dtype=float)
        g = pd.factorize(np.asarray(groups), sort=True)[0]
        if len(g) != len(v):
            raise StatsError("values and groups differ in length")
        order = np.argsort(g, kind="stable")
        parts = np.split(v[order], np.flatnonzero(np.diff(g[order])) + 1)
    parts = [p for p in parts if len(p)]
    sizes = np.array([len(p) for p in parts], dtype=float)
    G, N = len(parts), float(sizes.sum())
    if G < 2:
        raise StatsError("ICC needs at least two groups")
    if np.all(sizes == 1):
        raise StatsError("every group has a single value; within-group variance undefined")
    grand = np.concatenate(parts).mean()
    means = np.array([p.mean() for p in parts])
    ssb = float(np.sum(sizes * (means - grand) ** 2))
    ssw = float(sum(np.sum((p - m) ** 2) for p, m in zip(parts, means)))
    msb = ssb / (G - 1)
    msw = ssw / (N - G)
    k_bar = (N - np.sum(sizes ** 2) / N) / (G - 1)
    denom = msb + (k_bar - 1) * msw
    icc = (msb - msw) / denom if denom > 0 else float("nan")
    if icc < 0:
        log.warning("negative ICC estimate %.4f reported unclipped", icc)
    return IccResult(float(icc), msb, msw, float(k_bar), G, int(N),
                     float((msb - msw) / k_bar), msw)


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float) - np.mean(x)
    y = np.asarray(y, dtype=float) - np.mean(y)
    return float(np.clip((x @ y) / np.sqrt((x @ x) * (y @ y)), -1.0, 1.0))


@dataclass(frozen=True)
class WithinPersonCorrSummary:
    feature: str
    r: dict  # participant -> Pearson r
    n_excluded_variance: int
    n_excluded_short: int

    @property
    def values(self) -> np.ndarray:
        return np.array(list(self.r.values()), dtype=float)

    @property
    def n_included(self) -> int:
        return len(self.r)

    def summary(self) -> dict:
        v = self.values
        if not len(v):
            return {"feature": self.feature, "n_included": 0, "mean_r": np.nan, "sd_r": np.nan,
                    "pct_positive": np.nan, "mean_abs_r": np.nan,
                    "n_excluded_variance": self.n_excluded_variance,
                    "n_excluded_short": self.n_excluded_short}
        return {"feature": self.feature, "n_included": len(v), "mean_r": float(v.mean()),
                "sd_r": float(v.std(ddof=1)) if len(v) > 1 else np.nan,
                "pct_positive": float(100 * np.mean(v > 0)),
                "mean_abs_r": float(np.abs(v).mean()),
                "n_excluded_variance": self.n_excluded_variance,
                "n_excluded_short": self.n_excluded_short}


def within_person_correlations(frame: pd.DataFrame, feature: str,
                               outcome: str = "cesd_delta",
                               min_pairs: int = MIN_PAIRS) -> WithinPersonCorrSummary:
    """Pearson r between a feature series and the outcome series, separately per participant.

    Participants with fewer than ``min_pairs`` rows, or with zero variance in
    either series, are excluded and counted.
    """
    r, short, flat = {}, 0, 0
    for pid, grp in frame.groupby("participant_id", sort=True):
        x = grp[feature].to_numpy(dtype=float)
        y = grp[outcome].to_numpy(dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        x, y = x[ok], y[ok]
        if len(x) < min_pairs:
            short += 1
            continue
        if np.ptp(x) == 0 or np.ptp(y) == 0:
            flat += 1
            continue
        r[pid] = pearson(x, y)
    return WithinPersonCorrSummary(feature, r, flat, short)


def holm_bonferroni(p_values) -> np.ndarray:
    """Holm step-down adjusted p-values in the input order."""
    p = np.asarray(p_values, dtype=float)
    if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
        raise StatsError("p-values must lie in [0, 1]")
    m = len(p)
    if m == 0:
        return p.copy()
    order = np.argsort(p, kind="stable")
    stepped = np.minimum(1.0, (m - np.arange(m)) * p[order])
    adj = np.empty(m)
    adj[order] = np.maximum.accumulate(stepped)
    return adj
