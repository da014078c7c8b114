import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, strategies as st

from traj_harness.datamodel import AssessmentSeries, EmbeddingStream, EventStream
from traj_harness.evaluation.splits import assign_splits
from traj_harness.features import design
from traj_harness.features.design import (BEHAVIORAL, FEATURES, LAGS, LEVELS, PERSON_MEAN,
                                          VIF_EXCLUDED, build_design_matrix)
from traj_harness.features.periods import (FeatureError, ObservationPeriod, clip_dispersion,
                                           compute_period_features, segment_periods, session_ids,
                                           sessionize)
from traj_harness.features.scaling import apply_scaler, fit_scaler
from traj_harness.features.vif import vif_screen, vif_values

from conftest import DAY, T0, make_cohort, make_participant


def _assess(days, miss=None):
    ts = T0 + np.asarray(days) * DAY
    n = len(days)
    return AssessmentSeries(np.arange(n), ts, np.full(n, 10), miss if miss is not None
                            else np.zeros(n))


# -- periods -----------------------------------------------------------------

def test_periods_span_consecutive_assessments():
    ps = segment_periods(_assess([0, 14, 28]))
    assert [(p.start_ts, p.end_ts) for p in ps] == [(T0, T0 + 14 * DAY),
                                                    (T0 + 14 * DAY, T0 + 28 * DAY)]
    assert [p.period_index for p in ps] == [1, 2]


def test_single_assessment_no_periods():
    assert segment_periods(_assess([0])) == []


def test_excluded_flag_carried():
    ps = segment_periods(_assess([0, 14, 28]), exclusion_flags={2})
    assert [p.excluded for p in ps] == [False, True]


def test_period_rejects_reversed_bounds():
    with pytest.raises(FeatureError):
        ObservationPeriod("A", 1, 10.0, 10.0)


# -- sessions ----------------------------------------------------------------

def test_sessions_small_cases():
    s = sessionize([0, 5, 10])
    assert len(s) == 1 and s[0].n_screens == 3
    assert len(sessionize([0, 5, 120, 125])) == 2
    assert sessionize([]) == []


def _scan_sessions(ts, gap):
    count, prev = 0, None
    for t in ts:
        if prev is None or t - prev > gap:
            count += 1
        prev = t
    return count


def test_session_count_matches_scan():
    rng = np.random.default_rng(0)
    ts = np.sort(np.cumsum(rng.choice([5.0, 5.0, 10.0, 15.0, 16.0, 300.0], 10_000)))
    assert int(session_ids(ts)[-1]) + 1 == _scan_sessions(ts, 15.0)
    assert len(sessionize(ts)) == _scan_sessions(ts, 15.0)
    assert sum(s.n_screens for s in sessionize(ts)) == len(ts)


# -- period features ---------------------------------------------------------

def _period(days):
    return ObservationPeriod("A", 1, T0, T0 + days * DAY)


MIDNIGHT = math.floor(T0 / DAY) * DAY + DAY


def test_mean_daily_screens_over_active_days():
    ts = np.concatenate([MIDNIGHT + d * 2 * DAY + 3600 * 12 + 5 * np.arange(40)
                         for d in range(7)])
    ev = EventStream(ts, np.full(len(ts), "a"), np.zeros(len(ts), bool))
    f = compute_period_features(ev, None, ObservationPeriod("A", 1, MIDNIGHT, MIDNIGHT + 14 * DAY))
    assert len(ts) == 280 and f.n_active_days == 7
    assert f.mean_daily_screens == 40.0
    assert f.active_day_ratio == 0.5


def test_overnight_all_records():
    ts = MIDNIGHT + 3600 + 60 * np.arange(60)
    ev = EventStream(ts, np.full(60, "a"), np.zeros(60, bool))
    f = compute_period_features(ev, None, ObservationPeriod("A", 1, MIDNIGHT, MIDNIGHT + DAY))
    assert f.overnight_ratio == 1.0


def test_zero_activity_period_degenerate():
    f = compute_period_features(EventStream.empty(), None, _period(14))
    assert f.degenerate and f.mean_daily_screens == 0 and f.clip_dispersion == 0


def _features_oracle(ts, apps, social, start, end, offset, gap=15.0):
    """Plain per-day loops over the window."""
    keep = [(t, a, s) for t, a, s in zip(ts, apps, social) if start <= t < end]
    days = {}
    prev_t, sess_start_day = None, []
    for t, a, s in keep:
        d = math.floor((t + offset) / DAY)
        rec = days.setdefault(d, {"n": 0, "apps": set(), "sessions": 0})
        rec["n"] += 1
        rec["apps"].add(a)
        if prev_t is None or t - prev_t > gap:
            rec["sessions"] += 1
        prev_t = t
    n = len(keep)
    active = len(days)
    n_cal, day = 0, math.floor((start + offset) / DAY)
    while day * DAY - offset < end:  # step through local midnights inside the window
        n_cal += 1
        day += 1
    overnight = sum(1 for t, _, _ in keep if ((t + offset) - math.floor((t + offset) / DAY) * DAY)
                    < 6 * 3600)
    n_social = sum(1 for _, _, s in keep if s)
    screens = n / active
    return {
        "mean_daily_screens": screens,
        "mean_daily_unique_apps": sum(len(r["apps"]) for r in days.values()) / active,
        "mean_daily_sessions": sum(r["sessions"] for r in days.values()) / active,
        "sessions_per_screen": sum(r["sessions"] for r in days.values()) / n,
        "overnight_ratio": overnight / n,
        "social_ratio": n_social / n,
        "social_screens": screens * n_social / n,
        "active_day_ratio": active / n_cal,
    }


@pytest.mark.parametrize("seed", range(5))
def test_period_features_match_daily_loop(seed):
    rng = np.random.default_rng(seed)
    start = T0 + rng.uniform(0, DAY)
    end = start + 5 * DAY
    # bursts at capture cadence with random gaps, some straddling the window edges
    gaps = rng.choice([5.0, 5.0, 5.0, 12.0, 15.0, 16.0, 900.0, 20000.0], 800)
    ts = start - DAY + np.cumsum(gaps)
    apps = rng.choice(["a", "b", "c", "d"], len(ts))
    social = rng.random(len(ts)) < 0.3
    offset = float(rng.choice([-8, -5, 0, 3])) * 3600
    ev = EventStream(ts, apps, social)
    f = compute_period_features(ev, None, ObservationPeriod("A", 1, start, end), offset)
    want = _features_oracle(ts, apps, social, start, end, offset)
    for k, v in want.items():
        assert getattr(f, k) == pytest.approx(v, rel=1e-12), k
    assert f.sessions_per_screen * f.n_screens == pytest.approx(f.n_sessions, rel=1e-12)


def test_dispersion_identical_vectors():
    assert clip_dispersion(np.tile([0.6, 0.8], (5, 1))) == pytest.approx(0.0, abs=1e-15)


def test_dispersion_orthonormal_pair():
    assert clip_dispersion(np.eye(2)) == pytest.approx(1 - 1 / math.sqrt(2), abs=1e-12)


def test_dispersion_double_loop():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(100, 16))
    mu = [sum(x[i][j] for i in range(100)) / 100 for j in range(16)]
    total = 0.0
    for i in range(100):
        dot = sum(x[i][j] * mu[j] for j in range(16))
        nx = math.sqrt(sum(v * v for v in x[i]))
        nm = math.sqrt(sum(v * v for v in mu))
        total += 1 - dot / (nx * nm)
    assert clip_dispersion(x) == pytest.approx(total / 100, abs=1e-12)


def test_dispersion_empty_and_zero_mean():
    assert clip_dispersion(np.zeros((0, 3))) == 0.0
    with pytest.raises(FeatureError):
        clip_dispersion(np.array([[1.0, 0.0], [-1.0, 0.0]]))


@given(st.floats(0.01, 100.0), st.integers(0, 10_000))
def test_dispersion_scale_invariant(scale, seed):
    x = np.random.default_rng(seed).normal(size=(12, 5)) + 0.5
    assert clip_dispersion(scale * x) == pytest.approx(clip_dispersion(x), abs=1e-12)
    assert 0.0 <= clip_dispersion(x) <= 2.0


# -- design matrix -----------------------------------------------------------

def _events_for(days_counts, social_every=0):
    """Per assessment period: number of screens, all on the first day at noon."""
    out = []
    for k, n in enumerate(days_counts):
        base = T0 + k * 14 * DAY + 3600 * 2
        for j in range(n):
            out.append((base + 5 * j, f"app{j % 2}", bool(social_every and j % social_every == 0)))
    return out


def test_hand_built_matrix():
    # three participants, seven assessments each -> six periods
    cesd = {"A": [10, 12, 8, 14, 20, 18, 16], "B": [30, 28, 25, 27, 24, 22, 26],
            "C": [5, 5, 5, 5, 5, 5, 5]}
    screens = {"A": [10, 20, 30, 40, 50, 60], "B": [8, 8, 8, 8, 8, 8], "C": [2, 4, 6, 8, 10, 12]}
    parts = [make_participant(pid, cesd[pid], events=_events_for(screens[pid], 2),
                              gender=g, age=a)
             for pid, g, a in (("A", "female", 25), ("B", "male", 40), ("C", "other", 33))]
    cohort = make_cohort(parts)
    splits = assign_splits(cohort, minima=(0, 0, 0))
    m = build_design_matrix(cohort, splits)
    assert list(m.columns[-39:]) == FEATURES
    for pid in "ABC":
        rows = m[m.participant_id == pid].reset_index(drop=True)
        # 7 assessments -> val = test = 1, train holds indices 0..4
        assert rows["split"].tolist() == ["train"] * 4 + ["val", "test"]
        assert rows["prior_cesd"].tolist() == cesd[pid][:-1]
        assert rows["next_cesd"].tolist() == cesd[pid][1:]
        assert (rows[PERSON_MEAN] == np.mean(cesd[pid][:5])).all()
        s = np.array(screens[pid], float)
        assert rows["mean_daily_screens"].tolist() == s.tolist()
        d = np.concatenate([[0.0], np.diff(s)])
        assert rows["mean_daily_screens_delta"].tolist() == d.tolist()
        assert rows["mean_daily_screens_lag"].tolist() == [0.0] + s[:-1].tolist()
        assert rows["mean_daily_screens_delta_lag"].tolist() == [0.0] + d[:-1].tolist()
        assert (rows["social_ratio"] == 0.5).all()
        assert rows["social_screens"].tolist() == (s * 0.5).tolist()
        assert (rows[LAGS].iloc[0] == 0).all()
    assert m.loc[m.participant_id == "C", ["gender_male", "gender_female"]].eq(0).all().all()
    assert (m.loc[m.participant_id == "B", "gender_male"] == 1).all()


def test_person_mean_from_train_only():
    cesd = [8, 10, 12, 8, 10, 12, 50, 50, 60, 60]  # 6 train, 2 val, 2 test
    cohort = make_cohort([make_participant("A", cesd, events=_events_for([3] * 9))])
    m = build_design_matrix(cohort, assign_splits(cohort))
    assert (m[PERSON_MEAN] == 10.0).all()


def test_matrix_columns_and_vif_candidates(small_matrix):
    assert len(FEATURES) == 39
    assert not set(VIF_EXCLUDED) & set(FEATURES)
    for pid, g in small_matrix.groupby("participant_id"):
        g = g.sort_values("period_index")
        for c in LEVELS:
            lev = g[c].to_numpy()
            assert np.array_equal(g[f"{c}_delta"].to_numpy()[1:], lev[1:] - lev[:-1])
        for c in BEHAVIORAL:
            assert np.array_equal(g[f"{c}_lag"].to_numpy()[1:], g[c].to_numpy()[:-1])


def test_excluded_period_gap_flag():
    miss = np.zeros(12)
    miss[4] = 0.5
    p = make_participant("A", [10] * 12, events=_events_for(list(range(3, 14))),
                         missingness=miss)
    cohort = make_cohort([p]).with_exclusions({("A", 4)})
    m = build_design_matrix(cohort, assign_splits(cohort))
    assert 4 not in m.period_index.tolist()
    row5 = m[m.period_index == 5].iloc[0]
    row3 = m[m.period_index == 3].iloc[0]
    assert bool(row5.gap_flag)
    assert row5.mean_daily_screens_delta == row5.mean_daily_screens - row3.mean_daily_screens


def test_zero_train_rows_error():
    cohort = make_cohort([make_participant("A", [10] * 10, events=_events_for([3] * 9))])
    splits = assign_splits(cohort)
    tags = {k: "test" for k in splits.tags}
    with pytest.raises(FeatureError):
        build_design_matrix(cohort, type(splits)(tags))


# -- VIF ---------------------------------------------------------------------

def test_vif_identical_columns():
    x = np.random.default_rng(0).normal(size=(50, 2))
    X = np.column_stack([x, x[:, 0]])
    kept, log = vif_screen(X, ["a", "b", "c"])
    assert kept == ["a", "b"]
    assert log[0]["column"] == "c" and log[0]["vif"] == np.inf


def test_vif_orthogonal_columns():
    Q, _ = np.linalg.qr(np.random.default_rng(1).normal(size=(40, 4)))
    Q -= Q.mean(axis=0)
    Q, _ = np.linalg.qr(np.column_stack([np.ones(40), Q]))
    X = Q[:, 1:]
    kept, log = vif_screen(X, list("abcd"))
    assert kept == list("abcd") and not log
    assert np.allclose(vif_values(X), 1.0, atol=1e-9)


def test_vif_values_normal_equations():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(200, 10))
    X[:, 3] += 0.8 * X[:, 1]
    got = vif_values(X)
    for j in range(10):
        A = np.column_stack([np.ones(200), np.delete(X, j, axis=1)])
        beta = np.linalg.solve(A.T @ A, A.T @ X[:, j])
        resid = X[:, j] - A @ beta
        r2 = 1 - resid @ resid / np.sum((X[:, j] - X[:, j].mean()) ** 2)
        assert got[j] == pytest.approx(1 / (1 - r2), rel=1e-8)


def test_vif_needs_two_columns():
    with pytest.raises(ValueError):
        vif_screen(np.ones((5, 1)))


# -- scaling -----------------------------------------------------------------

def test_zscore_value():
    train = pd.DataFrame({"mean_daily_screens": [30.0, 50.0]})
    s = fit_scaler(train, "tree")
    out = apply_scaler(s, pd.DataFrame({"mean_daily_screens": [50.0]}))
    assert out["mean_daily_screens"].iloc[0] == 1.0


def test_tree_policy_passthrough():
    train = pd.DataFrame({"overnight_ratio": [0.1, 0.3], "prior_cesd": [10.0, 20.0],
                          "age": [20.0, 40.0]})
    s = fit_scaler(train, "tree")
    out = apply_scaler(s, train)
    assert out["overnight_ratio"].tolist() == [0.1, 0.3]
    assert out["prior_cesd"].tolist() == [10.0, 20.0]
    assert out["age"].tolist() == [-1.0, 1.0]
    en = apply_scaler(fit_scaler(train, "elasticnet"), train)
    assert en["overnight_ratio"].tolist() == pytest.approx([-1.0, 1.0], abs=1e-12)


def test_constant_column_scaled_to_zero(caplog):
    train = pd.DataFrame({"age": [30.0, 30.0, 30.0]})
    s = fit_scaler(train, "elasticnet")
    assert "constant" in caplog.text
    out = apply_scaler(s, pd.DataFrame({"age": [31.0, 99.0]}))
    assert out["age"].tolist() == [0.0, 0.0]


def test_unknown_family():
    with pytest.raises(ValueError):
        fit_scaler(pd.DataFrame({"a": [1.0]}), "svm")
