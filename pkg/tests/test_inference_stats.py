import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from traj_harness.inference_stats import (StatsError, holm_bonferroni, icc_oneway,
                                          within_person_correlations)


def test_icc_perfect_between():
    groups = [[5.0] * 4, [10.0] * 4, [20.0] * 3]
    assert icc_oneway(groups).icc == pytest.approx(1.0)


def test_icc_balanced_closed_form():
    g = [np.array([1.0, 3, 2]), np.array([4.0, 6, 8]), np.array([2.0, 2, 5])]
    allv = np.concatenate(g)
    means = np.array([x.mean() for x in g])
    msb = 3 * np.sum((means - allv.mean()) ** 2) / 2
    msw = sum(((x - x.mean()) ** 2).sum() for x in g) / 6
    assert icc_oneway(g).icc == pytest.approx((msb - msw) / (msb + 2 * msw))


def test_icc_flat_and_grouped_inputs_agree():
    rng = np.random.default_rng(4)
    groups = rng.integers(0, 9, 80)
    v = rng.normal(size=80) + groups
    parts = [v[groups == k] for k in range(9)]
    assert icc_oneway(v, groups).icc == pytest.approx(icc_oneway(parts).icc)


def test_icc_null_near_zero():
    rng = np.random.default_rng(0)
    vals = [icc_oneway(rng.normal(size=(60, 10))).icc for _ in range(30)]
    assert abs(np.mean(vals)) < 0.02


@settings(max_examples=40)
@given(st.integers(0, 10_000), st.floats(-50, 50), st.floats(0.1, 20))
def test_icc_affine_and_order_invariant(seed, shift, scale):
    rng = np.random.default_rng(seed)
    parts = [rng.normal(size=rng.integers(2, 7)) + rng.normal() for _ in range(6)]
    base = icc_oneway(parts).icc
    assert icc_oneway([p * scale + shift for p in parts]).icc == pytest.approx(base, abs=1e-9)
    assert icc_oneway(parts[::-1]).icc == pytest.approx(base, abs=1e-9)


def test_icc_negative_reported(caplog):
    r = icc_oneway([[0.0, 10.0], [0.1, 9.9], [0.05, 9.95]])
    assert r.icc < 0 and r.negative
    assert "negative ICC" in caplog.text


def test_icc_errors():
    with pytest.raises(StatsError):
        icc_oneway([[1.0, 2.0]])
    with pytest.raises(StatsError):
        icc_oneway([[1.0], [2.0]])


def test_within_person_correlation():
    f = pd.DataFrame({
        "participant_id": ["a"] * 4 + ["b"] * 4 + ["c"] * 2 + ["d"] * 3,
        "x": [1, 2, 3, 4, 1, 2, 3, 4, 1, 2, 5, 5, 5],
        "cesd_delta": [2, 4, 6, 8, 4, 3, 2, 1, 0, 1, 1, 2, 3],
    })
    s = within_person_correlations(f, "x")
    assert s.r == pytest.approx({"a": 1.0, "b": -1.0})
    assert s.n_excluded_short == 1 and s.n_excluded_variance == 1
    summ = s.summary()
    assert summ["pct_positive"] == 50.0 and summ["mean_abs_r"] == 1.0


def test_holm_worked_example():
    assert holm_bonferroni([0.01, 0.04, 0.03]) == pytest.approx([0.03, 0.06, 0.06])
    assert holm_bonferroni([0.2]) == pytest.approx([0.2])
    assert holm_bonferroni([]).size == 0


@settings(max_examples=60)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=12), st.randoms())
def test_holm_properties(ps, rnd):
    p = np.array(ps)
    adj = holm_bonferroni(p)
    assert np.all(adj >= p - 1e-15) and np.all(adj <= 1)
    perm = list(range(len(p)))
    rnd.shuffle(perm)
    assert holm_bonferroni(p[perm]) == pytest.approx(adj[perm])
    order = np.argsort(p, kind="stable")
    assert np.all(np.diff(adj[order]) >= -1e-15)


@pytest.mark.parametrize("bad", [[0.1, 1.2], [-0.01], [np.nan]])
def test_holm_rejects_out_of_range(bad):
    with pytest.raises(StatsError):
        holm_bonferroni(bad)
