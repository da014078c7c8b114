import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from traj_harness.evaluation.metrics import (EvaluationError, auc_binary, auc_ovr_macro,
                                             balanced_accuracy, bootstrap_ci, bootstrap_suite,
                                             confusion_matrix, metric_suite, paired_auc_delta,
                                             ppv_worsening, predict_labels, resample_indices,
                                             sensitivity_worsening)


def pair_auc(pos, scores):
    """Count positive-negative pairs directly; ties count one half."""
    sp, sn = scores[pos], scores[~pos]
    wins = (sp[:, None] > sn[None, :]).sum() + 0.5 * (sp[:, None] == sn[None, :]).sum()
    return wins / (len(sp) * len(sn))


def random_case(seed, n=60):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 3, n)
    y[:3] = [0, 1, 2]
    raw = rng.random((n, 3)) + 0.6 * np.eye(3)[y]
    # coarse rounding plants ties in the scores
    proba = np.round(raw / raw.sum(axis=1, keepdims=True), 2)
    return y, proba


@pytest.mark.parametrize("seed", range(6))
def test_auc_matches_pair_count(seed):
    y, proba = random_case(seed)
    want = np.mean([pair_auc(y == c, proba[:, c]) for c in range(3)])
    assert auc_ovr_macro(y, proba) == pytest.approx(want, abs=1e-12)


def test_constant_scores_auc_half():
    y = np.array([0, 1, 2, 1, 0, 2])
    assert auc_ovr_macro(y, np.full((6, 3), 1 / 3)) == 0.5


@settings(max_examples=40)
@given(st.integers(0, 10_000))
def test_auc_monotone_invariance(seed):
    y, proba = random_case(seed, 40)
    warped = np.exp(3 * proba) - 7.0
    assert auc_ovr_macro(y, warped) == pytest.approx(auc_ovr_macro(y, proba), abs=1e-12)


def test_auc_absent_class_warns():
    y = np.array([0, 1, 0, 1])
    with pytest.warns(RuntimeWarning):
        v = auc_ovr_macro(y, np.eye(3)[[0, 1, 0, 1]])
    assert v == 1.0
    assert np.isnan(auc_binary(np.ones(4, bool), np.arange(4)))


def test_label_metrics_by_hand():
    y = np.array([0, 0, 1, 1, 1, 2, 2, 2])
    p = np.array([0, 1, 1, 1, 2, 2, 2, 0])
    cm = confusion_matrix(y, p)
    assert cm.tolist() == [[1, 1, 0], [0, 2, 1], [1, 0, 2]]
    assert balanced_accuracy(y, p) == pytest.approx((1 / 2 + 2 / 3 + 2 / 3) / 3)
    assert sensitivity_worsening(y, p) == pytest.approx(2 / 3)
    assert ppv_worsening(y, p) == pytest.approx(2 / 3)
    assert np.isnan(ppv_worsening(y, np.ones(8, int)))


def test_predict_labels_threshold():
    proba = np.array([[0.5, 0.2, 0.3], [0.2, 0.5, 0.3], [0.1, 0.2, 0.7]])
    assert predict_labels(proba).tolist() == [0, 1, 2]
    assert predict_labels(proba, 0.3).tolist() == [2, 2, 2]
    assert predict_labels(proba, 0.8).tolist() == [0, 1, 1]


def test_length_mismatch():
    with pytest.raises(EvaluationError):
        confusion_matrix([0, 1], [0])


def test_resample_scheme():
    idx = resample_indices(30, 5, seed=11)
    assert np.array_equal(idx, np.random.default_rng(11).integers(0, 30, size=(5, 30)))


def test_bootstrap_percentile_oracle():
    y, proba = random_case(3, n=30)
    pred = proba.argmax(axis=1)
    res = bootstrap_suite(y, proba, n_resamples=200, seed=5)
    idx = np.random.default_rng(5).integers(0, 30, size=(200, 30))
    vals = {k: [] for k in res}
    for i in idx:
        if len(np.unique(y[i])) < 3:
            continue
        m = metric_suite(y[i], proba[i], pred[i])
        for k in vals:
            vals[k].append(m[k])
    for k, r in res.items():
        v = np.array(vals[k])
        v = v[np.isfinite(v)]
        lo, hi = np.percentile(v, [2.5, 97.5])
        assert r.ci_low == pytest.approx(lo, abs=1e-12) and r.ci_high == pytest.approx(hi, abs=1e-12)
        assert r.point == pytest.approx(metric_suite(y, proba)[k])


def test_constant_metric_interval_collapses():
    y = np.array([0, 1, 2] * 10)
    proba = np.eye(3)[y]
    res = bootstrap_suite(y, proba, n_resamples=100)
    for r in res.values():
        assert r.ci_low == r.point == r.ci_high == 1.0


def test_generic_bootstrap_ci_matches_suite():
    y, proba = random_case(8, n=40)
    suite = bootstrap_suite(y, proba, n_resamples=150, seed=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        one = bootstrap_ci(lambda a, b: auc_ovr_macro(a, b), y, proba, 150, 2)
    assert (one.ci_low, one.ci_high) == pytest.approx((suite["auc"].ci_low, suite["auc"].ci_high))


def test_degenerate_majority_raises():
    # two singleton classes: about 60% of resamples lose at least one
    y = np.array([0] * 40 + [1, 2])
    proba = np.full((42, 3), 1 / 3)
    with pytest.raises(EvaluationError, match="miss a class"):
        bootstrap_suite(y, proba, n_resamples=100)


def test_paired_delta_identical_and_dominant():
    y, proba = random_case(1)
    same = paired_auc_delta(y, proba, proba, n_resamples=200)
    assert same.delta == 0 and same.p_value == 1.0
    best = paired_auc_delta(y, np.full_like(proba, 1 / 3), np.eye(3)[y], n_resamples=200)
    assert best.delta == pytest.approx(0.5) and best.p_value == 0.0
    assert best.ci_low <= best.delta <= best.ci_high
