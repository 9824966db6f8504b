import math

import numpy as np
import pytest
from scipy import stats

import oracles
from psvm.core import Dataset, LinearModel
from psvm.evaluation import (L2LogisticRegression, auc, auc_trapezoid, betainc, calibrate_threshold,
                             positive_rate, prescriptive_eval, rank_features, relative_reduction,
                             roc_curve, t_cdf, train_l2lr, welch_t)


def test_auc_examples():
    assert auc([3, 2, 1, 0], [1, 1, -1, -1]) == 1.0
    assert auc([1, 1, 1, 1], [1, -1, 1, -1]) == 0.5
    with pytest.raises(ValueError):
        auc([1, 2], [1, 1])


def test_auc_forms_agree_on_distinct_scores():
    rng = np.random.default_rng(0)
    for _ in range(50):
        s = rng.normal(size=40)
        y = np.where(rng.uniform(size=40) < 0.3, 1, -1)
        y[:2] = [1, -1]
        assert auc(s, y) == pytest.approx(auc_trapezoid(s, y), abs=1e-12)
        assert auc(s, y) + auc(-s, y) == pytest.approx(1.0, abs=1e-12)


def test_roc_curve_is_monotone():
    rng = np.random.default_rng(1)
    s = np.round(rng.normal(size=50), 1)
    y = np.where(rng.uniform(size=50) < 0.5, 1, -1)
    pts = roc_curve(s, y)
    assert math.isinf(pts[0].threshold) and (pts[0].tpr, pts[0].fpr) == (0, 0)
    assert (pts[-1].tpr, pts[-1].fpr) == (1, 1)
    th = [p.threshold for p in pts]
    assert th == sorted(th, reverse=True)
    assert all(a.tpr <= b.tpr and a.fpr <= b.fpr for a, b in zip(pts, pts[1:]))


def test_calibration_examples():
    s = np.arange(10)[::-1] / 10.0
    tau = calibrate_threshold(s, 0.2)
    assert tau == 0.8 and positive_rate(s, tau) == 0.2
    assert positive_rate(s, calibrate_threshold(s, 1 - 1e-9)) == 1.0
    assert positive_rate(np.ones(7), calibrate_threshold(np.ones(7), 0.3)) == 1.0
    with pytest.raises(ValueError):
        calibrate_threshold([], 0.5)


def test_welch_examples_and_symmetry():
    assert welch_t([1, 2, 3], [1, 2, 3]) == (0.0, 4.0, 1.0)
    t1, d1, p1 = welch_t([1, 2, 3, 4, 5], [3, 4, 5, 6, 7])
    t2, d2, p2 = welch_t([3, 4, 5, 6, 7], [1, 2, 3, 4, 5])
    assert t2 == -t1 and p1 == p2 and d1 == d2
    assert welch_t([1, 1], [2, 2])[2] == 0.0
    with pytest.raises(ValueError):
        welch_t([1], [2, 3])


def test_welch_matches_reference():
    rng = np.random.default_rng(2)
    for _ in range(30):
        a = rng.normal(size=int(rng.integers(2, 30)))
        b = rng.normal(0.5, 2, size=int(rng.integers(2, 30)))
        t, dof, p = welch_t(a, b)
        ref = stats.ttest_ind(a, b, equal_var=False)
        assert t == pytest.approx(ref.statistic, rel=1e-10)
        assert p == pytest.approx(ref.pvalue, rel=1e-8, abs=1e-14)
        assert p == pytest.approx(oracles.t_two_sided_p_quadrature(t, dof), abs=1e-8)


def test_incomplete_beta_and_cdf():
    from scipy import special
    for a, b, x in [(0.5, 0.5, 0.3), (4.0, 0.5, 0.9), (20, 3, 0.7), (1.0, 1.0, 0.25)]:
        assert betainc(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-12)
    assert t_cdf(0.0, 5) == 0.5
    assert t_cdf(1.3, 7) == pytest.approx(stats.t.cdf(1.3, 7), abs=1e-12)


def test_welch_null_uniformity():
    rng = np.random.default_rng(3)
    hits = sum(welch_t(rng.normal(size=20), rng.normal(size=25))[2] < 0.05 for _ in range(2000))
    assert abs(hits / 2000 - 0.05) <= 0.02


def test_rank_features():
    rng = np.random.default_rng(4)
    n = 500
    y = np.where(np.arange(n) < n // 2, 1, -1)
    X = rng.normal(size=(n, 4))
    X[:, 2] += 5.0 * (y == 1)
    ranking = rank_features(Dataset(X, y))
    assert len(ranking) == 4
    assert ranking[0][0] == "x2" and ranking[0][1] < 1e-6
    assert all(p > 1e-6 for _, p in ranking[1:])


def test_l2lr_examples():
    X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    y = np.array([-1, -1, 1, 1])
    m = train_l2lr(Dataset(X, y), 0.01)
    assert auc(m.decision_function(X), y) == 1.0
    rng = np.random.default_rng(5)
    X = rng.uniform(size=(100, 3))
    y = np.where(rng.uniform(size=100) < 0.5, 1, -1)
    assert np.linalg.norm(train_l2lr(Dataset(X, y), 1e6).beta) <= 1e-3


def test_l2lr_optimality_and_monotone_history():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(200, 5))
    y = np.where(X @ rng.normal(size=5) + rng.normal(size=200) > 0, 1, -1)
    est = L2LogisticRegression(reg=0.5).fit(X, y)
    assert est.converged_
    h = np.array(est.loss_history_)
    assert np.all(np.diff(h) <= 0)
    from psvm.evaluation.logistic import l2lr_grad
    w = np.append(est.coef_, est.intercept_)
    assert np.linalg.norm(l2lr_grad(w, X, y, 0.5)) <= 1e-5
    ref = train_l2lr(Dataset(X, y), 0.5)
    np.testing.assert_allclose(ref.beta, est.coef_)


def test_prescriptive_eval_and_reduction():
    m = LinearModel(np.array([1.0]), 0.0, threshold=0.5)
    X = np.array([[0.0], [1.0], [2.0], [0.7]])
    assert prescriptive_eval(m, X, X) == (0.75, 0.75)
    after = X.copy()
    after[1] = 0.0
    assert prescriptive_eval(m, X, after) == (0.75, 0.5)
    assert prescriptive_eval(m, X, after, tau=5.0) == (0.0, 0.0)
    assert relative_reduction(0.0585, 0.0418) == pytest.approx(0.2855, abs=1e-4)
    assert relative_reduction(0.0, 0.0) == 0.0
