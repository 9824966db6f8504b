import numpy as np
import pytest

from psvm.core import Dataset, FeatureMeta, LinearModel, ScalingParams
from psvm.jcc import JccModel
from psvm.prescribe import (PrescriptionConfig, apply_prescriptions, apply_treatment, baseline_bags,
                            batch_prescribe, discretize_transfusion, prescribe,
                            prescription_objective)


def _cfg(lam, lo, hi, p=2, ctrl=(0,)):
    return PrescriptionConfig(lam, ctrl, np.atleast_1d(np.asarray(lo, float)),
                              np.atleast_1d(np.asarray(hi, float)), p)


def test_already_negative_is_identity():
    m = LinearModel(np.array([1.0]), -5.0)
    pr = prescribe(m, np.array([2.0]), _cfg(100, -3, 3))
    assert pr.y[0] == 2.0 and pr.xi == 0 and pr.change_cost == 0 and pr.flipped


def test_config_errors():
    with pytest.raises(ValueError):
        _cfg(1.0, 2, 1)
    with pytest.raises(ValueError):
        _cfg(-1.0, 0, 1)
    with pytest.raises(ValueError):
        _cfg(1.0, 0, 1, p=3)
    with pytest.raises(ValueError):
        prescribe(LinearModel(np.array([1.0]), 0.0), np.array([5.0]), _cfg(1, 0, 1))


@pytest.mark.parametrize("lam", [0.1, 0.5, 1.0, 3.0, 6.0, 10.0, 100.0])
def test_one_feature_closed_form(lam):
    # g(y) = lam * max(0, 1 + y) + (y - 2)^2 on [-3, 3]
    pr = prescribe(LinearModel(np.array([1.0]), 0.0), np.array([2.0]), _cfg(lam, -3, 3))
    expected = max(2.0 - lam / 2.0, -1.0)
    assert pr.y[0] == pytest.approx(expected, abs=1e-6)


def test_lambda_monotonicity_and_no_worse_than_doing_nothing():
    rng = np.random.default_rng(0)
    for _ in range(100):
        D = 3
        m = LinearModel(rng.normal(size=D), rng.normal())
        x = rng.uniform(size=D)
        ctrl = (0, 2)
        lo, hi = x[list(ctrl)] - 1, x[list(ctrl)] + 1
        p = int(rng.choice([1, 2]))
        xis = []
        for lam in (0.1, 1.0, 5.0, 50.0):
            pr = prescribe(m, x, PrescriptionConfig(lam, ctrl, lo, hi, p))
            assert prescription_objective(pr, lam) <= lam * max(0, 1 + m.beta0 + m.beta @ x) + 1e-12
            assert pr.xi == pytest.approx(max(0.0, 1 + m.beta0 + m.beta @ pr.y), abs=1e-9)
            xis.append(pr.xi)
        assert all(b <= a + 1e-6 for a, b in zip(xis, xis[1:]))


def test_p1_moves_most_effective_feature_first():
    m = LinearModel(np.array([1.0, 3.0]), 0.0)
    pr = prescribe(m, np.array([1.0, 1.0]), PrescriptionConfig(10.0, (0, 1), np.full(2, -5.0), np.full(2, 5.0), 1))
    assert pr.y[0] == 1.0
    assert pr.y[1] == pytest.approx(1.0 - 5.0 / 3.0)
    assert pr.flipped


def test_lambda_zero_is_identity():
    m = LinearModel(np.array([1.0, 1.0]), 1.0)
    pr = prescribe(m, np.array([0.5, 0.5]), PrescriptionConfig(0.0, (0, 1), np.zeros(2), np.ones(2)))
    np.testing.assert_array_equal(pr.y, [0.5, 0.5])
    assert pr.change_cost == 0


def _data():
    X = np.array([[0.9, 0.2], [0.1, 0.5], [0.8, 0.9], [0.3, 0.1]])
    meta = (FeatureMeta("a", controllable=True), FeatureMeta("b"))
    return Dataset(X, np.array([1, -1, 1, -1]), meta)


def test_batch_prescribe_linear():
    data = _data()
    m = LinearModel(np.array([2.0, 0.0]), -1.0, threshold=0.0)
    cfg = PrescriptionConfig(50.0, (0,), np.zeros((4, 1)), np.ones((4, 1)))
    out = batch_prescribe(m, data, cfg)
    assert [p.patient_index for p in out] == [0, 2]
    assert batch_prescribe(m, data, cfg, tau=100.0) == []
    X_after = apply_prescriptions(data.X, out)
    assert np.mean(m.decision_function(X_after) >= 0) < np.mean(m.decision_function(data.X) >= 0)
    np.testing.assert_array_equal(X_after[[1, 3]], data.X[[1, 3]])


def test_batch_prescribe_jcc_uses_max_cluster():
    data = _data()
    jm = JccModel([LinearModel(np.array([2.0, 0.0]), -1.0), LinearModel(np.array([0.0, 3.0]), -2.0)],
                  np.zeros(0, dtype=int), 1.0, [5, 5], threshold=0.0)
    out = batch_prescribe(jm, data, PrescriptionConfig(50.0, (0,), np.zeros(1), np.ones(1)))
    assert [(p.patient_index, p.cluster) for p in out] == [(0, 0), (2, 1)]


@pytest.mark.parametrize("sex,hct,bags", [("female", 36, 0), ("male", 45, 2), ("female", 44, 3),
                                          ("F", 38.5, 1), ("m", 46.9, 2)])
def test_baseline_bags(sex, hct, bags):
    assert baseline_bags(sex, hct) == bags


def test_treatment_errors():
    with pytest.raises(ValueError):
        baseline_bags("female", 0)
    with pytest.raises(ValueError):
        baseline_bags("other", 40)
    with pytest.raises(ValueError):
        discretize_transfusion(3.0, 4)
    with pytest.raises(ValueError):
        apply_treatment(np.zeros(2), 0, 1, None)
    with pytest.raises(ValueError):
        apply_treatment(np.zeros(2), "HCT", 1, ScalingParams(["x"], [0.0], [1.0]))


def test_round_half_away():
    assert discretize_transfusion(1.5, 0) == 1    # 0.5 rounds up
    assert discretize_transfusion(7.5, 0) == 3    # 2.5 rounds up


def test_apply_treatment():
    s = ScalingParams(["lab", "HCT"], [0.0, 20.0], [1.0, 40.0])
    x = np.array([0.3, 0.4])
    out = apply_treatment(x, "HCT", 2, s)
    assert out[1] == pytest.approx(0.55) and out[0] == 0.3
    np.testing.assert_array_equal(apply_treatment(x, 1, 0, s), x)
