import numpy as np
import pytest

from psvm.core import Dataset
from psvm.slsvm import train
from psvm.synth import SynthSpec, gen_controllable_data, gen_jcc_data, hct_frame, jcc_frame


def test_sizes_and_determinism():
    spec = SynthSpec(L=3, D=4, n_pos=31, n_neg=17, seed=5)
    d, planted = gen_jcc_data(spec)
    assert np.sum(d.y == 1) == 31 and np.sum(d.y == -1) == 17
    assert set(planted[d.y == 1]) == {0, 1, 2}
    d2, planted2 = gen_jcc_data(spec)
    assert d.X.tobytes() == d2.X.tobytes() and planted.tobytes() == planted2.tobytes()


def test_spec_validation():
    with pytest.raises(ValueError):
        SynthSpec(L=0)
    with pytest.raises(ValueError):
        SynthSpec(L=3, D=2)
    with pytest.raises(ValueError):
        SynthSpec(separation=0)
    means = SynthSpec(L=2, D=2).cluster_means()
    np.testing.assert_array_equal(means, [[4, 0], [0, 4]])


def test_each_planted_cluster_is_separable():
    d, planted = gen_jcc_data(SynthSpec(seed=1))
    for l in range(2):
        rows = (planted == l) | (planted == -1)
        m = train(Dataset(d.X[rows], d.y[rows]), 1000.0, 100.0)
        margins = d.y[rows] * m.decision_function(d.X[rows])
        assert np.all(margins > 0)


def test_controllable_generator():
    beta = np.array([1.5, -1.0, 0.5])
    d = gen_controllable_data(3, 400, beta, 0, seed=2, beta0=-0.5)
    np.testing.assert_array_equal(d.y, np.where(d.X @ beta - 0.5 > 0, 1, -1))
    np.testing.assert_array_equal(d.controllable, [0])
    assert d.meta[0].raw_lower == 0.0 and d.meta[0].raw_upper == 1.0
    flipped = d.X.copy()
    flipped[:, 0] = 0.0
    assert np.all(flipped @ beta - 0.5 <= d.X @ beta - 0.5)
    with pytest.raises(ValueError):
        gen_controllable_data(3, 10, np.array([0.0, 1.0, 1.0]), 0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_slsvm_recovers_direction(seed):
    beta = np.array([2.0, -1.0, 0.5, 0.0])
    d = gen_controllable_data(4, 2000, beta, 0, seed=seed, beta0=-0.7, noise=0.05)
    m = train(d, 1.0, 20.0)
    cos = m.beta @ beta / (np.linalg.norm(m.beta) * np.linalg.norm(beta))
    assert cos >= 0.9


def test_frames():
    df, schema = jcc_frame(SynthSpec(seed=3))
    assert list(df.columns) == ["x0", "x1", "label", "planted_cluster"]
    assert schema["columns"]["planted_cluster"]["kind"] == "ignore"
    df, schema = hct_frame(n=2000, seed=1)
    assert df["HCT"].between(25, 50).all()
    assert abs(df["readmit"].mean() - 0.1) < 0.01
    assert schema["columns"]["HCT"]["controllable"] and schema["passthrough"] == ["sex"]
