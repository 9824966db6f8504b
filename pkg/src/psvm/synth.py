"""Synthetic data with planted structure.

All randomness comes from numpy's PCG64 generator (``default_rng(seed)``),
which produces identical streams on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .core import Dataset, FeatureMeta


@dataclass(frozen=True)
class SynthSpec:
    """Planted clusters: negatives around the origin, positive cluster ``l``
    around ``separation * noise_sigma * e_l``."""

    L: int = 2
    D: int = 2
    n_pos: int = 200
    n_neg: int = 200
    separation: float = 8.0
    noise_sigma: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if self.D < self.L:
            raise ValueError("D must be >= L so cluster means sit on distinct axes")
        if self.n_pos < self.L or self.n_neg < 1:
            raise ValueError("need at least L positives and one negative")
        if not (self.separation > 0 and self.noise_sigma > 0):
            raise ValueError("separation and noise_sigma must be positive")

    def cluster_means(self) -> np.ndarray:
        return self.separation * self.noise_sigma * np.eye(self.L, self.D)


def gen_jcc_data(spec: SynthSpec):
    """Return ``(dataset, planted)`` where ``planted[i]`` is the cluster of
    row ``i`` (``-1`` for negatives). Rows are shuffled."""
    rng = np.random.default_rng(spec.seed)
    sizes = np.full(spec.L, spec.n_pos // spec.L)
    sizes[: spec.n_pos % spec.L] += 1
    means = spec.cluster_means()
    parts, planted = [], []
    for l, size in enumerate(sizes):
        parts.append(means[l] + spec.noise_sigma * rng.standard_normal((size, spec.D)))
        planted.append(np.full(size, l))
    parts.append(spec.noise_sigma * rng.standard_normal((spec.n_neg, spec.D)))
    planted.append(np.full(spec.n_neg, -1))
    X = np.vstack(parts)
    planted = np.concatenate(planted)
    perm = rng.permutation(len(X))
    X, planted = X[perm], planted[perm]
    y = np.where(planted >= 0, 1, -1)
    meta = tuple(FeatureMeta(f"x{d}") for d in range(spec.D))
    return Dataset(X, y, meta), planted


def gen_controllable_data(D: int, n: int, true_beta, controllable_index: int, seed: int = 0,
                          beta0: float = 0.0, noise: float = 0.0) -> Dataset:
    """Uniform [0, 1] features labelled by a known hyperplane.

    ``y = +1`` iff ``true_beta'x + beta0 + noise * N(0, 1) > 0``. The
    controllable feature is flagged with bounds [0, 1].
    """
    true_beta = np.asarray(true_beta, dtype=float)
    if true_beta.shape != (D,):
        raise ValueError("true_beta must have D entries")
    if true_beta[controllable_index] == 0:
        raise ValueError("the controllable feature must carry weight in true_beta")
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(n, D))
    s = X @ true_beta + beta0 + noise * rng.standard_normal(n)
    y = np.where(s > 0, 1, -1)
    meta = tuple(
        FeatureMeta(f"x{d}", "continuous", controllable=(d == controllable_index),
                    raw_lower=0.0 if d == controllable_index else None,
                    raw_upper=1.0 if d == controllable_index else None)
        for d in range(D))
    return Dataset(X, y, meta)


# presets written by ``psvm gen``: raw CSV plus a schema preprocess understands

def jcc_frame(spec: SynthSpec):
    data, planted = gen_jcc_data(spec)
    df = pd.DataFrame(data.X, columns=data.feature_names)
    df["label"] = data.y
    df["planted_cluster"] = planted
    schema = {
        "format_version": 1,
        "label": "label",
        "label_encoding": "pm1",
        "planted_cluster": "planted_cluster",
        "columns": {**{name: {"kind": "continuous"} for name in data.feature_names},
                    "planted_cluster": {"kind": "ignore"}},
    }
    return df, schema


def hct_frame(n: int = 5000, D: int = 6, seed: int = 0, noise: float = 0.05,
              positive_rate: float = 0.1):
    """Readmission-like table: raw hematocrit (%) is controllable, ``sex``
    is categorical, outcome 1 = readmitted.

    Low hematocrit raises risk; the intercept is set so roughly
    ``positive_rate`` of the rows are positive.
    """
    rng = np.random.default_rng(seed)
    U = rng.uniform(0.0, 1.0, size=(n, D))
    beta = np.linspace(1.0, 0.25, D)
    beta[0] = -3.0  # hematocrit column
    s = U @ beta + noise * rng.standard_normal(n)
    beta0 = -np.quantile(s, 1.0 - positive_rate)
    readmit = (s + beta0 > 0).astype(int)
    df = pd.DataFrame({"HCT": np.round(25.0 + 25.0 * U[:, 0], 1)})
    for d in range(1, D):
        df[f"lab{d}"] = U[:, d]
    df["sex"] = np.where(rng.uniform(size=n) < 0.5, "female", "male")
    df["readmit"] = readmit
    schema = {
        "format_version": 1,
        "label": "readmit",
        "label_encoding": "01",
        "passthrough": ["sex"],
        "columns": {
            "HCT": {"kind": "continuous", "controllable": True, "lower": 20.0, "upper": 60.0},
            **{f"lab{d}": {"kind": "continuous"} for d in range(1, D)},
            "sex": {"kind": "categorical"},
        },
    }
    return df, schema
