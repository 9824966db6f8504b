"""Shared data model: feature metadata, datasets, linear models and the
elementary score / hinge functions every solver builds on."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

FEATURE_KINDS = ("binary", "integer", "continuous", "categorical-expanded")


@dataclass(frozen=True)
class FeatureMeta:
    name: str
    kind: str = "continuous"
    controllable: bool = False
    raw_lower: Optional[float] = None
    raw_upper: Optional[float] = None

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if self.controllable and self.kind not in ("continuous", "integer"):
            raise ValueError(
                f"feature {self.name!r}: only continuous/integer features "
                "can be controllable")
        if (self.raw_lower is not None and self.raw_upper is not None
                and self.raw_lower > self.raw_upper):
            raise ValueError(f"feature {self.name!r}: raw_lower > raw_upper")


@dataclass(frozen=True)
class ScalingParams:
    """Per-feature min/range of an invertible min-max map onto [0, 1]."""

    names: tuple
    minimum: np.ndarray
    range: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        mn = np.asarray(self.minimum, dtype=float)
        rg = np.asarray(self.range, dtype=float)
        if mn.shape != rg.shape or mn.shape != (len(self.names),):
            raise ValueError("names, minimum and range must have equal length")
        if np.any(rg <= 0):
            raise ValueError("range entries must be positive")
        object.__setattr__(self, "minimum", mn)
        object.__setattr__(self, "range", rg)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def scale(self, raw, columns=None):
        mn, rg = self._select(columns)
        return (np.asarray(raw, dtype=float) - mn) / rg

    def unscale(self, scaled, columns=None):
        mn, rg = self._select(columns)
        return np.asarray(scaled, dtype=float) * rg + mn

    def _select(self, columns):
        if columns is None:
            return self.minimum, self.range
        idx = [self.index(c) if isinstance(c, str) else int(c) for c in np.atleast_1d(columns)]
        if np.ndim(columns) == 0:
            idx = idx[0]
        return self.minimum[idx], self.range[idx]

    def to_dict(self) -> dict:
        return {"names": list(self.names), "min": self.minimum.tolist(),
                "range": self.range.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalingParams":
        return cls(d["names"], d["min"], d["range"])


@dataclass(frozen=True)
class Dataset:
    """Feature matrix ``X`` (n x D), labels ``y`` in {-1, +1} and metadata."""

    X: np.ndarray
    y: np.ndarray
    meta: tuple = ()
    scaling: Optional[ScalingParams] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise ValueError("X must be a 2-D array")
        y = np.asarray(self.y)
        if y.shape != (X.shape[0],):
            raise ValueError("y must have one label per row of X")
        if y.size and not np.all((y == 1) | (y == -1)):
            raise ValueError("labels must be exactly -1 or +1")
        meta = tuple(self.meta) or tuple(FeatureMeta(f"x{d}") for d in range(X.shape[1]))
        if len(meta) != X.shape[1]:
            raise ValueError("column count of X must equal the number of FeatureMeta records")
        if self.scaling is not None and X.size:
            if X.min() < -1e-9 or X.max() > 1 + 1e-9:
                raise ValueError("scaled features must lie in [0, 1]")
        X.setflags(write=False)
        y = y.astype(int)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "meta", meta)

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def feature_names(self) -> list:
        return [m.name for m in self.meta]

    @property
    def controllable(self) -> np.ndarray:
        """Indices of controllable features."""
        return np.array([d for d, m in enumerate(self.meta) if m.controllable], dtype=int)

    @property
    def positives(self) -> np.ndarray:
        return self.X[self.y == 1]

    @property
    def negatives(self) -> np.ndarray:
        return self.X[self.y == -1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.X[rows], self.y[rows], self.meta, None)

    def with_X(self, X) -> "Dataset":
        return Dataset(X, self.y, self.meta, None)


@dataclass
class LinearModel:
    """Separating hyperplane ``beta0 + beta'x`` with its training budget."""

    beta: np.ndarray
    beta0: float
    C: float = 1.0
    T: float = np.inf
    threshold: Optional[float] = None
    objective: Optional[float] = None
    feature_names: Optional[list] = field(default=None, repr=False)

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float).ravel()
        self.beta0 = float(self.beta0)

    @property
    def tau(self) -> float:
        return 0.0 if self.threshold is None else float(self.threshold)

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.beta.shape[0]:
            raise ValueError(
                f"expected {self.beta.shape[0]} features, got {X.shape[1]}")
        return X @ self.beta + self.beta0

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= self.tau, 1, -1)


def score(model: LinearModel, x: Sequence[float]) -> float:
    """Return ``beta0 + beta'x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != model.beta.shape:
        raise ValueError(
            f"dimension mismatch: model has {model.beta.shape[0]} features, x has shape {x.shape}")
    return float(model.beta0 + model.beta @ x)


def hinge(label, s):
    """``max(0, 1 - label * s)``; vectorised over arrays."""
    out = np.maximum(0.0, 1.0 - np.asarray(label) * np.asarray(s, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def check_labels(y) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError("y must be 1-D")
    if not np.all((y == 1) | (y == -1)):
        raise ValueError("labels must be -1 or +1; map {0, 1} labels explicitly with to_pm1")
    return y.astype(int)


def to_pm1(labels, positive=1) -> np.ndarray:
    """Map a binary label column to -1/+1, ``positive`` becoming +1."""
    labels = np.asarray(labels)
    values = set(np.unique(labels).tolist())
    if len(values) > 2:
        raise ValueError(f"label column is not binary: {sorted(values)}")
    return np.where(labels == positive, 1, -1)
