"""Tabular preprocessing: one-hot encoding, kNN imputation, variance and
correlation filters, min-max scaling, and the train/validation/test split.

The steps run in that fixed order. :class:`Preprocessor` fits them on one
table (normally the training split) and replays them on others; its
:meth:`~Preprocessor.to_dict` output is enough to replay the transform
exactly.
"""

from __future__ import annotations

import logging
import math

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import Dataset, FeatureMeta, ScalingParams

log = logging.getLogger(__name__)

MISSING = "MISSING"


def _category_label(v) -> str:
    if isinstance(v, float) and v.is_integer():
        v = int(v)
    return str(v)


def one_hot(table: pd.DataFrame, categorical_columns, categories: dict | None = None):
    """Replace each categorical column by one indicator column per category.

    Missing values form their own ``MISSING`` category. With ``categories``
    given (column -> list of labels) the encoding is replayed: unseen values
    get all-zero indicators. Returns ``(table, categories)``.
    """
    missing = [c for c in categorical_columns if c not in table.columns]
    if missing:
        raise KeyError(f"categorical columns not in table: {missing}")
    fitted = {} if categories is None else dict(categories)
    pieces = []
    for col in table.columns:
        if col not in categorical_columns:
            pieces.append(table[[col]])
            continue
        labels = table[col].map(lambda v: MISSING if pd.isna(v) else _category_label(v))
        if categories is None:
            fitted[col] = sorted(set(labels) - {MISSING}) + ([MISSING] if (labels == MISSING).any() else [])
        block = pd.DataFrame({f"{col}={cat}": (labels == cat).astype(float) for cat in fitted[col]},
                             index=table.index)
        pieces.append(block)
    out = pd.concat(pieces, axis=1) if pieces else table.copy()
    return out, fitted


def _knn_fill(values: np.ndarray, donors: np.ndarray, k: int) -> np.ndarray:
    out = values.copy()
    observed_donors = ~np.isnan(donors)
    donors0 = np.where(observed_donors, donors, 0.0)
    for r in np.flatnonzero(np.isnan(values).any(axis=1)):
        row = values[r]
        obs = ~np.isnan(row)
        if not obs.any():
            raise ValueError(f"row {r} has no observed numeric values to impute from")
        both = observed_donors & obs
        diff = np.where(both, donors0 - np.where(obs, row, 0.0), 0.0)
        dist = np.where(both.any(axis=1), np.sqrt(np.sum(diff * diff, axis=1)), np.inf)
        for j in np.flatnonzero(~obs):
            cand = np.flatnonzero(observed_donors[:, j])
            if cand.size == 0:
                raise ValueError(f"no donor observes column {j}")
            order = cand[np.argsort(dist[cand], kind="stable")][:k]
            out[r, j] = donors[order, j].mean()
    return out


def impute_knn(table: pd.DataFrame, k: int = 5, donors: pd.DataFrame | None = None) -> pd.DataFrame:
    """Fill each missing cell with the mean of that column over the ``k``
    nearest donor rows.

    Distances are Euclidean over the columns observed in both rows; ties go
    to the lower donor index. Donors default to ``table`` itself.
    """
    if k < 1:
        raise ValueError("k must be positive")
    values = table.to_numpy(dtype=float)
    if not np.isnan(values).any():
        return table.copy()
    donor_values = values if donors is None else donors[table.columns].to_numpy(dtype=float)
    return pd.DataFrame(_knn_fill(values, donor_values, k), columns=table.columns, index=table.index)


def drop_low_variance(table: pd.DataFrame, threshold: float = 0.005):
    """Drop columns whose sample standard deviation is below ``threshold``."""
    std = table.std(axis=0, ddof=1).fillna(0.0)
    removed = [c for c in table.columns if std[c] < threshold]
    return table.drop(columns=removed), removed


def drop_correlated(table: pd.DataFrame, threshold: float = 0.8):
    """Scan column pairs in order; whenever ``|corr| > threshold`` drop the
    later column. Dropped columns take no further part."""
    values = table.to_numpy(dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(values, rowvar=False) if values.shape[1] > 1 else np.ones((1, 1))
    corr = np.atleast_2d(corr)
    keep = np.ones(values.shape[1], dtype=bool)
    for i in range(values.shape[1]):
        if not keep[i]:
            continue
        for j in range(i + 1, values.shape[1]):
            if keep[j] and abs(corr[i, j]) > threshold:
                keep[j] = False
    removed = [c for c, kp in zip(table.columns, keep) if not kp]
    return table.loc[:, keep], removed


def minmax_scale(table: pd.DataFrame, params: ScalingParams | None = None, clip: bool = False):
    """Map every column to ``(v - min) / (max - min)``; constant columns get
    range 1 and map to 0. Returns ``(table, params)``."""
    if params is None:
        values = table.to_numpy(dtype=float)
        mn = values.min(axis=0) if len(values) else np.zeros(values.shape[1])
        rg = (values.max(axis=0) - mn) if len(values) else np.ones(values.shape[1])
        rg = np.where(rg > 0, rg, 1.0)
        params = ScalingParams(list(table.columns), mn, rg)
    scaled = params.scale(table[list(params.names)].to_numpy(dtype=float))
    if clip:
        scaled = np.clip(scaled, 0.0, 1.0)
    return pd.DataFrame(scaled, columns=list(params.names), index=table.index), params


def split_indices(n: int, fractions=(0.6, 0.2, 0.2), seed: int = 0):
    """Random partition of ``range(n)``; the validation and test sizes are
    floored and the remainder goes to training."""
    if len(fractions) != 3 or not math.isclose(sum(fractions), 1.0) or min(fractions) < 0:
        raise ValueError("fractions must be three non-negative numbers summing to 1")
    perm = np.random.default_rng(seed).permutation(n)
    n_val = int(math.floor(fractions[1] * n))
    n_test = int(math.floor(fractions[2] * n))
    n_train = n - n_val - n_test
    return perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]


def split(data, fractions=(0.6, 0.2, 0.2), seed: int = 0):
    """Split a Dataset or DataFrame into (train, validation, test)."""
    n = data.n_samples if isinstance(data, Dataset) else len(data)
    parts = split_indices(n, fractions, seed)
    if isinstance(data, Dataset):
        return tuple(Dataset(data.X[p], data.y[p], data.meta, data.scaling) for p in parts)
    return tuple(data.iloc[p] for p in parts)


class Preprocessor(TransformerMixin, BaseEstimator):
    """Fitted encode -> impute -> filter -> scale pipeline on DataFrames.

    Parameters
    ----------
    categorical : list of str
        Columns to one-hot encode.
    k : int, default=5
        Neighbours for kNN imputation.
    std_threshold : float, default=0.005
    corr_threshold : float, default=0.8
    clip : bool, default=True
        Clip scaled values of non-training tables into [0, 1].
    """

    def __init__(self, categorical=(), k=5, std_threshold=0.005, corr_threshold=0.8, clip=True):
        self.categorical = categorical
        self.k = k
        self.std_threshold = std_threshold
        self.corr_threshold = corr_threshold
        self.clip = clip

    def fit(self, X: pd.DataFrame, y=None):
        self.fit_transform(X)
        return self

    def fit_transform(self, X: pd.DataFrame, y=None):
        self.feature_names_in_ = list(X.columns)
        encoded, self.categories_ = one_hot(X, list(self.categorical))
        self.donors_ = encoded.copy()
        imputed = impute_knn(encoded, self.k)
        filtered, self.dropped_low_variance_ = drop_low_variance(imputed, self.std_threshold)
        filtered, self.dropped_correlated_ = drop_correlated(filtered, self.corr_threshold)
        scaled, self.scaling_ = minmax_scale(filtered)
        log.info("preprocess: %d columns in, %d out (%d low-variance, %d correlated dropped)",
                 len(self.feature_names_in_), scaled.shape[1],
                 len(self.dropped_low_variance_), len(self.dropped_correlated_))
        return scaled

    def transform(self, X: pd.DataFrame):
        check_is_fitted(self, "scaling_")
        encoded, _ = one_hot(X[self.feature_names_in_], list(self.categorical), self.categories_)
        imputed = impute_knn(encoded, self.k, donors=self.donors_)
        scaled, _ = minmax_scale(imputed, self.scaling_, clip=self.clip)
        return scaled

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "scaling_")
        return np.array(self.scaling_.names, dtype=object)

    def to_dict(self) -> dict:
        check_is_fitted(self, "scaling_")
        donors = self.donors_.to_numpy(dtype=float)
        return {
            "params": {"categorical": list(self.categorical), "k": self.k,
                       "std_threshold": self.std_threshold,
                       "corr_threshold": self.corr_threshold, "clip": self.clip},
            "feature_names_in": self.feature_names_in_,
            "categories": self.categories_,
            "dropped_low_variance": self.dropped_low_variance_,
            "dropped_correlated": self.dropped_correlated_,
            "scaling": self.scaling_.to_dict(),
            "donors": {"columns": list(self.donors_.columns),
                       "values": [[None if np.isnan(v) else float(v) for v in row] for row in donors]},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Preprocessor":
        pre = cls(**d["params"])
        pre.feature_names_in_ = list(d["feature_names_in"])
        pre.categories_ = {k: list(v) for k, v in d["categories"].items()}
        pre.dropped_low_variance_ = list(d["dropped_low_variance"])
        pre.dropped_correlated_ = list(d["dropped_correlated"])
        pre.scaling_ = ScalingParams.from_dict(d["scaling"])
        vals = np.array([[np.nan if v is None else v for v in row] for row in d["donors"]["values"]],
                        dtype=float).reshape(-1, len(d["donors"]["columns"]))
        pre.donors_ = pd.DataFrame(vals, columns=d["donors"]["columns"])
        return pre


def feature_meta_for(names, schema_columns: dict) -> tuple:
    """FeatureMeta records for processed columns, looked up in a schema's
    ``columns`` block (one-hot columns become ``categorical-expanded``)."""
    metas = []
    for name in names:
        spec = schema_columns.get(name)
        if spec is None:
            metas.append(FeatureMeta(name, "categorical-expanded"))
            continue
        kind = spec.get("kind", "continuous")
        metas.append(FeatureMeta(name, kind, bool(spec.get("controllable", False)),
                                 spec.get("lower"), spec.get("upper")))
    return tuple(metas)
