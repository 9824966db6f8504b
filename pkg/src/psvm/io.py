"""File formats: CSV data, JSON schemas, pipeline metadata and model files.

Every JSON document carries ``format_version``. A *schema* describes a raw
table::

    {"format_version": 1,
     "label": "readmit",
     "label_encoding": "01",          # or "pm1"; "01" maps positive_value -> +1
     "positive_value": 1,
     "row_filter": "died30 == 0",     # optional pandas query
     "planted_cluster": "cluster",    # optional ground truth column
     "passthrough": ["sex"],          # optional raw columns kept in outputs
     "columns": {"HCT": {"kind": "continuous", "controllable": true,
                         "lower": 20, "upper": 60},
                 "sex": {"kind": "categorical"},
                 "id":  {"kind": "ignore"}}}

A *pipeline* file (written by ``psvm preprocess``) holds the schema plus the
fitted :class:`~psvm.preprocess.Preprocessor`.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pandas as pd

from .core import Dataset, LinearModel, ScalingParams, to_pm1
from .jcc import JccModel
from .preprocess import Preprocessor, feature_meta_for

FORMAT_VERSION = 1
SCHEMA_KINDS = ("binary", "integer", "continuous", "categorical", "ignore")
ALGORITHMS = ("slsvm", "jcc", "l2lr")


class ConfigError(ValueError):
    """Invalid configuration or usage (CLI exit code 2)."""


class DataError(ValueError):
    """Data that cannot be processed (CLI exit code 3)."""


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def validate_schema(schema: dict) -> dict:
    if schema.get("format_version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported schema format_version {schema.get('format_version')!r}")
    if "label" not in schema or "columns" not in schema:
        raise ConfigError("schema needs 'label' and 'columns'")
    if schema.get("label_encoding", "pm1") not in ("pm1", "01"):
        raise ConfigError("label_encoding must be 'pm1' or '01'")
    for name, spec in schema["columns"].items():
        kind = spec.get("kind", "continuous")
        if kind not in SCHEMA_KINDS:
            raise ConfigError(f"column {name!r}: unknown kind {kind!r}")
        if spec.get("controllable") and kind not in ("continuous", "integer"):
            raise ConfigError(f"column {name!r}: only continuous/integer columns can be controllable")
    return schema


def load_schema(path) -> dict:
    """Load a schema or a pipeline file (whose schema is returned with the
    fitted preprocessor under ``"pipeline"``)."""
    doc = read_json(path)
    if doc.get("kind") == "pipeline":
        schema = validate_schema(doc["schema"])
        return {**schema, "pipeline": doc}
    return validate_schema(doc)


def feature_columns(schema: dict) -> list:
    return [c for c, spec in schema["columns"].items()
            if spec.get("kind", "continuous") != "ignore" and c != schema["label"]]


def encode_labels(series: pd.Series, schema: dict) -> np.ndarray:
    if series.isna().any():
        raise DataError("label column has missing values")
    if schema.get("label_encoding", "pm1") == "01":
        values = set(series.unique().tolist())
        if not values <= {0, 1}:
            raise DataError(f"label column is not 0/1: {sorted(values)}")
        return to_pm1(series.to_numpy(), schema.get("positive_value", 1))
    y = series.to_numpy()
    if not np.all((y == 1) | (y == -1)):
        raise DataError("label column must hold -1/+1 (declare label_encoding '01' for 0/1)")
    return y.astype(int)


def read_table(path, schema: dict | None = None) -> pd.DataFrame:
    df = pd.read_csv(path, float_precision="round_trip")
    if schema and schema.get("row_filter") and "pipeline" not in schema:
        df = df.query(schema["row_filter"]).reset_index(drop=True)
    return df


def write_table(df: pd.DataFrame, path) -> None:
    df.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def pipeline_document(schema: dict, pre: Preprocessor, split_info: dict | None = None) -> dict:
    schema = {k: v for k, v in schema.items() if k != "pipeline"}
    names = list(pre.scaling_.names)
    metas = feature_meta_for(names, schema["columns"])
    return {
        "format_version": FORMAT_VERSION,
        "kind": "pipeline",
        "schema": schema,
        "features": [{"name": m.name, "kind": m.kind, "controllable": m.controllable,
                      "raw_lower": m.raw_lower, "raw_upper": m.raw_upper} for m in metas],
        "preprocessor": pre.to_dict(),
        "split": split_info,
    }


def processed_frame(raw: pd.DataFrame, schema: dict, pre: Preprocessor) -> pd.DataFrame:
    """Scaled features plus the +-1 label and any passthrough columns."""
    out = pre.transform(raw[feature_columns(schema)])
    return _attach_extras(out, raw, schema)


def _attach_extras(features: pd.DataFrame, raw: pd.DataFrame, schema: dict) -> pd.DataFrame:
    out = features.copy()
    out[schema["label"]] = encode_labels(raw[schema["label"]], schema)
    extras = list(schema.get("passthrough", []))
    if schema.get("planted_cluster"):
        extras.append(schema["planted_cluster"])
    for col in extras:
        if col in raw.columns and col not in out.columns:
            out[col] = raw[col].to_numpy()
    return out


def dataset_from_frame(df: pd.DataFrame, schema: dict) -> Dataset:
    """Build a Dataset from a processed table (pipeline schema) or from a raw
    all-numeric table (plain schema, no scaling)."""
    label = schema["label"]
    if label not in df.columns:
        raise DataError(f"label column {label!r} missing from data")
    if "pipeline" in schema:
        doc = schema["pipeline"]
        metas = feature_meta_for([f["name"] for f in doc["features"]], schema["columns"])
        names = [m.name for m in metas]
        missing = [n for n in names if n not in df.columns]
        if missing:
            raise DataError(f"data lacks processed feature columns {missing[:5]}")
        y = df[label].to_numpy()
        if not np.all((y == 1) | (y == -1)):
            raise DataError("processed label column must hold -1/+1")
        scaling = ScalingParams.from_dict(doc["preprocessor"]["scaling"])
        return Dataset(df[names].to_numpy(dtype=float), y.astype(int), metas, scaling)
    names = feature_columns(schema)
    cats = [c for c in names if schema["columns"][c].get("kind") == "categorical"]
    if cats:
        raise ConfigError(f"categorical columns {cats} need 'psvm preprocess' first")
    X = df[names].to_numpy(dtype=float)
    if np.isnan(X).any():
        raise DataError("missing feature values; run 'psvm preprocess' first")
    metas = feature_meta_for(names, schema["columns"])
    return Dataset(X, encode_labels(df[label], schema), metas)


def load_dataset(data_path, schema_path):
    """Return ``(dataset, frame, schema)``."""
    schema = load_schema(schema_path)
    df = read_table(data_path, schema)
    return dataset_from_frame(df, schema), df, schema


# ---------------------------------------------------------------- model files

def _num(v):
    return None if v is None or (isinstance(v, float) and math.isinf(v)) else float(v)


def _plane(m: LinearModel, names) -> dict:
    return {"beta": {n: float(b) for n, b in zip(names, m.beta) if b != 0.0},
            "beta0": float(m.beta0), "T": _num(m.T)}


def model_document(model, algorithm: str, feature_names, **extra) -> dict:
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algorithm!r}")
    planes = model.models if isinstance(model, JccModel) else [model]
    doc = {
        "format_version": FORMAT_VERSION,
        "algorithm": algorithm,
        "feature_names": list(feature_names),
        "clusters": [_plane(m, feature_names) for m in planes],
        "threshold": None if model.threshold is None else float(model.threshold),
    }
    if isinstance(model, JccModel):
        doc.update(lambda_neg=model.lambda_neg, lambda_pos=model.lambda_pos,
                   objective_history=list(model.history))
    elif algorithm == "l2lr":
        doc.update(reg=float(model.C), objective=_num(model.objective))
    else:
        doc.update(C=float(model.C), objective=_num(model.objective))
    doc.update({k: v for k, v in extra.items() if v is not None})
    return doc


def save_model(model, path, algorithm: str, feature_names, **extra) -> dict:
    doc = model_document(model, algorithm, feature_names, **extra)
    write_json(doc, path)
    return doc


def model_from_document(doc: dict):
    if doc.get("format_version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported model format_version {doc.get('format_version')!r}")
    names = doc["feature_names"]
    idx = {n: i for i, n in enumerate(names)}

    def plane(c, C):
        beta = np.zeros(len(names))
        for n, v in c["beta"].items():
            beta[idx[n]] = v
        T = math.inf if c.get("T") is None else c["T"]
        return LinearModel(beta, c["beta0"], C=C, T=T, threshold=doc.get("threshold"),
                           feature_names=list(names))

    algo = doc["algorithm"]
    if algo == "jcc":
        planes = [plane(c, doc["lambda_neg"]) for c in doc["clusters"]]
        return JccModel(models=planes, assignment=np.zeros(0, dtype=int),
                        lambda_neg=doc["lambda_neg"], budgets=[p.T for p in planes],
                        lambda_pos=doc.get("lambda_pos"), threshold=doc.get("threshold"),
                        history=doc.get("objective_history", []))
    if algo not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algo!r}")
    m = plane(doc["clusters"][0], doc.get("C", doc.get("reg", 1.0)))
    m.objective = doc.get("objective")
    return m


def load_model(path):
    """Return ``(model, document)``."""
    doc = read_json(path)
    return model_from_document(doc), doc
