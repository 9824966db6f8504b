"""``psvm`` command line: gen | preprocess | train | prescribe | eval.

Exit codes: 0 on success, 2 for usage/configuration errors, 3 for data
errors. All randomness is driven by ``--seed``. Output paths default to the
directory named by ``$PSVM_OUTPUT_DIR`` (or the working directory).
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import io
from .core import Dataset
from .evaluation import (L2LogisticRegression, auc, calibrate_threshold, positive_rate,
                         rank_features, relative_reduction, roc_curve)
from .io import ConfigError, DataError
from .jcc import JccModel, train_jcc
from .preprocess import Preprocessor, split_indices
from .prescribe import (PrescriptionConfig, apply_prescriptions, apply_treatment,
                        baseline_bags, batch_prescribe, discretize_transfusion)
from .slsvm import SlsvmOptions, train
from .synth import SynthSpec, hct_frame, jcc_frame

log = logging.getLogger("psvm")

OUTPUT_ENV = "PSVM_OUTPUT_DIR"


def _out_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "."))


def _out_path(value, default_name) -> Path:
    if value:
        return Path(value)
    return _out_dir() / default_name


# ------------------------------------------------------------------------ gen

PRESETS = {
    "jcc2": dict(L=2, D=2, n_pos=200, n_neg=200, separation=8.0, noise_sigma=0.5),
    "hct": dict(n=5000, D=6, positive_rate=0.1, noise=0.05),
}


def cmd_gen(args) -> int:
    out = Path(args.output) if args.output else _out_dir()
    try:
        if args.preset == "hct":
            p = dict(PRESETS["hct"])
            for key in ("n", "D", "positive_rate"):
                if getattr(args, key) is not None:
                    p[key] = getattr(args, key)
            if p["n"] < 2 or p["D"] < 1 or not 0 < p["positive_rate"] < 1:
                raise ValueError("hct preset needs n >= 2, D >= 1 and 0 < positive_rate < 1")
            df, schema = hct_frame(n=p["n"], D=p["D"], seed=args.seed, noise=p["noise"],
                                   positive_rate=p["positive_rate"])
        else:
            p = dict(PRESETS["jcc2"])
            for key in ("L", "D", "n_pos", "n_neg", "separation", "noise_sigma"):
                if getattr(args, key) is not None:
                    p[key] = getattr(args, key)
            if args.L is not None and args.D is None:
                p["D"] = max(p["D"], args.L)
            df, schema = jcc_frame(SynthSpec(seed=args.seed, **p))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out.mkdir(parents=True, exist_ok=True)
    io.write_table(df, out / "data.csv")
    io.write_json(schema, out / "schema.json")
    print(f"wrote {out / 'data.csv'} ({len(df)} rows) and {out / 'schema.json'}")
    return 0


# ----------------------------------------------------------------- preprocess

def cmd_preprocess(args) -> int:
    schema = io.load_schema(args.schema)
    if "pipeline" in schema:
        raise ConfigError("preprocess needs a raw schema, not a pipeline file")
    raw = io.read_table(args.data, schema)
    missing = [c for c in io.feature_columns(schema) + [schema["label"]] if c not in raw.columns]
    if missing:
        raise DataError(f"columns declared in the schema are missing from the data: {missing}")
    categorical = [c for c in io.feature_columns(schema)
                   if schema["columns"][c].get("kind") == "categorical"]
    pre = Preprocessor(categorical=categorical, k=args.k)
    out = Path(args.output) if args.output else _out_dir()
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.no_split:
            parts = {"processed": np.arange(len(raw))}
        else:
            tr, va, te = split_indices(len(raw), tuple(args.fractions), args.seed)
            parts = {"train": tr, "validation": va, "test": te}
        first = next(iter(parts.values()))
        pre.fit(raw.iloc[first][io.feature_columns(schema)])
        for name, rows in parts.items():
            frame = io.processed_frame(raw.iloc[rows].reset_index(drop=True), schema, pre)
            io.write_table(frame, out / f"{name}.csv")
            print(f"wrote {out / (name + '.csv')} ({len(frame)} rows, {len(pre.scaling_.names)} features)")
    except ValueError as exc:
        if isinstance(exc, (ConfigError, DataError)):
            raise
        raise DataError(str(exc)) from exc
    split_info = None if args.no_split else {"seed": args.seed, "fractions": list(args.fractions)}
    io.write_json(io.pipeline_document(schema, pre, split_info), out / "pipeline.json")
    print(f"dropped (low variance): {pre.dropped_low_variance_}")
    print(f"dropped (correlated):   {pre.dropped_correlated_}")
    return 0


# ---------------------------------------------------------------------- train

def _purity(planted, found) -> float:
    from scipy.optimize import linear_sum_assignment

    planted = np.asarray(planted)
    found = np.asarray(found)
    ts, fs = np.unique(planted), np.unique(found)
    counts = np.array([[np.sum((planted == t) & (found == f)) for f in fs] for t in ts])
    rows, cols = linear_sum_assignment(-counts)
    return float(counts[rows, cols].sum() / len(planted))


def cmd_train(args) -> int:
    data, frame, schema = io.load_dataset(args.data, args.schema)
    both = (data.y == 1).any() and (data.y == -1).any()
    opts = SlsvmOptions(max_iters=args.max_iter, tol=args.tol, seed=args.seed)
    extra = {"scaling_ref": str(args.schema) if "pipeline" in schema else None,
             "seed": args.seed}
    if args.algo == "slsvm":
        model = train(data, args.C, args.T, opts)
        print(f"objective: {model.objective:.10g}")
        print(f"cluster 0: ||beta||_1 = {np.abs(model.beta).sum():.6g} (T = {args.T:g})")
    elif args.algo == "jcc":
        if not both:
            raise DataError("jcc needs both classes in the training data")
        try:
            model = train_jcc(data, args.L, args.lambda_neg, args.T, opts, args.max_rounds)
        except ValueError as exc:
            raise DataError(str(exc)) from exc
        print(f"objective: {model.history[-1]:.10g} after {model.n_rounds} rounds"
              f" ({'converged' if model.converged else 'round limit reached'})")
        for l, m in enumerate(model.models):
            size = int(np.sum(model.assignment == l))
            print(f"cluster {l}: ||beta||_1 = {np.abs(m.beta).sum():.6g} (T = {model.budgets[l]:g}),"
                  f" {size} positives")
        planted_col = schema.get("planted_cluster")
        if planted_col and planted_col in frame.columns:
            planted = frame[planted_col].to_numpy()[data.y == 1]
            print(f"purity: {_purity(planted, model.assignment):.4f}")
    else:
        if not both:
            raise DataError("l2lr needs both classes in the training data")
        est = L2LogisticRegression(reg=args.reg, max_iter=args.max_iter).fit(data.X, data.y)
        model = est.to_model(data.feature_names)
        print(f"objective: {model.objective:.10g}")
        if est.converged_:
            print(f"l2lr: gradient converged (norm <= {est.gtol:g}) after {est.n_iter_} iterations")
        else:
            print(f"l2lr: gradient NOT converged after {est.n_iter_} iterations")
    if args.calibrate_data:
        if args.target_rate is None:
            raise ConfigError("--calibrate-data needs --target-rate")
        cal, _, _ = io.load_dataset(args.calibrate_data, args.schema)
        model.threshold = calibrate_threshold(model.decision_function(cal.X), args.target_rate)
        extra["calibration"] = {"data": str(args.calibrate_data), "target_rate": args.target_rate}
        print(f"threshold: {model.threshold:.10g} (calibrated on {args.calibrate_data})")
    elif args.target_rate is not None:
        raise ConfigError("--target-rate needs --calibrate-data")
    hyper = {"slsvm": {"T": args.T}, "jcc": {"T": args.T, "L": args.L}, "l2lr": {}}[args.algo]
    out = _out_path(args.output, "model.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    io.save_model(model, out, args.algo, data.feature_names, hyperparameters=hyper, **extra)
    print(f"wrote {out}")
    return 0


# ------------------------------------------------------------------ prescribe

def _bounds(data: Dataset, ctrl, direction):
    n = data.n_samples
    lower = np.empty((n, len(ctrl)))
    upper = np.empty((n, len(ctrl)))
    for j, d in enumerate(ctrl):
        meta = data.meta[d]
        if data.scaling is not None:
            lo = 0.0 if meta.raw_lower is None else float(data.scaling.scale(meta.raw_lower, meta.name))
            hi = 1.0 if meta.raw_upper is None else float(data.scaling.scale(meta.raw_upper, meta.name))
        else:
            lo = data.X[:, d].min() if meta.raw_lower is None else meta.raw_lower
            hi = data.X[:, d].max() if meta.raw_upper is None else meta.raw_upper
        x = data.X[:, d]
        lower[:, j] = np.minimum(lo, x)
        upper[:, j] = np.maximum(hi, x)
        if direction == "increase":
            lower[:, j] = x
        elif direction == "decrease":
            upper[:, j] = x
    return lower, upper


def _to_raw(data: Dataset, d: int, values):
    if data.scaling is None:
        return np.asarray(values, dtype=float)
    return data.scaling.unscale(values, data.meta[d].name)


def cmd_prescribe(args) -> int:
    model, doc = io.load_model(args.model)
    data, frame, schema = io.load_dataset(args.data, args.schema)
    if doc["feature_names"] != data.feature_names:
        raise ConfigError("model features do not match the data columns")
    ctrl = data.controllable
    if ctrl.size == 0:
        raise ConfigError("no controllable features declared in the schema")
    tau = args.tau if args.tau is not None else model.threshold
    if tau is None:
        raise ConfigError("model has no calibrated threshold; pass --tau")
    direction = args.direction or ("increase" if args.treatment == "hct" else "both")
    if args.treatment == "hct":
        if data.scaling is None:
            raise ConfigError("--treatment hct needs a pipeline schema with scaling")
        names = data.feature_names
        if args.hct_feature not in names or data.meta[names.index(args.hct_feature)].controllable is False:
            raise ConfigError(f"--hct-feature {args.hct_feature!r} is not a controllable feature")
        if args.sex_column not in frame.columns:
            raise ConfigError(f"--sex-column {args.sex_column!r} not in data (list it under 'passthrough')")
    lower, upper = _bounds(data, ctrl, direction)
    try:
        cfg = PrescriptionConfig(args.lam, tuple(ctrl), lower, upper, p=args.p)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    prescriptions = batch_prescribe(model, data, cfg, tau)

    rows = []
    X_after = apply_prescriptions(data.X, prescriptions)
    for pr in prescriptions:
        row = {"patient_index": pr.patient_index, "cluster": pr.cluster,
               "flipped": pr.flipped, "xi": pr.xi, "change_cost": pr.change_cost}
        for d in ctrl:
            name = data.meta[d].name
            row[f"{name}_before"] = float(_to_raw(data, d, pr.x[d]))
            row[f"{name}_after"] = float(_to_raw(data, d, pr.y[d]))
        if args.treatment == "hct":
            h = data.feature_names.index(args.hct_feature)
            hct_before = float(_to_raw(data, h, pr.x[h]))
            base = baseline_bags(frame[args.sex_column].iloc[pr.patient_index], hct_before)
            bags = discretize_transfusion(float(_to_raw(data, h, pr.y[h])) - hct_before, base)
            treated = apply_treatment(pr.x, h, bags, data.scaling)
            X_after[pr.patient_index] = treated
            row.update(baseline_bags=base, bags=bags,
                       **{f"{args.hct_feature}_treated": float(_to_raw(data, h, treated[h]))})
        rows.append(row)
    columns = ["patient_index", "cluster", "flipped", "xi", "change_cost"]
    columns += [f"{data.meta[d].name}_{s}" for d in ctrl for s in ("before", "after")]
    if args.treatment == "hct":
        columns += ["baseline_bags", "bags", f"{args.hct_feature}_treated"]
    out = _out_path(args.output, "prescriptions.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    io.write_table(pd.DataFrame(rows, columns=columns), out)
    flipped = sum(p.flipped for p in prescriptions)
    print(f"{len(prescriptions)} subjects at risk (score >= {tau:.6g}); {flipped} flipped")
    print(f"wrote {out}")
    if args.after_data:
        after = frame.copy()
        after[data.feature_names] = X_after
        io.write_table(after, args.after_data)
        print(f"wrote {args.after_data}")
    return 0


# ----------------------------------------------------------------------- eval

def _finite(v):
    return None if v is None or not math.isfinite(v) else float(v)


def cmd_eval(args) -> int:
    data, _, schema = io.load_dataset(args.data, args.schema)
    if not ((data.y == 1).any() and (data.y == -1).any()):
        raise DataError("evaluation data must contain both classes")
    after = None
    if args.after_data:
        after = io.dataset_from_frame(io.read_table(args.after_data, schema), schema)
    names = args.names or [Path(m).stem for m in args.models]
    if len(names) != len(args.models):
        raise ConfigError("--names must match --models")
    results = []
    for name, path in zip(names, args.models):
        model, doc = io.load_model(path)
        if doc["feature_names"] != data.feature_names:
            raise ConfigError(f"{path}: model features do not match the data columns")
        scores = model.decision_function(data.X)
        if args.target_rate is not None:
            tau, source = calibrate_threshold(scores, args.target_rate), "evaluation data"
        elif model.threshold is not None:
            tau, source = model.threshold, "model file"
        else:
            tau, source = 0.0, "default"
        entry = {
            "name": name, "algorithm": doc["algorithm"], "auc": auc(scores, data.y),
            "threshold": tau, "threshold_source": source,
            "rate_before": positive_rate(scores, tau),
            "roc": [{"threshold": _finite(p.threshold), "tpr": p.tpr, "fpr": p.fpr}
                    for p in roc_curve(scores, data.y)],
        }
        if after is not None:
            entry["rate_after"] = positive_rate(model.decision_function(after.X), tau)
            entry["relative_reduction"] = relative_reduction(entry["rate_before"], entry["rate_after"])
        results.append(entry)
    metrics = {
        "format_version": io.FORMAT_VERSION,
        "n_samples": data.n_samples,
        "target_rate": args.target_rate,
        "models": results,
        "auc_table": [{"method": r["name"], "auc": r["auc"]} for r in results],
    }
    if after is not None:
        metrics["rate_table"] = [{"method": r["name"], "prescriptive_rate": r["rate_after"],
                                  "baseline_rate": r["rate_before"]} for r in results]
        metrics["mean_relative_reduction"] = float(np.mean([r["relative_reduction"] for r in results]))
    if args.rank_features:
        metrics["feature_ranking"] = [{"feature": f, "p_value": p} for f, p in rank_features(data)]
    out = _out_path(args.output, "metrics.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    io.write_json(metrics, out)
    header = f"{'method':<16}{'AUC':>8}{'threshold':>14}{'rate':>9}"
    print(header + (f"{'after':>9}" if after is not None else ""))
    for r in results:
        line = f"{r['name']:<16}{r['auc']:>8.4f}{r['threshold']:>14.6g}{r['rate_before']:>9.4f}"
        if after is not None:
            line += f"{r['rate_after']:>9.4f}"
        print(line)
    print(f"wrote {out}")
    return 0


# --------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psvm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write synthetic data and its schema")
    g.add_argument("--preset", choices=sorted(PRESETS), default="jcc2")
    g.add_argument("--L", type=int)
    g.add_argument("--D", type=int)
    g.add_argument("--n-pos", type=int)
    g.add_argument("--n-neg", type=int)
    g.add_argument("--separation", type=float)
    g.add_argument("--noise-sigma", type=float)
    g.add_argument("--n", type=int, help="rows (hct preset)")
    g.add_argument("--positive-rate", type=float, help="positive fraction (hct preset)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", help="output directory")
    g.set_defaults(func=cmd_gen)

    p = sub.add_parser("preprocess", help="encode, impute, filter, scale and split a raw table")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--k", type=int, default=5, help="neighbours for kNN imputation")
    p.add_argument("--fractions", type=float, nargs=3, default=(0.6, 0.2, 0.2))
    p.add_argument("--no-split", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="output directory")
    p.set_defaults(func=cmd_preprocess)

    t = sub.add_parser("train", help="fit slsvm, jcc or l2lr")
    t.add_argument("--data", required=True)
    t.add_argument("--schema", required=True, help="schema or pipeline file")
    t.add_argument("--algo", choices=io.ALGORITHMS, required=True)
    t.add_argument("--C", type=float, default=1.0)
    t.add_argument("--T", type=float, default=1.0)
    t.add_argument("--L", type=int, default=2)
    t.add_argument("--lambda-neg", type=float, default=1.0)
    t.add_argument("--reg", type=float, default=1.0)
    t.add_argument("--max-iter", type=int, default=5000)
    t.add_argument("--tol", type=float, default=1e-6)
    t.add_argument("--max-rounds", type=int, default=30)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--calibrate-data")
    t.add_argument("--target-rate", type=float)
    t.add_argument("-o", "--output", help="model file")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("prescribe", help="optimal prescriptions for at-risk subjects")
    r.add_argument("--model", required=True)
    r.add_argument("--data", required=True)
    r.add_argument("--schema", required=True)
    r.add_argument("--lambda", dest="lam", type=float, default=10.0)
    r.add_argument("--p", type=int, choices=(1, 2), default=2)
    r.add_argument("--tau", type=float)
    r.add_argument("--direction", choices=("both", "increase", "decrease"))
    r.add_argument("--treatment", choices=("hct",))
    r.add_argument("--hct-feature", default="HCT")
    r.add_argument("--sex-column", default="sex")
    r.add_argument("--after-data", help="write the post-prescription data here")
    r.add_argument("-o", "--output", help="prescriptions CSV")
    r.set_defaults(func=cmd_prescribe)

    e = sub.add_parser("eval", help="AUC, calibration and prescriptive rates")
    e.add_argument("--models", nargs="+", required=True)
    e.add_argument("--names", nargs="+")
    e.add_argument("--data", required=True)
    e.add_argument("--schema", required=True)
    e.add_argument("--target-rate", type=float)
    e.add_argument("--after-data")
    e.add_argument("--rank-features", action="store_true")
    e.add_argument("-o", "--output", help="metrics JSON")
    e.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"psvm: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError, pd.errors.ParserError) as exc:
        print(f"psvm: data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
