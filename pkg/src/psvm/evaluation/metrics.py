"""ROC curves, AUC, threshold calibration and prescriptive-effect rates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import check_labels


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    tpr: float
    fpr: float


def _split_scores(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = check_labels(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same length")
    if not (labels == 1).any() or not (labels == -1).any():
        raise ValueError("AUC needs both positive and negative labels")
    return scores, labels


def midranks(values) -> np.ndarray:
    """1-based ranks with tied values sharing their average rank."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(len(values))
    # boundaries of runs of equal values
    starts = np.flatnonzero(np.r_[True, sorted_vals[1:] != sorted_vals[:-1]])
    ends = np.r_[starts[1:], len(values)]
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = 0.5 * (s + 1 + e)
    return ranks


def auc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative, ties
    counting one half (Mann-Whitney U / (n_pos * n_neg))."""
    scores, labels = _split_scores(scores, labels)
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    u = midranks(scores)[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(scores, labels) -> list:
    """ROC points at every distinct score, by descending threshold.

    The first point has threshold ``+inf`` (nothing predicted positive).
    """
    scores, labels = _split_scores(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    s, l = scores[order], labels[order]
    last_of_run = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(l == 1)[last_of_run]
    fp = np.cumsum(l == -1)[last_of_run]
    n_pos, n_neg = tp[-1], fp[-1]
    points = [RocPoint(math.inf, 0.0, 0.0)]
    points += [RocPoint(float(s[k]), float(t / n_pos), float(f / n_neg))
               for k, t, f in zip(last_of_run, tp, fp)]
    return points


def auc_trapezoid(scores, labels) -> float:
    """Trapezoidal area under :func:`roc_curve`."""
    pts = roc_curve(scores, labels)
    fpr = np.array([p.fpr for p in pts])
    tpr = np.array([p.tpr for p in pts])
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def positive_rate(scores, tau: float) -> float:
    """Fraction of scores >= ``tau``."""
    scores = np.asarray(scores, dtype=float)
    return float(np.mean(scores >= tau)) if scores.size else 0.0


def calibrate_threshold(scores, target_rate: float) -> float:
    """Threshold whose predicted-positive rate is closest to ``target_rate``.

    Returns the k-th largest score with ``k = round(target_rate * n)``
    (clamped to ``[1, n]``); with ties the achieved rate is the smallest one
    reachable that is at least ``k / n``.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    if scores.size == 0:
        raise ValueError("cannot calibrate on an empty score vector")
    if not 0 < target_rate <= 1:
        raise ValueError("target_rate must be in (0, 1]")
    n = scores.size
    k = min(max(int(math.floor(target_rate * n + 0.5)), 1), n)
    return float(np.sort(scores)[::-1][k - 1])


def _scores(evaluator, X):
    return np.asarray(evaluator.decision_function(X), dtype=float)


def prescriptive_eval(evaluator, data_before, data_after, tau: float | None = None):
    """Predicted-positive rates of ``evaluator`` before and after prescriptions.

    ``evaluator`` is anything with ``decision_function`` (a LinearModel, a
    JccModel or a fitted estimator); it need not be the model that produced
    the prescriptions. ``tau`` defaults to the evaluator's threshold.
    """
    if tau is None:
        tau = getattr(evaluator, "threshold_", None)
        if tau is None:
            tau = evaluator.tau
    Xb = getattr(data_before, "X", data_before)
    Xa = getattr(data_after, "X", data_after)
    return positive_rate(_scores(evaluator, Xb), tau), positive_rate(_scores(evaluator, Xa), tau)


def relative_reduction(rate_before: float, rate_after: float) -> float:
    return (rate_before - rate_after) / rate_before if rate_before else 0.0
