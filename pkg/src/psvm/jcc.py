"""Joint clustering and classification.

The positive class is split into ``L`` clusters, each with its own sparse
linear SVM against *all* negatives:

    min  sum_l [ 1/2 ||beta^l||^2 + lam_pos * sum_{i in cluster l} xi_i
                                  + lam_neg * sum_j zeta_j^l ]
    s.t. ||beta^l||_1 <= T^l

Negatives enter every cluster term, so ``lam_pos = L * lam_neg`` offsets
their L-fold count. Training alternates weighted per-cluster fits with
reassignment of each positive to the cluster that gives it the smallest
hinge loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .base import ThresholdedClassifierMixin, check_pm1_Xy
from .core import Dataset, LinearModel
from .slsvm import SlsvmOptions, solve

LLOYD_MAX_ITERS = 50


@dataclass
class JccModel:
    models: list
    assignment: np.ndarray
    lambda_neg: float
    budgets: tuple
    lambda_pos: Optional[float] = None
    threshold: Optional[float] = None
    history: list = field(default_factory=list)
    n_rounds: int = 0
    converged: bool = False

    def __post_init__(self):
        L = len(self.models)
        if L < 1:
            raise ValueError("a JCC model needs at least one cluster")
        if not self.lambda_neg > 0:
            raise ValueError("lambda_neg must be positive")
        expected = L * self.lambda_neg
        if self.lambda_pos is None:
            self.lambda_pos = expected
        elif self.lambda_pos != expected:
            raise ValueError("lambda_pos must equal L * lambda_neg")
        self.budgets = tuple(float(t) for t in self.budgets)
        if len(self.budgets) != L:
            raise ValueError("one budget per cluster is required")
        self.assignment = np.asarray(self.assignment, dtype=int)
        if self.assignment.size and (self.assignment.min() < 0 or self.assignment.max() >= L):
            raise ValueError("assignment refers to a non-existent cluster")

    @property
    def L(self) -> int:
        return len(self.models)

    @property
    def tau(self) -> float:
        return 0.0 if self.threshold is None else float(self.threshold)

    def cluster_scores(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.column_stack([m.decision_function(X) for m in self.models])

    def decision_function(self, X) -> np.ndarray:
        return self.cluster_scores(X).max(axis=1)

    def cluster_of(self, X) -> np.ndarray:
        """Cluster attaining the maximum score (lowest index on ties)."""
        return np.argmax(self.cluster_scores(X), axis=1)

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= self.tau, 1, -1)


def init_assignment(positives, L: int, seed: int = 0) -> np.ndarray:
    """k-means on the positive samples: farthest-point seeding from a
    seeded random start, then at most 50 Lloyd iterations."""
    P = np.asarray(positives, dtype=float)
    if L < 1:
        raise ValueError("L must be >= 1")
    if L > len(P):
        raise ValueError(f"L={L} exceeds the number of positive samples ({len(P)})")
    if L == 1:
        return np.zeros(len(P), dtype=int)
    rng = np.random.default_rng(seed)
    centers = [P[rng.integers(len(P))]]
    d2 = np.sum((P - centers[0]) ** 2, axis=1)
    for _ in range(1, L):
        centers.append(P[int(np.argmax(d2))])
        d2 = np.minimum(d2, np.sum((P - centers[-1]) ** 2, axis=1))
    centers = np.array(centers)

    labels = None
    for _ in range(LLOYD_MAX_ITERS):
        dist = np.sum((P[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new = np.argmin(dist, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for l in range(L):
            members = P[labels == l]
            if len(members):
                centers[l] = members.mean(axis=0)
    return labels


def _cluster_term(m, pos, Xn, lam_pos, lam_neg):
    t = 0.5 * float(m.beta @ m.beta)
    if len(pos):
        t += lam_pos * float(np.maximum(0.0, 1.0 - pos @ m.beta - m.beta0).sum())
    return t + lam_neg * float(np.maximum(0.0, 1.0 + Xn @ m.beta + m.beta0).sum())


def _objective(models, assignment, Xp, Xn, lam_pos, lam_neg):
    return float(sum(_cluster_term(m, Xp[assignment == l], Xn, lam_pos, lam_neg)
                     for l, m in enumerate(models)))


def jcc_objective(model: JccModel, data: Dataset) -> float:
    """JCC objective with slacks evaluated as hinge losses."""
    if data.n_features != model.models[0].beta.shape[0]:
        raise ValueError("model and data dimensions disagree")
    return _objective(model.models, model.assignment, data.positives, data.negatives,
                      model.lambda_pos, model.lambda_neg)


def _reassign(models, Xp):
    hinges = np.column_stack([np.maximum(0.0, 1.0 - (Xp @ m.beta + m.beta0)) for m in models])
    return np.argmin(hinges, axis=1)  # argmin keeps the lowest index on ties


def train_jcc(data: Dataset, L: int, lambda_neg: float,
              budgets: float | Sequence[float] = 1.0,
              opts: SlsvmOptions | None = None, max_rounds: int = 30,
              init: np.ndarray | None = None) -> JccModel:
    """Alternating minimisation of the JCC objective.

    Each round refits every non-empty cluster (keeping the old classifier
    when the refit would raise that cluster's term), then moves every
    positive to its smallest-hinge cluster. Stops when the assignment is
    stable or after ``max_rounds`` rounds. ``history`` records the objective
    after every fit step and every reassignment step.
    """
    opts = opts or SlsvmOptions()
    if L < 1:
        raise ValueError("L must be >= 1")
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    budgets = np.broadcast_to(np.asarray(budgets, dtype=float), (L,)).copy()
    is_pos = data.y == 1
    if not is_pos.any() or is_pos.all():
        raise ValueError("JCC needs both positive and negative samples")
    Xp, Xn = data.positives, data.negatives
    lam_pos = L * lambda_neg
    assignment = (init_assignment(Xp, L, opts.seed) if init is None
                  else np.asarray(init, dtype=int).copy())
    pos_rows = np.flatnonzero(is_pos)

    models: list = [None] * L
    history = []
    converged = False
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        for l in range(L):
            members = pos_rows[assignment == l]
            if models[l] is not None and len(members) == 0:
                continue  # an empty cluster keeps its classifier
            mask = ~is_pos
            mask[members] = True
            yl = data.y[mask]
            c = np.where(yl == 1, lam_pos, lambda_neg)
            res = solve(data.X[mask], yl, c, budgets[l], opts)
            cand = LinearModel(res.beta, res.beta0, C=lambda_neg, T=budgets[l],
                               objective=res.objective, feature_names=data.feature_names)
            if models[l] is None:
                models[l] = cand
                continue
            pos = Xp[assignment == l]
            if (_cluster_term(cand, pos, Xn, lam_pos, lambda_neg)
                    <= _cluster_term(models[l], pos, Xn, lam_pos, lambda_neg)):
                models[l] = cand
        history.append(_objective(models, assignment, Xp, Xn, lam_pos, lambda_neg))

        new_assignment = _reassign(models, Xp)
        changed = not np.array_equal(new_assignment, assignment)
        assignment = new_assignment
        history.append(_objective(models, assignment, Xp, Xn, lam_pos, lambda_neg))
        if not changed:
            converged = True
            break

    return JccModel(models=models, assignment=assignment, lambda_neg=lambda_neg,
                    budgets=tuple(budgets), history=history, n_rounds=rounds,
                    converged=converged)


def predict_jcc(model: JccModel, x) -> float:
    """Max over clusters of the cluster score."""
    return float(model.decision_function(np.asarray(x, dtype=float)[None, :])[0])


class JCCClassifier(ThresholdedClassifierMixin, ClassifierMixin, BaseEstimator):
    """Per-cluster sparse linear SVMs with jointly learned positive clusters.

    Parameters
    ----------
    n_clusters : int, default=2
    lambda_neg : float, default=1.0
        Weight of negative hinge losses; positives get ``n_clusters * lambda_neg``.
    T : float or sequence of float, default=1.0
        l1 budget, shared or per cluster.
    max_rounds : int, default=30
    solver, max_iter, tol, step0 : passed to the per-cluster SVM fits.
    random_state : int, default=0
        Seeds the k-means initialisation.
    """

    def __init__(self, n_clusters=2, lambda_neg=1.0, T=1.0, max_rounds=30, solver="dual",
                 max_iter=5000, tol=1e-6, step0=1.0, random_state=0):
        self.n_clusters = n_clusters
        self.lambda_neg = lambda_neg
        self.T = T
        self.max_rounds = max_rounds
        self.solver = solver
        self.max_iter = max_iter
        self.tol = tol
        self.step0 = step0
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_pm1_Xy(X, y)
        opts = SlsvmOptions(max_iters=self.max_iter, tol=self.tol, step0=self.step0,
                            seed=self.random_state, solver=self.solver)
        self.model_ = train_jcc(Dataset(X, y), self.n_clusters, self.lambda_neg, self.T,
                                opts, self.max_rounds)
        self.coefs_ = np.array([m.beta for m in self.model_.models])
        self.intercepts_ = np.array([m.beta0 for m in self.model_.models])
        self.labels_ = self.model_.assignment
        self.objective_history_ = self.model_.history
        self.objective_ = self.model_.history[-1]
        self.n_features_in_ = X.shape[1]
        self.threshold_ = 0.0
        return self

    def decision_function(self, X):
        X = self._check_X(X)
        return (X @ self.coefs_.T + self.intercepts_).max(axis=1)

    def cluster_of(self, X):
        X = self._check_X(X)
        return np.argmax(X @ self.coefs_.T + self.intercepts_, axis=1)

    def to_model(self) -> JccModel:
        m = self.model_
        return JccModel(models=m.models, assignment=m.assignment, lambda_neg=m.lambda_neg,
                        budgets=m.budgets, threshold=self.threshold_, history=m.history,
                        n_rounds=m.n_rounds, converged=m.converged)
