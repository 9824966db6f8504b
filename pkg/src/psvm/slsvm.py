"""Sparse linear SVM: hinge-loss SVM with an l1 budget on the weights.

Solves

    min_{beta, beta0}  1/2 ||beta||^2 + sum_i c_i max(0, 1 - y_i (x_i'beta + beta0))
    s.t.               ||beta||_1 <= T

with per-sample weights ``c_i`` (``C * pos_weight`` for positives,
``C * neg_weight`` for negatives). The slack variables are eliminated; the
intercept is left outside the budget.

Two solvers are provided:

``"dual"`` (default)
    Accelerated projected gradient on the dual. Writing the hinge as
    ``max_{0 <= a_i <= c_i} a_i (1 - margin_i)`` and minimising over the
    l1 ball in closed form gives the smooth concave dual

        q(a) = sum(a) - 1/2 ||v||^2 + 1/2 dist(v, B_T)^2,   v = X'(y * a),

    over ``{0 <= a <= c, y'a = 0}``, with ``grad q = 1 - y * (X proj(v))``.
    Every iterate yields a primal candidate ``beta = proj(v)`` whose intercept
    is then minimised exactly, so the duality gap certifies the result.
``"subgradient"``
    Projected subgradient on the primal with steps ``step0 / sqrt(1 + t)``.

Both return the best primal iterate seen.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .base import ThresholdedClassifierMixin, check_pm1_Xy
from .core import Dataset, LinearModel, check_labels


@dataclass(frozen=True)
class SlsvmOptions:
    max_iters: int = 5000
    step0: float = 1.0
    tol: float = 1e-6
    seed: int = 0
    pos_weight: float = 1.0
    neg_weight: float = 1.0
    solver: str = "dual"

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not (self.step0 > 0 and self.pos_weight > 0 and self.neg_weight > 0):
            raise ValueError("step0 and class weights must be positive")
        if self.solver not in ("dual", "subgradient"):
            raise ValueError(f"unknown solver {self.solver!r}")


def project_l1(v, T: float) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{u : ||u||_1 <= T}``."""
    if not T > 0:
        raise ValueError("T must be positive")
    v = np.asarray(v, dtype=float)
    a = np.abs(v)
    if a.sum() <= T:
        return v.copy()
    u = np.sort(a.ravel())[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    rho = np.nonzero(u * k > css - T)[0][-1]
    theta = (css[rho] - T) / (rho + 1)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def sample_weights(y, C: float = 1.0, opts: SlsvmOptions | None = None) -> np.ndarray:
    opts = opts or SlsvmOptions()
    return np.where(np.asarray(y) == 1, C * opts.pos_weight, C * opts.neg_weight)


def _objective(beta, beta0, X, y, c):
    hinge = np.maximum(0.0, 1.0 - y * (X @ beta + beta0))
    return 0.5 * float(beta @ beta) + float(c @ hinge)


def objective(beta, beta0, data: Dataset, opts: SlsvmOptions | None = None) -> float:
    """Weighted primal objective with the slacks replaced by hinge losses."""
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.shape[0] != data.n_features:
        raise ValueError("beta and data dimensions disagree")
    return _objective(beta, float(beta0), data.X, data.y, sample_weights(data.y, 1.0, opts))


def optimal_intercept(s, y, c) -> float:
    """Exact minimiser of ``b -> sum_i c_i max(0, 1 - y_i (s_i + b))``.

    The function is convex and piecewise linear with kinks at ``y_i - s_i``;
    the minimiser is the first kink whose right slope is non-negative.
    """
    b = y - s
    order = np.argsort(b, kind="stable")
    bs, cs, ys = b[order], c[order], y[order]
    pos_c = np.where(ys == 1, cs, 0.0)
    neg_c = np.where(ys == -1, cs, 0.0)
    slope_right = np.cumsum(neg_c) - (pos_c.sum() - np.cumsum(pos_c))
    k = int(np.argmax(slope_right >= 0)) if np.any(slope_right >= 0) else len(bs) - 1
    return float(bs[k])


def _project_box_hyperplane(z, y, c):
    """Project ``z`` onto ``{0 <= a <= c, y'a = 0}`` (y in {-1, +1}).

    ``a(nu) = clip(z - nu*y, 0, c)`` and ``h(nu) = y'a(nu)`` is non-increasing
    and piecewise linear; the root is bracketed among the sorted kinks by
    bisection and then located exactly by linear interpolation.
    """
    def h(nu):
        return float(y @ np.clip(z - nu * y, 0.0, c))

    kinks = np.unique(np.concatenate([z * y, (z - c) * y]))
    lo, hi = 0, kinks.size - 1
    h_lo, h_hi = h(kinks[lo]), h(kinks[hi])
    if h_lo <= 0:
        nu = kinks[lo]
    elif h_hi >= 0:
        nu = kinks[hi]
    else:
        while hi - lo > 1:
            mid = (lo + hi) // 2
            h_mid = h(kinks[mid])
            if h_mid >= 0:
                lo, h_lo = mid, h_mid
            else:
                hi, h_hi = mid, h_mid
        nu = kinks[lo] + h_lo * (kinks[hi] - kinks[lo]) / (h_lo - h_hi)
    return np.clip(z - nu * y, 0.0, c)


@dataclass
class SolveResult:
    beta: np.ndarray
    beta0: float
    objective: float
    n_iter: int
    gap: float
    history: list


def _degenerate(X, y, c):
    # a single class: beta = 0 and beta0 = label put every sample on the margin
    D = X.shape[1]
    return SolveResult(np.zeros(D), float(y[0]), 0.0, 0, 0.0, [0.0])


def _solve_dual(X, y, c, T, opts):
    n, D = X.shape
    yX = y[:, None] * X
    lip = float(np.linalg.norm(X, 2) ** 2) if X.size else 0.0

    def primal(beta):
        s = X @ beta
        b0 = optimal_intercept(s, y, c)
        return b0, 0.5 * float(beta @ beta) + float(c @ np.maximum(0.0, 1.0 - y * (s + b0)))

    if lip == 0.0:
        beta = np.zeros(D)
        b0, f = primal(beta)
        return SolveResult(beta, b0, f, 0, 0.0, [f])

    step = 1.0 / lip
    alpha = _project_box_hyperplane(np.zeros(n), y, c)
    alpha_prev = alpha
    v = yX.T @ alpha
    v_prev = v
    t = 1.0
    best = None
    best_dual = -np.inf
    history = []
    it = 0
    for it in range(1, opts.max_iters + 1):
        # candidate from the current feasible dual point
        beta = project_l1(v, T) if v.any() else np.zeros(D)
        b0, f = primal(beta)
        if best is None or f < best[2]:
            best = (beta, b0, f)
        history.append(best[2])
        r = v - beta
        dual = float(alpha.sum()) - 0.5 * float(v @ v) + 0.5 * float(r @ r)
        best_dual = max(best_dual, dual)
        gap = best[2] - best_dual
        if gap <= opts.tol * max(1.0, abs(best[2])):
            break

        # accelerated step from the extrapolated point
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        mom = (t - 1.0) / t_next
        z = alpha + mom * (alpha - alpha_prev)
        vz = v + mom * (v - v_prev)
        beta_z = project_l1(vz, T) if vz.any() else np.zeros(D)
        grad = 1.0 - yX @ beta_z
        alpha_new = _project_box_hyperplane(z + step * grad, y, c)
        # gradient-based adaptive restart
        if float((z - alpha_new) @ (alpha_new - alpha)) > 0:
            t_next = 1.0
        alpha_prev, alpha = alpha, alpha_new
        v_prev, v = v, yX.T @ alpha
        t = t_next
    return SolveResult(best[0], best[1], best[2], it, best[2] - best_dual, history)


def _solve_subgradient(X, y, c, T, opts):
    n, D = X.shape
    beta = np.zeros(D)
    beta0 = 0.0
    best = (beta.copy(), beta0, _objective(beta, beta0, X, y, c))
    history = []
    window_start = best[2]
    it = 0
    for it in range(1, opts.max_iters + 1):
        active = y * (X @ beta + beta0) < 1.0  # zero subgradient on the kink
        w = c * y * active
        g_beta = beta - X.T @ w
        g_beta0 = -float(w.sum())
        eta = opts.step0 / np.sqrt(it)
        beta = project_l1(beta - eta * g_beta, T)
        beta0 = beta0 - eta * g_beta0
        f = _objective(beta, beta0, X, y, c)
        if f < best[2]:
            best = (beta.copy(), beta0, f)
        history.append(best[2])
        if it % 200 == 0:
            if window_start - best[2] <= opts.tol * max(1.0, abs(best[2])):
                break
            window_start = best[2]
    return SolveResult(best[0], best[1], best[2], it, np.nan, history)


def solve(X, y, c, T: float, opts: SlsvmOptions | None = None) -> SolveResult:
    """Minimise the weighted objective on raw arrays."""
    opts = opts or SlsvmOptions()
    X = np.asarray(X, dtype=float)
    y = check_labels(y)
    c = np.asarray(c, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("cannot train on an empty dataset")
    if not T > 0:
        raise ValueError("T must be positive")
    if np.any(c <= 0):
        raise ValueError("sample weights must be positive")
    if np.all(y == y[0]):
        return _degenerate(X, y, c)
    if opts.solver == "subgradient":
        return _solve_subgradient(X, y, c, T, opts)
    return _solve_dual(X, y, c, T, opts)


def train(data: Dataset, C: float, T: float, opts: SlsvmOptions | None = None) -> LinearModel:
    """Fit a sparse linear SVM; per-class weights in ``opts`` scale ``C``."""
    if not C > 0:
        raise ValueError("C must be positive")
    opts = opts or SlsvmOptions()
    res = solve(data.X, data.y, sample_weights(data.y, C, opts), T, opts)
    return LinearModel(res.beta, res.beta0, C=C, T=T, objective=res.objective,
                       feature_names=data.feature_names)


class SparseLinearSVC(ThresholdedClassifierMixin, ClassifierMixin, BaseEstimator):
    """Linear SVM with an l1 budget on the coefficients.

    Parameters
    ----------
    C : float, default=1.0
        Hinge-loss penalty.
    T : float, default=1.0
        Budget on ``||coef_||_1``; smaller values give sparser models.
    pos_weight, neg_weight : float, default=1.0
        Multipliers of ``C`` for positive and negative samples.
    solver : {"dual", "subgradient"}, default="dual"
    max_iter : int, default=5000
    tol : float, default=1e-6
        Relative duality gap (dual solver) or relative improvement of the
        best objective over 200 iterations (subgradient solver).
    step0 : float, default=1.0
        Initial step of the subgradient solver.

    Attributes
    ----------
    coef_, intercept_ : fitted hyperplane
    objective_ : float
    n_iter_ : int
    threshold_ : float
        Decision threshold on ``decision_function``; 0 until calibrated.
    """

    def __init__(self, C=1.0, T=1.0, pos_weight=1.0, neg_weight=1.0, solver="dual",
                 max_iter=5000, tol=1e-6, step0=1.0, random_state=0):
        self.C = C
        self.T = T
        self.pos_weight = pos_weight
        self.neg_weight = neg_weight
        self.solver = solver
        self.max_iter = max_iter
        self.tol = tol
        self.step0 = step0
        self.random_state = random_state

    def _options(self):
        return SlsvmOptions(max_iters=self.max_iter, step0=self.step0, tol=self.tol,
                            seed=self.random_state, pos_weight=self.pos_weight,
                            neg_weight=self.neg_weight, solver=self.solver)

    def fit(self, X, y):
        X, y = check_pm1_Xy(X, y)
        if not self.C > 0:
            raise ValueError("C must be positive")
        opts = self._options()
        res = solve(X, y, sample_weights(y, self.C, opts), self.T, opts)
        self.coef_ = res.beta
        self.intercept_ = res.beta0
        self.objective_ = res.objective
        self.n_iter_ = res.n_iter
        self.duality_gap_ = res.gap
        self.n_features_in_ = X.shape[1]
        self.threshold_ = 0.0
        return self

    def decision_function(self, X):
        X = self._check_X(X)
        return X @ self.coef_ + self.intercept_

    def to_model(self, feature_names=None) -> LinearModel:
        return LinearModel(self.coef_.copy(), self.intercept_, C=self.C, T=self.T,
                           threshold=self.threshold_, objective=self.objective_,
                           feature_names=feature_names)


def with_weights(opts: SlsvmOptions, pos_weight: float, neg_weight: float) -> SlsvmOptions:
    return replace(opts, pos_weight=pos_weight, neg_weight=neg_weight)
