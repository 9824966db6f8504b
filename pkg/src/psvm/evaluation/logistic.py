"""l2-regularized logistic regression baseline."""

from __future__ import annotations

import logging

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..base import ThresholdedClassifierMixin, check_pm1_Xy
from ..core import Dataset, LinearModel

log = logging.getLogger(__name__)

ARMIJO = 1e-4
BACKTRACK = 0.5


def l2lr_loss(w, X, y, reg):
    """``sum log(1 + exp(-y (Xw[:-1] + w[-1]))) + reg/2 ||w[:-1]||^2``; the
    intercept (last entry) is unpenalised."""
    beta, b0 = w[:-1], w[-1]
    m = y * (X @ beta + b0)
    return float(np.logaddexp(0.0, -m).sum() + 0.5 * reg * beta @ beta)


def l2lr_grad(w, X, y, reg):
    beta, b0 = w[:-1], w[-1]
    m = y * (X @ beta + b0)
    # d/dm log(1 + e^{-m}) = -sigmoid(-m)
    r = -y * np.exp(-np.logaddexp(0.0, m))
    g = np.empty_like(w)
    g[:-1] = X.T @ r + reg * beta
    g[-1] = r.sum()
    return g


def fit_l2lr(X, y, reg, max_iter=20000, gtol=1e-5):
    """Gradient descent with Barzilai-Borwein trial steps and Armijo
    backtracking. Returns ``(w, history, converged)``."""
    X = np.asarray(X, dtype=float)
    w = np.zeros(X.shape[1] + 1)
    f = l2lr_loss(w, X, y, reg)
    g = l2lr_grad(w, X, y, reg)
    history = [f]
    step = 1.0 / (0.25 * (np.linalg.norm(X, 2) ** 2 + len(X)) + reg)
    converged = False
    for _ in range(max_iter):
        if np.linalg.norm(g) <= gtol:
            converged = True
            break
        while True:
            w_new = w - step * g
            f_new = l2lr_loss(w_new, X, y, reg)
            if f_new <= f - ARMIJO * step * float(g @ g):
                break
            step *= BACKTRACK
            if step < 1e-300:
                return w, history, False
        g_new = l2lr_grad(w_new, X, y, reg)
        s, dg = w_new - w, g_new - g
        sy = float(s @ dg)
        w, f, g = w_new, f_new, g_new
        history.append(f)
        if sy > 0:
            step = float(s @ s) / sy
    else:
        converged = np.linalg.norm(g) <= gtol
    return w, history, converged


def train_l2lr(data: Dataset, reg: float, max_iter: int = 20000, gtol: float = 1e-5) -> LinearModel:
    if not reg > 0:
        raise ValueError("reg must be positive")
    if not ((data.y == 1).any() and (data.y == -1).any()):
        raise ValueError("logistic regression needs both classes")
    w, history, converged = fit_l2lr(data.X, data.y, reg, max_iter, gtol)
    if not converged:
        log.warning("l2lr: gradient norm above %g after %d iterations", gtol, len(history) - 1)
    return LinearModel(w[:-1], w[-1], C=reg, objective=history[-1],
                       feature_names=data.feature_names)


class L2LogisticRegression(ThresholdedClassifierMixin, ClassifierMixin, BaseEstimator):
    """Logistic regression with a ridge penalty ``reg/2 ||coef_||^2``.

    Attributes
    ----------
    coef_, intercept_
    loss_history_ : list of float
        Objective after every accepted step (non-increasing).
    converged_ : bool
        Whether the gradient norm fell below ``gtol``.
    """

    def __init__(self, reg=1.0, max_iter=20000, gtol=1e-5):
        self.reg = reg
        self.max_iter = max_iter
        self.gtol = gtol

    def fit(self, X, y):
        X, y = check_pm1_Xy(X, y)
        if not self.reg > 0:
            raise ValueError("reg must be positive")
        w, self.loss_history_, self.converged_ = fit_l2lr(X, y, self.reg, self.max_iter, self.gtol)
        self.coef_, self.intercept_ = w[:-1], float(w[-1])
        self.n_features_in_ = X.shape[1]
        self.n_iter_ = len(self.loss_history_) - 1
        self.threshold_ = 0.0
        return self

    def decision_function(self, X):
        X = self._check_X(X)
        return X @ self.coef_ + self.intercept_

    def to_model(self, feature_names=None) -> LinearModel:
        return LinearModel(self.coef_.copy(), self.intercept_, C=self.reg,
                           threshold=self.threshold_, objective=self.loss_history_[-1],
                           feature_names=feature_names)
