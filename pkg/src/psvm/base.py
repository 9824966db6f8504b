"""Input validation and threshold handling shared by the estimators."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .core import check_labels


def check_pm1_Xy(X, y):
    """Validate a design matrix and a {-1, +1} label vector."""
    X, y = check_X_y(X, y, dtype=float, y_numeric=True)
    return X, check_labels(y)


class ThresholdedClassifierMixin:
    """``predict`` / ``calibrate`` on top of a ``decision_function``.

    A sample is predicted positive when its score is >= ``threshold_``
    (ties count as positive).
    """

    classes_ = np.array([-1, 1])

    def _check_X(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def predict(self, X):
        return np.where(self.decision_function(X) >= self.threshold_, 1, -1)

    def calibrate(self, X, target_rate):
        """Set ``threshold_`` so the predicted-positive rate on ``X`` matches
        ``target_rate`` as closely as the scores allow."""
        from .evaluation.metrics import calibrate_threshold

        self.threshold_ = calibrate_threshold(self.decision_function(X), target_rate)
        return self
