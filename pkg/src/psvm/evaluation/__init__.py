from .logistic import L2LogisticRegression, train_l2lr
from .metrics import (RocPoint, auc, auc_trapezoid, calibrate_threshold, positive_rate,
                      prescriptive_eval, relative_reduction, roc_curve)
from .welch import betainc, rank_features, t_cdf, welch_t

__all__ = [
    "L2LogisticRegression", "RocPoint", "auc", "auc_trapezoid", "betainc",
    "calibrate_threshold", "positive_rate", "prescriptive_eval", "rank_features",
    "relative_reduction", "roc_curve", "t_cdf", "train_l2lr", "welch_t",
]
