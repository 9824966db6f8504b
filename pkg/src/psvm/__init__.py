"""Sparse linear SVMs, joint clustering and classification, and
SVM-based prescriptions."""

from .core import Dataset, FeatureMeta, LinearModel, ScalingParams, hinge, score, to_pm1
from .jcc import JCCClassifier, JccModel, jcc_objective, predict_jcc, train_jcc
from .preprocess import Preprocessor, split
from .prescribe import (Prescription, PrescriptionConfig, apply_prescriptions, apply_treatment,
                        baseline_bags, batch_prescribe, discretize_transfusion, prescribe)
from .slsvm import SlsvmOptions, SparseLinearSVC, objective, project_l1, solve, train
from .synth import SynthSpec, gen_controllable_data, gen_jcc_data

__version__ = "0.1.0"

__all__ = [
    "Dataset", "FeatureMeta", "LinearModel", "ScalingParams", "hinge", "score", "to_pm1",
    "JCCClassifier", "JccModel", "jcc_objective", "predict_jcc", "train_jcc",
    "Preprocessor", "split",
    "Prescription", "PrescriptionConfig", "apply_prescriptions", "apply_treatment",
    "baseline_bags", "batch_prescribe", "discretize_transfusion", "prescribe",
    "SlsvmOptions", "SparseLinearSVC", "objective", "project_l1", "solve", "train",
    "SynthSpec", "gen_controllable_data", "gen_jcc_data",
]
