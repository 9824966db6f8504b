"""Per-subject prescriptions on a linear (or per-cluster linear) model.

For a subject ``x`` predicted positive by the hyperplane ``(beta, beta0)``
the prescribed vector ``y`` minimises

    g(y) = lam * max(0, 1 + beta0 + beta'y) + sum_{d controllable} |y_d - x_d|^p

over the box ``lower <= y_d <= upper`` on controllable coordinates, with
every other coordinate pinned to ``x``. Both ``p = 1`` and ``p = 2`` are
solved exactly:

* ``p = 2``: writing ``lam * max(0, s) = max_{0 <= mu <= lam} mu * s`` the
  inner minimisation separates into ``z_d(mu) = clip(-mu * beta_d / 2)``;
  the optimal ``mu`` is the root of the non-increasing piecewise-linear
  ``1 + beta0 + beta'(x + z(mu))`` (or an endpoint of ``[0, lam]``).
* ``p = 1``: the problem is a fractional knapsack; coordinates are moved in
  order of decreasing ``|beta_d|`` while ``lam * |beta_d| > 1`` and the
  hinge is still active.

The module also carries the blood-transfusion treatment model used to turn
a continuous hematocrit prescription into a number of 100cc bags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Dataset, LinearModel, ScalingParams

FLIP_TOL = 1e-9
HCT_PER_BAG = 3.0
MAX_BAGS = 3
_BAG_THRESHOLDS = {"female": (37.0, 40.0, 43.0), "male": (41.0, 44.0, 47.0)}


@dataclass(frozen=True)
class PrescriptionConfig:
    """Trade-off ``lam``, norm exponent ``p`` and box bounds (scaled units).

    ``lower`` / ``upper`` have one entry per controllable feature, or one row
    per subject when used with :func:`batch_prescribe`.
    """

    lam: float
    controllable: tuple
    lower: np.ndarray
    upper: np.ndarray
    p: int = 2

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.p not in (1, 2):
            raise ValueError("p must be 1 or 2")
        ctrl = tuple(int(d) for d in np.atleast_1d(self.controllable))
        if not ctrl:
            raise ValueError("at least one controllable feature is required")
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.shape[-1:] != (len(ctrl),) or upper.shape[-1:] != (len(ctrl),):
            raise ValueError("bounds need one entry per controllable feature")
        if np.any(lower > upper):
            raise ValueError("infeasible bounds: lower > upper")
        object.__setattr__(self, "controllable", ctrl)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def for_subject(self, i: int) -> "PrescriptionConfig":
        if self.lower.ndim == 1 and self.upper.ndim == 1:
            return self
        lo = self.lower[i] if self.lower.ndim == 2 else self.lower
        hi = self.upper[i] if self.upper.ndim == 2 else self.upper
        return PrescriptionConfig(self.lam, self.controllable, lo, hi, self.p)


@dataclass(frozen=True)
class Prescription:
    patient_index: int
    cluster: int
    x: np.ndarray
    y: np.ndarray
    xi: float
    change_cost: float
    flipped: bool


def _solve_p2(a, s0, lz, uz, lam):
    """Change vector for p = 2; ``s0`` is the hinge argument at ``z = 0``."""
    def z_of(mu):
        return np.clip(-0.5 * mu * a, lz, uz)

    def h(mu):
        return s0 + float(a @ z_of(mu))

    if s0 <= 0 or lam == 0:
        return np.zeros_like(a)
    if h(lam) >= 0:
        return z_of(lam)
    nz = a != 0
    kinks = np.concatenate([-2.0 * lz[nz] / a[nz], -2.0 * uz[nz] / a[nz]])
    pts = np.unique(np.concatenate([[0.0, lam], kinks[(kinks > 0) & (kinks < lam)]]))
    vals = np.array([h(m) for m in pts])
    k = int(np.argmax(vals < 0))  # vals[0] = s0 > 0 and vals[-1] < 0
    m0, m1, h0, h1 = pts[k - 1], pts[k], vals[k - 1], vals[k]
    return z_of(m0 + h0 * (m1 - m0) / (h0 - h1))


def _solve_p1(a, s0, lz, uz, lam):
    z = np.zeros_like(a)
    s = s0
    for d in np.argsort(-np.abs(a), kind="stable"):
        if s <= 0 or lam * abs(a[d]) <= 1.0:
            break
        room = uz[d] if a[d] < 0 else -lz[d]
        step = min(room, s / abs(a[d]))
        z[d] = -np.sign(a[d]) * step
        s -= abs(a[d]) * step
    return z


def prescribe(model: LinearModel, x, cfg: PrescriptionConfig,
              patient_index: int = 0, cluster: int = 0) -> Prescription:
    """Optimal prescription for one subject."""
    x = np.asarray(x, dtype=float)
    if x.shape != model.beta.shape:
        raise ValueError("model and x dimensions disagree")
    if cfg.lower.ndim != 1:
        raise ValueError("per-subject bounds: use cfg.for_subject(i)")
    ctrl = np.array(cfg.controllable)
    xc = x[ctrl]
    if np.any(xc < cfg.lower) or np.any(xc > cfg.upper):
        raise ValueError("original controllable values lie outside the bounds")
    a = model.beta[ctrl]
    s0 = 1.0 + model.beta0 + float(model.beta @ x)
    lz, uz = cfg.lower - xc, cfg.upper - xc
    solver = _solve_p2 if cfg.p == 2 else _solve_p1
    z = solver(a, s0, lz, uz, cfg.lam)

    y = x.copy()
    y[ctrl] = np.clip(xc + z, cfg.lower, cfg.upper)
    s = model.beta0 + float(model.beta @ y)
    cost = float(np.sum(np.abs(y[ctrl] - xc) ** cfg.p))
    return Prescription(patient_index=int(patient_index), cluster=int(cluster), x=x, y=y,
                        xi=max(0.0, 1.0 + s), change_cost=cost,
                        flipped=bool(s <= -1.0 + FLIP_TOL))


def prescription_objective(p: Prescription, lam: float) -> float:
    return lam * p.xi + p.change_cost


def _hyperplanes(model):
    if hasattr(model, "models"):
        return list(model.models)
    return [model]


def batch_prescribe(model, data: Dataset, cfg: PrescriptionConfig,
                    tau: Optional[float] = None) -> list:
    """Prescriptions for every subject whose score is >= ``tau``.

    ``model`` is a :class:`LinearModel` or a JCC model; for the latter each
    subject is prescribed on the cluster attaining its maximum score.
    ``tau`` defaults to the model's calibrated threshold. Output is ordered by
    subject index.
    """
    planes = _hyperplanes(model)
    if tau is None:
        tau = model.tau
    scores = np.column_stack([m.decision_function(data.X) for m in planes])
    best = np.argmax(scores, axis=1)
    at_risk = np.flatnonzero(scores.max(axis=1) >= tau)
    out = []
    for i in at_risk:
        l = int(best[i])
        out.append(prescribe(planes[l], data.X[i], cfg.for_subject(i), patient_index=i, cluster=l))
    return out


def apply_prescriptions(X, prescriptions: Sequence[Prescription]) -> np.ndarray:
    """Feature matrix with every prescribed row replaced by its ``y``."""
    X = np.array(X, dtype=float)
    for p in prescriptions:
        X[p.patient_index] = p.y
    return X


def _normalise_sex(sex) -> str:
    s = str(sex).strip().lower()
    if s in ("female", "f"):
        return "female"
    if s in ("male", "m"):
        return "male"
    raise ValueError(f"unknown sex {sex!r}")


def baseline_bags(sex, hct_raw: float) -> int:
    """Bags assumed already given, from sex-specific hematocrit bands.

    Bands are closed below and open above, e.g. female [37, 40) -> 1 bag.
    """
    if not 0 < hct_raw < 100:
        raise ValueError("hematocrit must be a percentage in (0, 100)")
    return sum(hct_raw >= t for t in _BAG_THRESHOLDS[_normalise_sex(sex)])


def _round_half_away(v: float) -> int:
    return int(math.copysign(math.floor(abs(v) + 0.5), v))


def discretize_transfusion(delta_hct_raw: float, baseline: int) -> int:
    """Bags for a prescribed hematocrit increase, capped at 3 minus baseline."""
    if not 0 <= baseline <= MAX_BAGS:
        raise ValueError("baseline must be in [0, 3]")
    bags = _round_half_away(delta_hct_raw / HCT_PER_BAG)
    return int(min(max(bags, 0), MAX_BAGS - baseline))


def apply_treatment(x, hct_feature: int | str, bags: int,
                    scaling: Optional[ScalingParams]) -> np.ndarray:
    """Raise the (scaled) hematocrit of ``x`` by 3 points per bag."""
    if not 0 <= bags <= MAX_BAGS:
        raise ValueError("bags must be in [0, 3]")
    if scaling is None:
        raise ValueError("scaling parameters are required to apply a treatment")
    if isinstance(hct_feature, str):
        if hct_feature not in scaling.names:
            raise ValueError(f"no scaling for feature {hct_feature!r}")
        col = scaling.index(hct_feature)
    else:
        col = int(hct_feature)
        if not 0 <= col < len(scaling.names):
            raise ValueError(f"no scaling for feature index {col}")
    out = np.array(x, dtype=float)
    if bags:
        raw = float(scaling.unscale(out[col], col)) + HCT_PER_BAG * bags
        out[col] = float(scaling.scale(raw, col))
    return out
