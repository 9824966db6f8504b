"""Welch's unequal-variance t-test with a self-contained Student-t tail.

The two-sided p-value of ``|t|`` on ``dof`` degrees of freedom equals the
regularized incomplete beta ``I_x(dof/2, 1/2)`` at ``x = dof / (dof + t^2)``,
evaluated here with Lentz's continued fraction.
"""

from __future__ import annotations

import math

import numpy as np

_EPS = 1e-15
_TINY = 1e-300
_MAX_TERMS = 10_000


def _betacf(a: float, b: float, x: float) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, _MAX_TERMS + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function ``I_x(a, b)``."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    # the continued fraction converges fast only below the mean a / (a + b)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, dof: float) -> float:
    """``P(|T| >= |t|)`` for Student's t with ``dof`` degrees of freedom."""
    if dof <= 0:
        raise ValueError("dof must be positive")
    if math.isinf(t):
        return 0.0
    return betainc(0.5 * dof, 0.5, dof / (dof + t * t))


def t_cdf(t: float, dof: float) -> float:
    half_tail = 0.5 * t_sf_two_sided(t, dof)
    return 1.0 - half_tail if t >= 0 else half_tail


def welch_t(a, b):
    """Welch's t statistic, Welch-Satterthwaite dof and two-sided p-value.

    When both samples have zero variance the statistic is undefined; the
    convention is ``p = 1`` for equal means (t = 0) and ``p = 0`` otherwise
    (t = +-inf), with ``dof = n_a + n_b - 2``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise ValueError("each sample needs at least two observations")
    ma, mb = a.mean(), b.mean()
    va, vb = a.var(ddof=1) / na, b.var(ddof=1) / nb
    se2 = va + vb
    if se2 == 0.0:
        if ma == mb:
            return 0.0, float(na + nb - 2), 1.0
        return math.copysign(math.inf, ma - mb), float(na + nb - 2), 0.0
    t = (ma - mb) / math.sqrt(se2)
    dof = se2 ** 2 / (va ** 2 / (na - 1) + vb ** 2 / (nb - 1))
    return float(t), float(dof), float(min(1.0, t_sf_two_sided(t, dof)))


def rank_features(data):
    """Per-feature Welch test between the positive and negative cohorts.

    Returns ``(feature_name, p_value)`` pairs by ascending p-value, ties in
    feature order.
    """
    Xp, Xn = data.positives, data.negatives
    pvals = [welch_t(Xp[:, d], Xn[:, d])[2] for d in range(data.n_features)]
    order = sorted(range(len(pvals)), key=lambda d: (pvals[d], d))
    names = data.feature_names
    return [(names[d], pvals[d]) for d in order]
