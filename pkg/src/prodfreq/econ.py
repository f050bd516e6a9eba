"""Cobb-Douglas fitting and multi-input geometric-mean composition.

All quantities are in log scale.  With complementary elasticities
(alpha + beta = 1) the production function linearizes to

    y = ln_A + (1 - alpha) * l + alpha * k

which is fitted by regressing ``y - l`` on ``k - l`` with an intercept.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from prodfreq.eventlog import ProductionSignal
from prodfreq.errors import (
    InsufficientDataError,
    UnidentifiableAlphaError,
    UndefinedMetricError,
    WeightError,
)


@dataclass(frozen=True)
class CobbDouglasFit:
    ln_A: float
    alpha: float
    residual_rms: float
    n_points: int
    clamped: bool = False
    activity: str = ""

    @property
    def beta(self) -> float:
        return 1.0 - self.alpha

    def predict(self, l, k):
        return self.ln_A + (1.0 - self.alpha) * np.asarray(l) + self.alpha * np.asarray(k)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CompositionWeights:
    lambdas: tuple[float, ...] = (0.5, 0.5)
    q: float = field(default=1.0)

    def __post_init__(self):
        if abs(math.fsum(self.lambdas) - 1.0) > 1e-12:
            raise WeightError("composition weights must sum to 1", lambdas=list(self.lambdas))
        if self.q != 1.0:
            raise WeightError("efficiency parameter q is fixed at 1 (zero initial conditions)")

    @classmethod
    def equal(cls, n: int) -> "CompositionWeights":
        return cls(tuple([1.0 / n] * n))


def _usable(*signals: ProductionSignal) -> np.ndarray:
    mask = np.ones(len(signals[0]), dtype=bool)
    for s in signals:
        mask &= ~s.off
    return mask


def fit_cobb_douglas(y: ProductionSignal, l: ProductionSignal, k: ProductionSignal, activity: str = "") -> CobbDouglasFit:
    """Least-squares Cobb-Douglas fit on log-scale signals.

    Bins where any of the three signals is off are dropped.  ``alpha`` is
    clamped into [0, 1] and the fit flagged when that happens; ``ln_A`` is
    then re-estimated for the clamped slope.
    """
    if not (len(y) == len(l) == len(k)):
        raise InsufficientDataError("signals differ in length", lengths=[len(y), len(l), len(k)])
    for s in (y, l, k):
        if s.scale != "log":
            raise ValueError(f"signal {s.label!r} must be log-scale")
    mask = _usable(y, l, k)
    n = int(mask.sum())
    if n < 2:
        raise InsufficientDataError(f"only {n} usable bins; need at least 2")
    yy, ll, kk = y.values[mask], l.values[mask], k.values[mask]
    return _fit_arrays(yy, ll, kk, activity)


def _fit_arrays(yy: np.ndarray, ll: np.ndarray, kk: np.ndarray, activity: str = "") -> CobbDouglasFit:
    target = yy - ll
    x = kk - ll
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if np.ptp(x) <= 1e-12 * max(1.0, float(np.max(np.abs(x)))):
        raise UnidentifiableAlphaError(
            "capital and labour inputs are collinear; alpha is not identifiable",
            ln_A=float(target.mean()),
        )
    alpha = float(xc @ (target - target.mean())) / sxx
    clamped = not 0.0 <= alpha <= 1.0
    alpha = min(max(alpha, 0.0), 1.0)
    ln_A = float(np.mean(target - alpha * x))
    resid = target - ln_A - alpha * x
    rms = float(np.sqrt(np.mean(resid**2)))
    return CobbDouglasFit(ln_A=ln_A, alpha=alpha, residual_rms=rms, n_points=len(yy), clamped=clamped, activity=activity)


def compose_geometric(inputs: Sequence[float] | float, *more: float, weights: CompositionWeights | None = None) -> float:
    """Log-scale weighted geometric mean: sum(lambda_j * x_j) + ln q.

    Accepts either ``compose_geometric(y_a, y_i)`` or a sequence of inputs.
    """
    xs = list(inputs) if isinstance(inputs, (list, tuple, np.ndarray)) else [inputs, *more]
    if weights is None:
        weights = CompositionWeights.equal(len(xs))
    if len(weights.lambdas) != len(xs):
        raise WeightError("number of weights differs from number of inputs")
    return math.fsum(w * x for w, x in zip(weights.lambdas, xs)) + math.log(weights.q)


def accuracy_from_confusion(tp: int, tn: int, fp: int, fn: int) -> float:
    counts = (tp, tn, fp, fn)
    if any(c < 0 for c in counts):
        raise UndefinedMetricError("confusion counts must be non-negative")
    total = sum(counts)
    if total == 0:
        raise UndefinedMetricError("accuracy undefined for an empty confusion matrix")
    return (tp + tn) / total
