"""Test-phase scoring, confusion counts, cost, ROC/AUC and timing.

Fraud is the positive class throughout. A record is scored by its mean
range-normalised distance to the learned detectors and labelled legitimate
when that score is strictly below the threshold.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass
from typing import Callable, TypeVar

import numpy as np
from scipy.stats import rankdata

from .dataset import Label
from .detectors import DetectorSet
from .fitness import SortedColumns

__all__ = [
    "ConfusionMatrix",
    "MetricsReport",
    "score",
    "score_many",
    "score_against_rows",
    "classify",
    "confusion",
    "metrics",
    "cost",
    "roc_auc",
    "roc_threshold",
    "timed",
    "write_roc_csv",
]

T = TypeVar("T")

UNDEFINED = math.nan


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)


@dataclass
class MetricsReport:
    """Ratio metrics are ``nan`` when their denominator is zero."""

    sensitivity: float
    precision: float
    specificity: float
    accuracy: float
    cost: float = 0.0
    auc: float = UNDEFINED
    train_time_s: float = UNDEFINED
    test_time_s: float = UNDEFINED

    FIELDS = ("sensitivity", "precision", "specificity", "accuracy", "cost", "auc", "train_time_s", "test_time_s")

    def to_dict(self) -> dict:
        """JSON-ready dict; undefined values become ``None``."""
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(**{k: (UNDEFINED if d.get(k) is None else d[k]) for k in cls.FIELDS})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _check_width(X: np.ndarray, detectors: DetectorSet):
    if X.shape[-1] != detectors.feature_count:
        raise ValueError(f"record has {X.shape[-1]} features, detectors have {detectors.feature_count}")


def score(record, detectors: DetectorSet) -> float:
    """Mean normalised distance of one record to every detector."""
    x = np.asarray(record, dtype=np.float64)
    _check_width(x, detectors)
    return float(detectors.index.mean_distance(x))


def score_many(records, detectors: DetectorSet) -> np.ndarray:
    X = np.atleast_2d(np.asarray(records, dtype=np.float64))
    _check_width(X, detectors)
    return detectors.index.mean_distance(X)


def score_against_rows(records, rows, bounds) -> np.ndarray:
    """Score against an arbitrary reference matrix (e.g. the raw training normals)."""
    return SortedColumns(rows, bounds).mean_distance(np.atleast_2d(records))


def classify(record, detectors: DetectorSet, threshold: float) -> Label:
    return Label.LEGITIMATE if score(record, detectors) < threshold else Label.FRAUDULENT


def confusion(scores, labels, threshold: float) -> ConfusionMatrix:
    """Count outcomes with ``score >= threshold`` predicted fraudulent."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    pred = s >= threshold
    return ConfusionMatrix(
        tp=int(np.count_nonzero(pred & y)),
        fp=int(np.count_nonzero(pred & ~y)),
        tn=int(np.count_nonzero(~pred & ~y)),
        fn=int(np.count_nonzero(~pred & y)),
    )


def _ratio(num: int, den: int) -> float:
    return num / den if den else UNDEFINED


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    return MetricsReport(
        sensitivity=_ratio(cm.tp, cm.tp + cm.fn),
        precision=_ratio(cm.tp, cm.tp + cm.fp),
        specificity=_ratio(cm.tn, cm.fp + cm.tn),
        accuracy=_ratio(cm.tp + cm.tn, cm.total),
        cost=cost(cm),
    )


def cost(cm: ConfusionMatrix) -> int:
    """$100 per missed fraud, $10 per false alarm, $1 per caught fraud."""
    return 100 * cm.fn + 10 * cm.fp + cm.tp


def roc_auc(scores, labels) -> tuple[np.ndarray, np.ndarray, float]:
    """ROC curve over every distinct score threshold, and its AUC.

    The AUC is the Mann-Whitney statistic ``U / (n_fraud * n_legit)`` with
    ties counted as one half, which equals the trapezoidal area under the
    returned curve.

    Returns
    -------
    fpr, tpr : ndarray
        Curve points from (0, 0) to (1, 1), thresholds descending.
    auc : float
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs at least one record of each class")
    ranks = rankdata(s)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    auc = u / (n_pos * n_neg)

    order = np.argsort(-s, kind="mergesort")
    s_sorted, y_sorted = s[order], y[order]
    last_of_run = np.r_[np.diff(s_sorted) != 0, True]
    tps = np.cumsum(y_sorted)[last_of_run]
    fps = np.cumsum(~y_sorted)[last_of_run]
    tpr = np.r_[0.0, tps / n_pos]
    fpr = np.r_[0.0, fps / n_neg]
    return fpr, tpr, float(auc)


def roc_threshold(scores, labels) -> float:
    """Score threshold maximising sensitivity + specificity (closest to the top-left corner)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    pos, neg = np.sort(s[y]), np.sort(s[~y])
    if pos.size == 0 or neg.size == 0:
        raise ValueError("threshold selection needs at least one record of each class")
    # fraud predicted at score >= t; the trailing inf means "never fraud"
    cand = np.r_[np.unique(s), math.inf]
    tpr = (pos.size - np.searchsorted(pos, cand, side="left")) / pos.size
    tnr = np.searchsorted(neg, cand, side="left") / neg.size
    return float(cand[np.argmax(tpr + tnr)])


def timed(fn: Callable[..., T], *args, **kwargs) -> tuple[T, float]:
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def write_roc_csv(fpr, tpr, fh) -> None:
    fh.write("fpr,tpr\n")
    for a, b in zip(fpr, tpr):
        fh.write(f"{a:.9g},{b:.9g}\n")
