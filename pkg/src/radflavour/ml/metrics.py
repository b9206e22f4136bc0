"""Classification metrics: balanced accuracy, F1, ROC AUC, average
precision, and the corresponding curve points."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core import DomainError


def _check(y_true, other):
    a = np.asarray(y_true)
    b = np.asarray(other)
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError("metric inputs must be aligned 1D arrays")
    return a, b


def confusion(y_true, y_pred):
    """(tp, fp, tn, fn) for the positive class 1."""
    t, p = _check(y_true, y_pred)
    tp = int(((t == 1) & (p == 1)).sum())
    fp = int(((t == 0) & (p == 1)).sum())
    tn = int(((t == 0) & (p == 0)).sum())
    fn = int(((t == 1) & (p == 0)).sum())
    return tp, fp, tn, fn


def accuracy(y_true, y_pred) -> float:
    t, p = _check(y_true, y_pred)
    return float((t == p).mean())


def balanced_accuracy(y_true, y_pred) -> float:
    tp, fp, tn, fn = confusion(y_true, y_pred)
    tpr = tp / (tp + fn) if tp + fn else 0.0
    tnr = tn / (tn + fp) if tn + fp else 0.0
    return 0.5 * (tpr + tnr)


def f1_score(y_true, y_pred) -> float:
    tp, fp, tn, fn = confusion(y_true, y_pred)
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def roc_auc(y_true, y_score) -> Optional[float]:
    """Pair-counting AUC with half credit for score ties; None when
    y_true has a single class."""
    t, s = _check(y_true, y_score)
    pos = s[t == 1]
    neg = s[t == 0]
    if len(pos) == 0 or len(neg) == 0:
        return None
    gt = (pos[:, None] > neg[None, :]).sum()
    eq = (pos[:, None] == neg[None, :]).sum()
    return float((gt + 0.5 * eq) / (len(pos) * len(neg)))


def roc_points(y_true, y_score) -> list[tuple[float, float]]:
    """(FPR, TPR) points from (0,0) to (1,1), one per distinct score
    threshold, descending."""
    t, s = _check(y_true, y_score)
    n_pos = int((t == 1).sum())
    n_neg = int((t == 0).sum())
    points = [(0.0, 0.0)]
    for thr in np.unique(s)[::-1]:
        pred = s >= thr
        tp = int((pred & (t == 1)).sum())
        fp = int((pred & (t == 0)).sum())
        points.append((fp / n_neg if n_neg else 0.0,
                       tp / n_pos if n_pos else 0.0))
    if points[-1] != (1.0, 1.0):
        points.append((1.0, 1.0))
    return points


def trapezoid_auc(points) -> float:
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points[:-1], points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def pr_points(y_true, y_score) -> list[tuple[float, float]]:
    """(recall, precision) per distinct threshold, descending; starts
    at (0, 1) by convention."""
    t, s = _check(y_true, y_score)
    n_pos = int((t == 1).sum())
    points = [(0.0, 1.0)]
    for thr in np.unique(s)[::-1]:
        pred = s >= thr
        tp = int((pred & (t == 1)).sum())
        fp = int((pred & (t == 0)).sum())
        if tp + fp == 0:
            continue
        points.append((tp / n_pos if n_pos else 0.0, tp / (tp + fp)))
    return points


def average_precision(y_true, y_score) -> Optional[float]:
    """Step-interpolated AP of the positive class."""
    t, s = _check(y_true, y_score)
    n_pos = int((t == 1).sum())
    if n_pos == 0 or n_pos == len(t):
        return None
    ap = 0.0
    prev_recall = 0.0
    for thr in np.unique(s)[::-1]:
        pred = s >= thr
        tp = int((pred & (t == 1)).sum())
        fp = int((pred & (t == 0)).sum())
        recall = tp / n_pos
        precision = tp / (tp + fp)
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return float(ap)


@dataclass
class MetricsReport:
    """All metrics of one evaluation; AUC/AP are None for single-class
    truth vectors."""

    n: int
    accuracy: float
    balanced_accuracy: float
    f1: float
    roc_auc: Optional[float]
    average_precision: Optional[float]
    roc: Optional[list] = None
    pr: Optional[list] = None

    @classmethod
    def from_predictions(cls, y_true, y_pred, y_score=None,
                         curves: bool = False) -> "MetricsReport":
        if y_score is None:
            y_score = np.asarray(y_pred, dtype=np.float64)
        auc = roc_auc(y_true, y_score)
        ap = average_precision(y_true, y_score)
        roc = pr = None
        if curves and auc is not None:
            roc = roc_points(y_true, y_score)
            pr = pr_points(y_true, y_score)
        return cls(len(np.asarray(y_true)), accuracy(y_true, y_pred),
                   balanced_accuracy(y_true, y_pred), f1_score(y_true, y_pred),
                   auc, ap, roc, pr)

    def to_json_dict(self) -> dict:
        out = {
            "n": self.n,
            "accuracy": self.accuracy,
            "balanced_accuracy": self.balanced_accuracy,
            "f1": self.f1,
            "roc_auc": self.roc_auc,
            "average_precision": self.average_precision,
        }
        if self.roc is not None:
            out["roc"] = [list(p) for p in self.roc]
        if self.pr is not None:
            out["pr"] = [list(p) for p in self.pr]
        return out
