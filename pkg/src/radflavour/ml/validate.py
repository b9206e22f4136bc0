"""Cross-validation: fold plans, stage pipelines, leakage auditing.

A pipeline is an ordered list of named stages.  Stage roles are duck
typed: anything with ``fit_resample`` is a resampler (train rows
only), anything with ``transform`` is a transformer, and the final
stage must be a model with ``predict``.  Every stage supports
``clone()`` and ``get_state()``; the audit mode exploits that to
prove no fitted statistic depends on test rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core import DomainError
from .data import Dataset
from .metrics import MetricsReport, balanced_accuracy, f1_score, roc_auc, accuracy


class LeakageError(DomainError):
    """A pipeline stage read test rows during fitting."""


def _derive_seed(*parts) -> int:
    return int(np.random.default_rng(list(parts)).integers(2 ** 31))


@dataclass
class FoldPlan:
    """K-fold assignment recipe, stratified or grouped.

    Stratified plans shuffle each class separately and deal cases
    round-robin, so fold class ratios match within one case.  Grouped
    plans keep every group (patient) intact: groups are shuffled,
    ordered largest first, and each lands in the currently smallest
    fold.
    """

    n_splits: int
    kind: str = "stratified"
    seed: int = 0

    def __post_init__(self):
        if self.n_splits < 2:
            raise DomainError("need at least 2 folds")
        if self.kind not in ("stratified", "grouped"):
            raise DomainError(f"unknown fold plan kind: {self.kind}")

    def assignments(self, y, groups=None) -> np.ndarray:
        y = np.asarray(y)
        n = len(y)
        fold_of = np.full(n, -1, dtype=np.int64)
        if self.kind == "stratified":
            for c in np.unique(y):
                idx = np.flatnonzero(y == c)
                rng = np.random.default_rng([self.seed, int(c)])
                rng.shuffle(idx)
                for j, i in enumerate(idx):
                    fold_of[i] = j % self.n_splits
        else:
            if groups is None:
                raise DomainError("grouped plan needs group labels")
            groups = np.asarray(groups)
            uniq, first = np.unique(groups, return_index=True)
            uniq = uniq[np.argsort(first)]
            sizes = {g: int((groups == g).sum()) for g in uniq}
            order = list(uniq)
            np.random.default_rng([self.seed, 17]).shuffle(order)
            order.sort(key=lambda g: -sizes[g])
            load = [0] * self.n_splits
            for g in order:
                f = int(np.argmin(load))
                fold_of[groups == g] = f
                load[f] += sizes[g]
        counts = np.bincount(fold_of, minlength=self.n_splits)
        if (counts == 0).any():
            raise DomainError(
                "fold plan leaves an empty fold; reduce n_splits")
        return fold_of

    def folds(self, y, groups=None):
        """Yield (train_idx, test_idx) pairs in fold order."""
        fold_of = self.assignments(y, groups)
        for f in range(self.n_splits):
            te = np.flatnonzero(fold_of == f)
            tr = np.flatnonzero(fold_of != f)
            yield tr, te


class Pipeline:
    """Ordered stages fit strictly on training rows.

    ``steps`` is a list of (name, stage).  During ``fit``, resamplers
    rewrite the working training arrays, transformers are fit then
    applied, and the last stage is fit as the model.  Prediction
    replays the fitted transformers.
    """

    def __init__(self, steps: Sequence[Tuple[str, object]]):
        if not steps:
            raise DomainError("pipeline needs at least one stage")
        names = [n for n, _ in steps]
        if len(set(names)) != len(names):
            raise DomainError("duplicate stage names")
        last = steps[-1][1]
        if not hasattr(last, "predict"):
            raise DomainError("last pipeline stage must be a model")
        self.steps = list(steps)

    def clone(self) -> "Pipeline":
        return Pipeline([(n, s.clone()) for n, s in self.steps])

    def get_state(self) -> Dict[str, dict]:
        return {n: s.get_state() for n, s in self.steps}

    def fit(self, X, y, groups=None, seed: int = 0) -> "Pipeline":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        if groups is None:
            groups = np.array([f"g{i}" for i in range(len(y))])
        for i, (name, stage) in enumerate(self.steps):
            stage_seed = _derive_seed(seed, i)
            if i == len(self.steps) - 1:
                stage.fit(X, y, seed=stage_seed)
            elif hasattr(stage, "fit_resample"):
                X, y, groups = stage.fit_resample(
                    X, y, groups, seed=stage_seed)
            else:
                stage.fit(X, y, seed=stage_seed)
                X = stage.transform(X)
        return self

    def _apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        for name, stage in self.steps[:-1]:
            if hasattr(stage, "fit_resample"):
                continue
            X = stage.transform(X)
        return X

    def predict(self, X) -> np.ndarray:
        return self.steps[-1][1].predict(self._apply(X))

    def predict_proba(self, X) -> np.ndarray:
        model = self.steps[-1][1]
        if not hasattr(model, "predict_proba"):
            raise DomainError("model has no predict_proba")
        return model.predict_proba(self._apply(X))


@dataclass
class CvReport:
    """Per-fold and pooled cross-validation results."""

    fold_metrics: List[MetricsReport]
    oof_pred: np.ndarray
    oof_proba: np.ndarray
    fold_of: np.ndarray
    chosen: Optional[List[str]] = None
    pooled: Optional[MetricsReport] = None

    def mean(self, name: str) -> float:
        vals = [getattr(m, name) for m in self.fold_metrics]
        vals = [v for v in vals if v is not None]
        return float(np.mean(vals)) if vals else float("nan")

    def std(self, name: str) -> float:
        vals = [getattr(m, name) for m in self.fold_metrics]
        vals = [v for v in vals if v is not None]
        return float(np.std(vals)) if vals else float("nan")

    def fold_values(self, name: str) -> np.ndarray:
        return np.array([np.nan if getattr(m, name) is None
                         else getattr(m, name)
                         for m in self.fold_metrics])

    def to_json_dict(self) -> dict:
        out = {
            "folds": [m.to_json_dict() for m in self.fold_metrics],
            "mean": {k: self.mean(k) for k in
                     ("balanced_accuracy", "f1", "accuracy")},
            "std": {k: self.std(k) for k in
                    ("balanced_accuracy", "f1", "accuracy")},
        }
        if self.pooled is not None:
            out["pooled"] = self.pooled.to_json_dict()
        if self.chosen is not None:
            out["chosen"] = list(self.chosen)
        return out


def _states_equal(a, b) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, dict):
        if set(a) != set(b):
            return False
        return all(_states_equal(a[k], b[k]) for k in a)
    if isinstance(a, (list, tuple)):
        if len(a) != len(b):
            return False
        return all(_states_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return a.shape == b.shape and a.dtype == b.dtype and \
            np.array_equal(a, b, equal_nan=True)
    if isinstance(a, float) and np.isnan(a) and np.isnan(b):
        return True
    return a == b


def _audit_fold(pipeline, ds, tr, te, fold_seed, fold_index):
    """Fit twice, scrambling the test rows of the shared matrix
    in between; a stage whose fitted state or predictions change
    must have read test rows."""
    X_te_orig = ds.X[te].copy()
    p1 = pipeline.clone()
    p1.fit(ds.X[tr], ds.y[tr], ds.groups[tr], seed=fold_seed)
    state1 = p1.get_state()
    pred1 = p1.predict(X_te_orig)
    proba1 = p1.predict_proba(X_te_orig)

    # An identical refit must reproduce the state exactly, otherwise
    # state drift would be misread as leakage.
    p0 = pipeline.clone()
    p0.fit(ds.X[tr], ds.y[tr], ds.groups[tr], seed=fold_seed)
    drift = [name for name in state1
             if not _states_equal(state1[name], p0.get_state()[name])]
    if drift:
        raise DomainError(
            f"stages are not deterministic under refit: {', '.join(drift)}")

    rng = np.random.default_rng([987654321, fold_index])
    ds.X[te] = rng.normal(loc=1e3, scale=1e3, size=X_te_orig.shape)
    try:
        p2 = pipeline.clone()
        p2.fit(ds.X[tr], ds.y[tr], ds.groups[tr], seed=fold_seed)
        state2 = p2.get_state()
        pred2 = p2.predict(X_te_orig)
        proba2 = p2.predict_proba(X_te_orig)
    finally:
        ds.X[te] = X_te_orig

    flags = [name for name in state1
             if not _states_equal(state1[name], state2[name])]
    if not np.array_equal(pred1, pred2) or \
            not np.array_equal(proba1, proba2):
        if not flags:
            flags.append("<predictions>")
    return flags


def cross_validate(pipeline: Pipeline, ds: Dataset, plan: FoldPlan,
                   audit: bool = False) -> CvReport:
    """Out-of-fold evaluation of a pipeline under a fold plan.

    With ``audit=True`` each fold is additionally refit after the
    test rows of the dataset matrix are scrambled in place; any stage
    whose fitted state or predictions shift is reported in a
    :class:`LeakageError`.  Grouped plans are always checked for
    train/test group disjointness.
    """
    fold_of = plan.assignments(ds.y, ds.groups)
    n = ds.n
    oof_pred = np.full(n, -1, dtype=np.int64)
    oof_proba = np.full(n, np.nan)
    fold_metrics = []
    leaks: Dict[int, List[str]] = {}
    for f in range(plan.n_splits):
        te = np.flatnonzero(fold_of == f)
        tr = np.flatnonzero(fold_of != f)
        if plan.kind == "grouped":
            shared = set(ds.groups[tr]) & set(ds.groups[te])
            if shared:
                raise DomainError(
                    f"group plan split groups across folds: {sorted(shared)}")
        fold_seed = _derive_seed(plan.seed, f)
        if audit:
            flags = _audit_fold(pipeline, ds, tr, te, fold_seed, f)
            if flags:
                leaks[f] = flags
        fitted = pipeline.clone()
        fitted.fit(ds.X[tr], ds.y[tr], ds.groups[tr], seed=fold_seed)
        pred = fitted.predict(ds.X[te])
        proba = fitted.predict_proba(ds.X[te])
        oof_pred[te] = pred
        oof_proba[te] = proba
        fold_metrics.append(MetricsReport.from_predictions(
            ds.y[te], pred, proba))
    if leaks:
        detail = "; ".join(f"fold {f}: {', '.join(v)}"
                           for f, v in sorted(leaks.items()))
        raise LeakageError(f"stages depend on test rows ({detail})")
    pooled = MetricsReport.from_predictions(ds.y, oof_pred, oof_proba,
                                            curves=True)
    return CvReport(fold_metrics, oof_pred, oof_proba, fold_of,
                    pooled=pooled)


_SELECT_METRICS = {
    "balanced_accuracy": lambda yt, yp, ys: balanced_accuracy(yt, yp),
    "f1": lambda yt, yp, ys: f1_score(yt, yp),
    "accuracy": lambda yt, yp, ys: accuracy(yt, yp),
    "roc_auc": lambda yt, yp, ys: roc_auc(yt, ys),
}


def nested_cross_validate(candidates, ds: Dataset, plan: FoldPlan,
                          inner_splits: int = 5,
                          metric: str = "balanced_accuracy") -> CvReport:
    """Outer-fold evaluation with inner-fold model selection.

    ``candidates`` is a list of (name, pipeline).  For each outer
    fold the candidate with the best mean inner-CV ``metric`` on the
    training part wins (ties keep the earliest candidate), is refit
    on the full training part, and predicts the held-out fold.
    """
    candidates = list(candidates)
    if not candidates:
        raise DomainError("need at least one candidate pipeline")
    if metric not in _SELECT_METRICS:
        raise DomainError(f"unknown selection metric: {metric}")
    score_fn = _SELECT_METRICS[metric]
    fold_of = plan.assignments(ds.y, ds.groups)
    n = ds.n
    oof_pred = np.full(n, -1, dtype=np.int64)
    oof_proba = np.full(n, np.nan)
    fold_metrics = []
    chosen = []
    for f in range(plan.n_splits):
        te = np.flatnonzero(fold_of == f)
        tr = np.flatnonzero(fold_of != f)
        inner = FoldPlan(inner_splits, kind=plan.kind,
                         seed=_derive_seed(plan.seed, f, 7))
        sub = ds.subset(tr)
        best_name = None
        best_score = -np.inf
        best_pipe = None
        for name, pipe in candidates:
            scores = []
            for fi, (itr, ite) in enumerate(inner.folds(sub.y, sub.groups)):
                fitted = pipe.clone()
                fitted.fit(sub.X[itr], sub.y[itr], sub.groups[itr],
                           seed=_derive_seed(inner.seed, fi))
                yp = fitted.predict(sub.X[ite])
                ys = fitted.predict_proba(sub.X[ite])
                val = score_fn(sub.y[ite], yp, ys)
                scores.append(0.0 if val is None else val)
            mean_score = float(np.mean(scores))
            if mean_score > best_score:
                best_score = mean_score
                best_name = name
                best_pipe = pipe
        chosen.append(best_name)
        fitted = best_pipe.clone()
        fitted.fit(ds.X[tr], ds.y[tr], ds.groups[tr],
                   seed=_derive_seed(plan.seed, f))
        pred = fitted.predict(ds.X[te])
        proba = fitted.predict_proba(ds.X[te])
        oof_pred[te] = pred
        oof_proba[te] = proba
        fold_metrics.append(MetricsReport.from_predictions(
            ds.y[te], pred, proba))
    pooled = MetricsReport.from_predictions(ds.y, oof_pred, oof_proba,
                                            curves=True)
    return CvReport(fold_metrics, oof_pred, oof_proba, fold_of,
                    chosen=chosen, pooled=pooled)
