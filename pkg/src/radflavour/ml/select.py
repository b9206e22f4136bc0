"""Feature selection: ANOVA F ranking and sequential forward search."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..core import DomainError
from .metrics import f1_score


def anova_f(X, y) -> np.ndarray:
    """Per-column one-way F statistic for a binary grouping.

    Columns with zero within-group variance but differing means get
    the +inf sentinel so they rank first; columns with equal group
    means score 0 regardless of spread.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    classes = np.unique(y)
    if len(classes) < 2:
        raise DomainError("ANOVA F needs both classes present")
    n, d = X.shape
    k = len(classes)
    grand = X.mean(axis=0)
    ssb = np.zeros(d)
    ssw = np.zeros(d)
    for c in classes:
        sub = X[y == c]
        mu = sub.mean(axis=0)
        ssb += len(sub) * (mu - grand) ** 2
        ssw += ((sub - mu) ** 2).sum(axis=0)
    msb = ssb / (k - 1)
    msw = ssw / (n - k)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = msb / msw
    f[msw == 0] = np.inf
    f[msb == 0] = 0.0
    return f


def anova_f_select(X, y, top_k: int) -> np.ndarray:
    """Indices (ascending) of the ``top_k`` highest-F columns.

    Ties in F fall to the lower column index via a stable ranking.
    """
    X = np.asarray(X, dtype=np.float64)
    if top_k < 1 or top_k > X.shape[1]:
        raise DomainError(
            f"top_k={top_k} outside [1, {X.shape[1]}]")
    scores = anova_f(X, y)
    order = np.argsort(-scores, kind="stable")
    return np.sort(order[:top_k])


class AnovaStage:
    """Pipeline transformer keeping the top-k columns by ANOVA F."""

    def __init__(self, top_k: int):
        self.top_k = top_k
        self.selected_ = None

    def clone(self) -> "AnovaStage":
        return AnovaStage(self.top_k)

    def get_state(self) -> dict:
        if self.selected_ is None:
            return {}
        return {"selected": self.selected_}

    def fit(self, X, y, seed: int = 0) -> "AnovaStage":
        if y is None:
            raise DomainError("ANOVA selection needs labels")
        self.selected_ = anova_f_select(X, y, self.top_k)
        return self

    def transform(self, X) -> np.ndarray:
        if self.selected_ is None:
            raise DomainError("stage is not fitted")
        return np.asarray(X, dtype=np.float64)[:, self.selected_]


def _subset_f1(X, y, groups, cols, model, plan, seed: int) -> float:
    """Mean F1 of `model` on `cols` over the folds of `plan`."""
    cols = list(cols)
    scores = []
    for fi, (tr, te) in enumerate(plan.folds(y, groups)):
        m = model.clone()
        m.fit(X[np.ix_(tr, cols)], y[tr],
              seed=int(np.random.default_rng([seed, fi]).integers(2 ** 31)))
        pred = m.predict(X[np.ix_(te, cols)])
        scores.append(f1_score(y[te], pred))
    return float(np.mean(scores))


def sfs_forward(X, y, model, k_range: Sequence[int], plan,
                groups=None, seed: int = 0):
    """Greedy forward selection scored by mean inner-CV F1.

    Grows the subset one column at a time, always adding the column
    with the best objective (ties fall to the lower column index),
    then returns the prefix whose size lies in ``k_range`` with the
    highest score.  Returns (columns in addition order, score).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    d = X.shape[1]
    k_range = sorted(set(int(k) for k in k_range))
    if not k_range or k_range[0] < 1 or k_range[-1] > d:
        raise DomainError(f"k_range must lie within [1, {d}]")
    selected: list[int] = []
    remaining = list(range(d))
    best_at_k = {}
    for _ in range(k_range[-1]):
        best_col = None
        best_score = -np.inf
        for c in remaining:
            s = _subset_f1(X, y, groups, selected + [c], model, plan, seed)
            if s > best_score:
                best_score = s
                best_col = c
        selected.append(best_col)
        remaining.remove(best_col)
        if len(selected) in k_range:
            best_at_k[len(selected)] = best_score
    k_best = max(best_at_k, key=lambda k: (best_at_k[k], -k))
    return selected[:k_best], best_at_k[k_best]


class SfsStage:
    """Pipeline transformer wrapping sequential forward selection.

    The inner plan is stratified with ``inner_splits`` folds and a
    seed derived from the fit seed, so nested use stays deterministic.
    """

    def __init__(self, model, k_range: Sequence[int],
                 inner_splits: int = 5):
        self.model = model
        self.k_range = tuple(k_range)
        self.inner_splits = inner_splits
        self.selected_ = None
        self.score_ = None

    def clone(self) -> "SfsStage":
        return SfsStage(self.model.clone(), self.k_range, self.inner_splits)

    def get_state(self) -> dict:
        if self.selected_ is None:
            return {}
        return {"selected": np.asarray(self.selected_),
                "score": self.score_}

    def fit(self, X, y, seed: int = 0) -> "SfsStage":
        from .validate import FoldPlan
        if y is None:
            raise DomainError("SFS needs labels")
        plan = FoldPlan(self.inner_splits, kind="stratified", seed=seed)
        ks = [k for k in self.k_range if k <= np.asarray(X).shape[1]]
        if not ks:
            raise DomainError("k_range exceeds column count")
        self.selected_, self.score_ = sfs_forward(
            X, y, self.model, ks, plan, seed=seed)
        return self

    def transform(self, X) -> np.ndarray:
        if self.selected_ is None:
            raise DomainError("stage is not fitted")
        return np.asarray(X, dtype=np.float64)[:, self.selected_]
