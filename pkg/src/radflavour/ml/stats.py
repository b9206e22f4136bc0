"""Paired significance tests for classifier comparisons."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from ..core import DomainError


@dataclass(frozen=True)
class McNemarResult:
    b: int
    c: int
    statistic: float
    p_value: float
    method: str

    def to_json_dict(self) -> dict:
        return {"b": self.b, "c": self.c, "statistic": self.statistic,
                "p_value": self.p_value, "method": self.method}


def mcnemar(preds_a, preds_b, y_true) -> McNemarResult:
    """McNemar's test on paired predictions.

    Counts disagreements where exactly one model is right: b (only A
    right) and c (only B right).  Small discordant totals (< 25) use
    the exact two-sided binomial; larger ones the continuity-corrected
    chi-square.  No disagreement at all gives p = 1.
    """
    a = np.asarray(preds_a)
    bpred = np.asarray(preds_b)
    y = np.asarray(y_true)
    if not (a.shape == bpred.shape == y.shape):
        raise DomainError("prediction vectors must align with labels")
    ok_a = a == y
    ok_b = bpred == y
    b = int((ok_a & ~ok_b).sum())
    c = int((~ok_a & ok_b).sum())
    n = b + c
    if n == 0:
        return McNemarResult(b, c, 0.0, 1.0, "exact")
    if n < 25:
        m = min(b, c)
        tail = sum(math.comb(n, i) for i in range(m + 1)) / 2.0 ** n
        return McNemarResult(b, c, float(m), min(1.0, 2.0 * tail), "exact")
    stat = (abs(b - c) - 1) ** 2 / n
    return McNemarResult(b, c, float(stat),
                         float(sps.chi2.sf(stat, df=1)), "chi2")


@dataclass(frozen=True)
class TTestResult:
    t: float
    p_value: float
    t_plain: float
    p_plain: float
    mean_diff: float
    k: int

    def to_json_dict(self) -> dict:
        return {"t": self.t, "p_value": self.p_value,
                "t_plain": self.t_plain, "p_plain": self.p_plain,
                "mean_diff": self.mean_diff, "k": self.k}


def corrected_resampled_ttest(scores_a, scores_b, n_train: int,
                              n_test: int) -> TTestResult:
    """Paired t-test over fold scores with resampling correction.

    The corrected variance term (1/k + n_test/n_train)·s² accounts
    for the overlap between CV training sets; the uncorrected paired
    statistic is reported alongside.  Zero variance degenerates to
    t=0, p=1 when the mean difference is also zero, otherwise to an
    infinite statistic with p reported as 0.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError("fold score vectors must have equal length")
    k = len(a)
    if k < 2:
        raise DomainError("need at least 2 folds")
    if n_train < 1 or n_test < 1:
        raise DomainError("fold sizes must be positive")
    d = a - b
    dbar = float(d.mean())
    s2 = float(d.var(ddof=1))
    if s2 == 0.0:
        if dbar == 0.0:
            return TTestResult(0.0, 1.0, 0.0, 1.0, 0.0, k)
        inf = math.inf if dbar > 0 else -math.inf
        return TTestResult(inf, 0.0, inf, 0.0, dbar, k)
    corr = (1.0 / k + n_test / n_train) * s2
    t = dbar / math.sqrt(corr)
    t_plain = dbar / math.sqrt(s2 / k)
    p = float(2.0 * sps.t.sf(abs(t), df=k - 1))
    p_plain = float(2.0 * sps.t.sf(abs(t_plain), df=k - 1))
    return TTestResult(t, p, t_plain, p_plain, dbar, k)
