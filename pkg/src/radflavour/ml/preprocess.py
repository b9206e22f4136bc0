"""Preprocessing: z-scoring, SMOTE resampling, polynomial expansion.

Every pipeline stage implements ``clone()`` (fresh unfitted copy) and
``get_state()`` (fitted arrays only), which the leakage audit uses to
compare refits.
"""

from __future__ import annotations

import itertools

import numpy as np

from ..core import DomainError

MAX_POLY_COLUMNS = 10_000


class ZScaler:
    """Per-column standardization fitted on training rows.

    Zero-variance columns scale by 1, so training values map to 0.
    """

    def __init__(self):
        self.mean_ = None
        self.scale_ = None

    def clone(self) -> "ZScaler":
        return ZScaler()

    def get_state(self) -> dict:
        if self.mean_ is None:
            return {}
        return {"mean": self.mean_, "scale": self.scale_}

    def fit(self, X, y=None, seed=0) -> "ZScaler":
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] < 2:
            raise DomainError("z-scoring needs at least 2 rows")
        self.mean_ = X.mean(axis=0)
        sd = X.std(axis=0)
        self.scale_ = np.where(sd == 0, 1.0, sd)
        return self

    def transform(self, X) -> np.ndarray:
        if self.mean_ is None:
            raise DomainError("scaler is not fitted")
        return (np.asarray(X, dtype=np.float64) - self.mean_) / self.scale_


def zscore_fit_transform(X):
    scaler = ZScaler().fit(X)
    return scaler, scaler.transform(X)


def smote(X, y, groups=None, k: int = 5, seed: int = 0):
    """Balance classes with synthetic minority samples.

    Each synthetic row interpolates a minority row towards one of its
    k nearest minority neighbours: x + u * (x_nn - x), u in (0, 1).
    Synthetic rows inherit the source row's group so group CV remains
    patient-agnostic.  Already balanced input comes back unchanged.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    n1 = int((y == 1).sum())
    n0 = int((y == 0).sum())
    if n0 == n1:
        return X, y, groups
    minority = 1 if n1 < n0 else 0
    idx_min = np.flatnonzero(y == minority)
    n_min = len(idx_min)
    if n_min < 2:
        raise DomainError("SMOTE needs at least 2 minority cases")
    n_new = abs(n0 - n1)
    Xm = X[idx_min]
    # pairwise distances among minority rows; self at +inf
    diff = Xm[:, None, :] - Xm[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    np.fill_diagonal(dist, np.inf)
    k_eff = min(k, n_min - 1)
    nn = np.argsort(dist, axis=1, kind="stable")[:, :k_eff]
    rng = np.random.default_rng(seed)
    new_rows = np.empty((n_new, X.shape[1]))
    new_groups = []
    for i in range(n_new):
        b = i % n_min
        j = nn[b, rng.integers(k_eff)]
        u = rng.random()
        while u == 0.0:
            u = rng.random()
        new_rows[i] = Xm[b] + u * (Xm[j] - Xm[b])
        if groups is not None:
            new_groups.append(groups[idx_min[b]])
    X2 = np.concatenate([X, new_rows], axis=0)
    y2 = np.concatenate([y, np.full(n_new, minority, dtype=y.dtype)])
    g2 = None
    if groups is not None:
        g2 = np.concatenate([np.asarray(groups), np.asarray(new_groups)])
    return X2, y2, g2


class SmoteStage:
    """Resampling stage: balances the training rows only."""

    def __init__(self, k: int = 5):
        self.k = k
        self.n_synthetic_ = None
        self.synthetic_ = None

    def clone(self) -> "SmoteStage":
        return SmoteStage(self.k)

    def get_state(self) -> dict:
        if self.n_synthetic_ is None:
            return {}
        return {"n_synthetic": self.n_synthetic_, "synthetic": self.synthetic_}

    def fit_resample(self, X, y, groups=None, seed: int = 0):
        X2, y2, g2 = smote(X, y, groups, k=self.k, seed=seed)
        self.n_synthetic_ = X2.shape[0] - np.asarray(X).shape[0]
        self.synthetic_ = X2[np.asarray(X).shape[0]:]
        return X2, y2, g2


def polynomial_expand(X, degree: int = 2, names=None):
    """All monomials of the columns up to ``degree``, bias included.

    Columns come out in graded-lexicographic order: [1, x0, x1, x0^2,
    x0*x1, x1^2, ...].  Returns (matrix, column names).
    """
    if degree not in (1, 2, 3):
        raise DomainError("polynomial degree must be 1, 2 or 3")
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if names is None:
        names = [f"x{j}" for j in range(d)]
    terms = [()]
    for deg in range(1, degree + 1):
        terms.extend(itertools.combinations_with_replacement(range(d), deg))
    if len(terms) > MAX_POLY_COLUMNS:
        raise DomainError(
            f"polynomial expansion would produce {len(terms)} columns "
            f"(limit {MAX_POLY_COLUMNS})")
    out = np.empty((n, len(terms)))
    out_names = []
    for c, term in enumerate(terms):
        if not term:
            out[:, c] = 1.0
            out_names.append("1")
        else:
            col = np.ones(n)
            for j in term:
                col = col * X[:, j]
            out[:, c] = col
            out_names.append("*".join(names[j] for j in term))
    return out, out_names


class PolyStage:
    """Transformer wrapper around :func:`polynomial_expand`."""

    def __init__(self, degree: int = 2):
        self.degree = degree
        self.d_in_ = None

    def clone(self) -> "PolyStage":
        return PolyStage(self.degree)

    def get_state(self) -> dict:
        return {} if self.d_in_ is None else {"d_in": self.d_in_}

    def fit(self, X, y=None, seed=0) -> "PolyStage":
        self.d_in_ = np.asarray(X).shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        out, _ = polynomial_expand(X, self.degree)
        return out


class PruneStage:
    """Transformer dropping constant and highly correlated columns.

    Column selection happens on the training rows only; transform
    subsets any matrix to the retained columns.
    """

    def __init__(self, threshold: float = 0.95):
        self.threshold = threshold
        self.kept_ = None

    def clone(self) -> "PruneStage":
        return PruneStage(self.threshold)

    def get_state(self) -> dict:
        return {} if self.kept_ is None else {"kept": self.kept_}

    def fit(self, X, y=None, seed=0) -> "PruneStage":
        from ..tensor import prune_correlated
        X = np.asarray(X, dtype=np.float64)
        _, kept_idx, _ = prune_correlated(
            X, names=list(range(X.shape[1])), threshold=self.threshold)
        if not kept_idx:
            raise DomainError("pruning removed every column")
        self.kept_ = np.asarray(kept_idx, dtype=np.int64)
        return self

    def transform(self, X) -> np.ndarray:
        if self.kept_ is None:
            raise DomainError("stage is not fitted")
        return np.asarray(X, dtype=np.float64)[:, self.kept_]
