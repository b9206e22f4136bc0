"""Classifiers: LDA, logistic regression, random forest, ensembles.

All models share the same small API: ``fit(X, y, seed)``,
``predict(X)``, ``predict_proba(X)`` (probability of class 1),
``clone()`` and ``get_state()``.  Everything is deterministic given
(inputs, seed).
"""

from __future__ import annotations

import warnings

import numpy as np

from ..core import DomainError


class ConvergenceError(DomainError):
    pass


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DomainError("X must be 2D with aligned labels")
    return X, y.astype(np.int64)


class LdaModel:
    """Pooled-covariance linear discriminant with ridge shrinkage.

    The shrinkage (lambda = ridge * trace/d) keeps the pooled
    covariance invertible for collinear or wide data.  The decision
    threshold is the equal-prior midpoint between class means; the
    reported probability squashes the discriminant score through a
    sigmoid.
    """

    def __init__(self, ridge: float = 1e-6):
        self.ridge = ridge
        self.w_ = None
        self.b_ = None

    def clone(self) -> "LdaModel":
        return LdaModel(self.ridge)

    def get_state(self) -> dict:
        if self.w_ is None:
            return {}
        return {"w": self.w_, "b": self.b_}

    def fit(self, X, y, seed: int = 0) -> "LdaModel":
        X, y = _check_xy(X, y)
        n, d = X.shape
        n0 = int((y == 0).sum())
        n1 = int((y == 1).sum())
        if n0 < 2 or n1 < 2:
            raise DomainError("LDA needs at least 2 cases per class")
        if d > n:
            warnings.warn("LDA with more features (%d) than cases (%d); "
                          "relying on shrinkage" % (d, n), stacklevel=2)
        mu0 = X[y == 0].mean(axis=0)
        mu1 = X[y == 1].mean(axis=0)
        d0 = X[y == 0] - mu0
        d1 = X[y == 1] - mu1
        cov = (d0.T @ d0 + d1.T @ d1) / (n - 2)
        lam = self.ridge * np.trace(cov) / d
        if lam == 0:
            lam = 1e-12
        self.w_ = np.linalg.solve(cov + lam * np.eye(d), mu1 - mu0)
        self.b_ = -float(self.w_ @ (mu0 + mu1)) / 2.0
        return self

    def decision_scores(self, X) -> np.ndarray:
        if self.w_ is None:
            raise DomainError("model is not fitted")
        return np.asarray(X, dtype=np.float64) @ self.w_ + self.b_

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.decision_scores(X))

    def predict(self, X) -> np.ndarray:
        return (self.decision_scores(X) >= 0).astype(np.int64)


class LogregModel:
    """L2-regularized logistic regression by damped Newton iterations.

    The intercept is unregularized.  Fitting stops when the gradient
    norm drops below ``tol``; failure to converge within ``max_iter``
    iterations raises :class:`ConvergenceError`.
    """

    def __init__(self, l2: float = 1.0, tol: float = 1e-8,
                 max_iter: int = 200):
        self.l2 = l2
        self.tol = tol
        self.max_iter = max_iter
        self.w_ = None
        self.b_ = None
        self.n_iter_ = None

    def clone(self) -> "LogregModel":
        return LogregModel(self.l2, self.tol, self.max_iter)

    def get_state(self) -> dict:
        if self.w_ is None:
            return {}
        return {"w": self.w_, "b": self.b_, "n_iter": self.n_iter_}

    def _loss(self, X, y, w, b):
        z = X @ w + b
        # log(1 + exp(-|z|)) + max(0, -yz) form keeps this stable
        ll = np.logaddexp(0.0, -z) * y + np.logaddexp(0.0, z) * (1 - y)
        return float(ll.sum() + 0.5 * self.l2 * (w @ w))

    def fit(self, X, y, seed: int = 0) -> "LogregModel":
        X, y = _check_xy(X, y)
        if len(np.unique(y)) < 2:
            raise DomainError("logistic regression needs both classes")
        n, d = X.shape
        w = np.zeros(d)
        b = 0.0
        yf = y.astype(np.float64)
        for it in range(self.max_iter):
            z = X @ w + b
            p = sigmoid(z)
            gw = X.T @ (p - yf) + self.l2 * w
            gb = float((p - yf).sum())
            gnorm = np.sqrt(gw @ gw + gb * gb)
            if gnorm < self.tol:
                self.w_, self.b_, self.n_iter_ = w, b, it
                return self
            wgt = p * (1.0 - p)
            Xa = np.concatenate([X, np.ones((n, 1))], axis=1)
            H = (Xa * wgt[:, None]).T @ Xa
            H[:d, :d] += self.l2 * np.eye(d)
            H += 1e-12 * np.eye(d + 1)
            step = np.linalg.solve(H, np.concatenate([gw, [gb]]))
            loss0 = self._loss(X, yf, w, b)
            t = 1.0
            for _ in range(60):
                w_new = w - t * step[:d]
                b_new = b - t * step[d]
                if self._loss(X, yf, w_new, b_new) <= loss0:
                    break
                t *= 0.5
            w, b = w_new, b_new
        raise ConvergenceError(
            f"logistic regression did not converge in {self.max_iter} "
            f"iterations (gradient norm {gnorm:.3g})")

    def predict_proba(self, X) -> np.ndarray:
        if self.w_ is None:
            raise DomainError("model is not fitted")
        return sigmoid(np.asarray(X, dtype=np.float64) @ self.w_ + self.b_)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)


def _gini_split(x, y):
    """Best (threshold, impurity) for one feature column, or None when
    the column cannot be split."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = y[order]
    n = len(ys)
    total1 = ys.sum()
    left1 = np.cumsum(ys)[:-1]
    leftn = np.arange(1, n)
    right1 = total1 - left1
    rightn = n - leftn
    valid = xs[1:] != xs[:-1]
    if not valid.any():
        return None
    p1l = left1 / leftn
    p1r = right1 / rightn
    gini = (leftn * 2 * p1l * (1 - p1l) + rightn * 2 * p1r * (1 - p1r)) / n
    gini = np.where(valid, gini, np.inf)
    best = int(np.argmin(gini))
    thr = 0.5 * (xs[best] + xs[best + 1])
    return thr, float(gini[best])


class _Tree:
    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, value=None):
        self.feature = None
        self.threshold = None
        self.left = None
        self.right = None
        self.value = value


def _grow_tree(X, y, rng, max_features):
    node = _Tree()
    if len(y) < 2 or y.min() == y.max():
        node.value = float(y.mean())
        return node
    d = X.shape[1]
    feats = rng.choice(d, size=max_features, replace=False)
    best = None
    for f in feats:
        res = _gini_split(X[:, f], y)
        if res is None:
            continue
        thr, score = res
        if best is None or score < best[2]:
            best = (int(f), thr, score)
    if best is None:
        node.value = float(y.mean())
        return node
    f, thr, _ = best
    mask = X[:, f] <= thr
    node.feature = f
    node.threshold = thr
    node.left = _grow_tree(X[mask], y[mask], rng, max_features)
    node.right = _grow_tree(X[~mask], y[~mask], rng, max_features)
    return node


def _tree_predict(node, X):
    out = np.empty(X.shape[0])
    idx = np.arange(X.shape[0])
    stack = [(node, idx)]
    while stack:
        nd, rows = stack.pop()
        if len(rows) == 0:
            continue
        if nd.value is not None:
            out[rows] = nd.value
            continue
        mask = X[rows, nd.feature] <= nd.threshold
        stack.append((nd.left, rows[mask]))
        stack.append((nd.right, rows[~mask]))
    return out


class RandomForestModel:
    """Bootstrap forest of Gini trees, sqrt(d) features per split,
    unlimited depth; probability is the mean of per-tree leaf rates."""

    def __init__(self, n_trees: int = 100):
        self.n_trees = n_trees
        self.trees_ = None
        self.seed_ = None

    def clone(self) -> "RandomForestModel":
        return RandomForestModel(self.n_trees)

    def get_state(self) -> dict:
        if self.trees_ is None:
            return {}
        return {"n_trees": len(self.trees_), "seed": self.seed_,
                "oob_counts": self._boot_counts}

    def fit(self, X, y, seed: int = 0) -> "RandomForestModel":
        X, y = _check_xy(X, y)
        n, d = X.shape
        if n < 4:
            raise DomainError("random forest needs at least 4 cases")
        max_features = max(1, int(np.sqrt(d)))
        self.trees_ = []
        self.seed_ = seed
        counts = np.zeros(n, dtype=np.int64)
        for t in range(self.n_trees):
            rng = np.random.default_rng([seed, t])
            boot = rng.integers(0, n, size=n)
            counts += np.bincount(boot, minlength=n)
            self.trees_.append(_grow_tree(X[boot], y[boot], rng, max_features))
        self._boot_counts = counts
        return self

    def predict_proba(self, X) -> np.ndarray:
        if self.trees_ is None:
            raise DomainError("model is not fitted")
        X = np.asarray(X, dtype=np.float64)
        acc = np.zeros(X.shape[0])
        for tree in self.trees_:
            acc += _tree_predict(tree, X)
        return acc / len(self.trees_)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)


class MajorityModel:
    """Constant baseline: predicts the training class rate."""

    def __init__(self):
        self.rate_ = None

    def clone(self) -> "MajorityModel":
        return MajorityModel()

    def get_state(self) -> dict:
        return {} if self.rate_ is None else {"rate": self.rate_}

    def fit(self, X, y, seed: int = 0) -> "MajorityModel":
        _, y = _check_xy(X, y)
        self.rate_ = float(y.mean())
        return self

    def predict_proba(self, X) -> np.ndarray:
        if self.rate_ is None:
            raise DomainError("model is not fitted")
        return np.full(np.asarray(X).shape[0], self.rate_)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)


def ensemble_vote(models, X):
    """Soft vote: mean member probability, label 1 at >= 0.5.

    Raises when the ensemble is empty or any member emits a
    probability outside [0, 1].
    """
    models = list(models)
    if not models:
        raise DomainError("empty ensemble")
    probs = []
    for m in models:
        p = np.asarray(m.predict_proba(X), dtype=np.float64)
        if p.min() < 0 or p.max() > 1:
            raise DomainError("ensemble member produced probability outside [0, 1]")
        probs.append(p)
    mean = np.mean(probs, axis=0)
    return (mean >= 0.5).astype(np.int64), mean


class EnsembleModel:
    """Soft-voting wrapper fitting N clones with distinct seeds."""

    def __init__(self, base, n_members: int = 9):
        self.base = base
        self.n_members = n_members
        self.members_ = None

    def clone(self) -> "EnsembleModel":
        return EnsembleModel(self.base.clone(), self.n_members)

    def get_state(self) -> dict:
        if self.members_ is None:
            return {}
        return {f"member{i}": m.get_state()
                for i, m in enumerate(self.members_)}

    def fit(self, X, y, seed: int = 0) -> "EnsembleModel":
        self.members_ = []
        for i in range(self.n_members):
            m = self.base.clone()
            m.fit(X, y, seed=int(np.random.default_rng([seed, i]).integers(2 ** 31)))
            self.members_.append(m)
        return self

    def predict_proba(self, X) -> np.ndarray:
        if self.members_ is None:
            raise DomainError("model is not fitted")
        return ensemble_vote(self.members_, X)[1]

    def predict(self, X) -> np.ndarray:
        return ensemble_vote(self.members_, X)[0]
