"""A flavour-fusion network: one dense leg per flavour, shared body.

Each flavour's feature block feeds its own stack of dense layers (a
"leg"); leg outputs are concatenated and pass through further dense
layers (the "body") down to a single sigmoid unit.  All hidden layers
use SELU with optional inverted dropout during training.  Forward,
backward and Adam are hand rolled in float64 so gradients can be
verified against finite differences and runs are bit-reproducible.

Legs are keyed by flavour name and sorted internally, so permuting
the input block order (together with any per-leg layer sizes) leaves
every number, including trained weights, bit-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import DomainError
from .io import FormatError
from .ml.metrics import balanced_accuracy
from .ml.models import sigmoid

SELU_LAMBDA = 1.05070098
SELU_ALPHA = 1.67326324

LegSizes = Union[Sequence[int], Sequence[Sequence[int]], Dict[str, Sequence[int]]]


def selu(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0, SELU_LAMBDA * z,
                    SELU_LAMBDA * SELU_ALPHA * (np.exp(np.minimum(z, 0.0)) - 1.0))


def selu_grad(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0, SELU_LAMBDA,
                    SELU_LAMBDA * SELU_ALPHA * np.exp(np.minimum(z, 0.0)))


@dataclass(frozen=True)
class TrNetConfig:
    """Architecture and training knobs.

    ``leg_sizes`` gives hidden-layer widths per leg: a flat tuple of
    ints applies the same stack to every leg, a sequence of tuples is
    aligned with the block order handed to ``fit``, and a mapping is
    keyed by flavour name.  ``body_sizes`` are the body hidden
    widths; the final width-1 sigmoid layer is implicit.
    """

    leg_sizes: LegSizes = (8,)
    body_sizes: Tuple[int, ...] = (8,)
    dropout: float = 0.0
    lr: float = 1e-3
    epochs: int = 200
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise DomainError("dropout must lie in [0, 1)")
        if self.lr < 0:
            raise DomainError("learning rate must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise DomainError("epochs and batch_size must be >= 1")

    def to_json_dict(self) -> dict:
        ls = self.leg_sizes
        if isinstance(ls, dict):
            ls = {k: list(v) for k, v in sorted(ls.items())}
        elif ls and not isinstance(ls[0], (int, np.integer)):
            ls = [list(v) for v in ls]
        else:
            ls = list(ls)
        return {"leg_sizes": ls, "body_sizes": list(self.body_sizes),
                "dropout": self.dropout, "lr": self.lr,
                "epochs": self.epochs, "batch_size": self.batch_size,
                "seed": self.seed}


def _as_blocks(blocks):
    """Validate [(name, matrix), ...] and return (names, 2D float64 mats)."""
    blocks = list(blocks)
    if not blocks:
        raise DomainError("need at least one flavour block")
    names = [str(n) for n, _ in blocks]
    if len(set(names)) != len(names):
        raise DomainError("duplicate flavour names in blocks")
    mats = []
    n_rows = None
    for _, m in blocks:
        m = np.asarray(m, dtype=np.float64)
        if m.ndim != 2:
            raise DomainError("flavour blocks must be 2D matrices")
        if n_rows is None:
            n_rows = m.shape[0]
        elif m.shape[0] != n_rows:
            raise DomainError("flavour blocks disagree on case count")
        mats.append(m)
    return names, mats


class TrNetModel:
    """Weights, training history, and the fit/predict machinery."""

    def __init__(self, config: TrNetConfig):
        self.config = config
        self.flavours_: Optional[List[str]] = None
        self.input_widths_: Optional[List[int]] = None
        self.leg_params_ = None
        self.body_params_ = None
        self.out_params_ = None
        self.history_: Optional[List[float]] = None

    # -- construction ------------------------------------------------

    def _per_leg_sizes(self, names_sorted, order):
        ls = self.config.leg_sizes
        if isinstance(ls, dict):
            missing = [n for n in names_sorted if n not in ls]
            if missing:
                raise DomainError(f"leg_sizes missing flavours: {missing}")
            return [tuple(int(w) for w in ls[n]) for n in names_sorted]
        ls = list(ls)
        if all(isinstance(w, (int, np.integer)) for w in ls):
            return [tuple(int(w) for w in ls)] * len(names_sorted)
        if len(ls) != len(names_sorted):
            raise DomainError("per-leg sizes must match flavour count")
        aligned = [tuple(int(w) for w in s) for s in ls]
        return [aligned[i] for i in order]

    def initialize(self, blocks) -> "TrNetModel":
        """Sort blocks by flavour name and build fresh parameters."""
        names, mats = _as_blocks(blocks)
        order = sorted(range(len(names)), key=names.__getitem__)
        self.flavours_ = [names[i] for i in order]
        mats = [mats[i] for i in order]
        self.input_widths_ = [m.shape[1] for m in mats]
        per_leg = self._per_leg_sizes(self.flavours_, order)
        if any(w < 1 for sizes in per_leg for w in sizes) or \
                any(w < 1 for w in self.config.body_sizes):
            raise DomainError("layer widths must be >= 1")
        rng = np.random.default_rng(self.config.seed)

        def dense(fan_in, fan_out):
            w = rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)
            return [w, np.zeros(fan_out)]

        self.leg_params_ = []
        leg_out_widths = []
        for width, sizes in zip(self.input_widths_, per_leg):
            layers = []
            for w_out in sizes:
                layers.append(dense(width, w_out))
                width = w_out
            self.leg_params_.append(layers)
            leg_out_widths.append(width)
        width = int(sum(leg_out_widths))
        self.body_params_ = []
        for w_out in self.config.body_sizes:
            self.body_params_.append(dense(width, w_out))
            width = w_out
        self.out_params_ = dense(width, 1)
        self._leg_out_widths = leg_out_widths
        return self

    def _parameters(self):
        for layers in self.leg_params_:
            for w, b in layers:
                yield w
                yield b
        for w, b in self.body_params_:
            yield w
            yield b
        yield self.out_params_[0]
        yield self.out_params_[1]

    # -- forward / backward ------------------------------------------

    def _forward(self, mats, train_mode: bool, rng):
        p_drop = self.config.dropout

        def maybe_drop(a):
            if train_mode and p_drop > 0:
                mask = rng.random(a.shape) >= p_drop
                return a * mask / (1.0 - p_drop), mask
            return a, None

        leg_caches = []
        leg_outs = []
        for layers, x in zip(self.leg_params_, mats):
            h = x
            caches = []
            for w, b in layers:
                z = h @ w + b
                a, mask = maybe_drop(selu(z))
                caches.append((h, z, mask))
                h = a
            leg_caches.append(caches)
            leg_outs.append(h)
        h = leg_outs[0] if len(leg_outs) == 1 else \
            np.concatenate(leg_outs, axis=1)
        body_caches = []
        for w, b in self.body_params_:
            z = h @ w + b
            a, mask = maybe_drop(selu(z))
            body_caches.append((h, z, mask))
            h = a
        w, b = self.out_params_
        prob = sigmoid((h @ w + b)[:, 0])
        return prob, (leg_caches, body_caches, h)

    def _backward(self, caches, prob, y):
        leg_caches, body_caches, h_out = caches
        n = len(y)
        p_drop = self.config.dropout
        dz = ((2.0 / n) * (prob - y) * prob * (1.0 - prob))[:, None]
        grads_out = [h_out.T @ dz, dz.sum(axis=0)]
        dh = dz @ self.out_params_[0].T

        def walk_back(layers, caches, dh):
            grads = []
            for (w, _), (h_in, z, mask) in zip(reversed(layers),
                                               reversed(caches)):
                if mask is not None:
                    dh = dh * mask / (1.0 - p_drop)
                dzl = dh * selu_grad(z)
                grads.append([h_in.T @ dzl, dzl.sum(axis=0)])
                dh = dzl @ w.T
            grads.reverse()
            return grads, dh

        body_grads, dh = walk_back(self.body_params_, body_caches, dh)
        splits = np.cumsum(self._leg_out_widths)[:-1]
        dh_legs = np.split(dh, splits, axis=1)
        leg_grads = []
        for layers, caches_l, dhl in zip(self.leg_params_, leg_caches,
                                         dh_legs):
            g, _ = walk_back(layers, caches_l, dhl)
            leg_grads.append(g)

        flat = []
        for g in leg_grads:
            for gw, gb in g:
                flat.extend((gw, gb))
        for gw, gb in body_grads:
            flat.extend((gw, gb))
        flat.extend(grads_out)
        return flat

    # -- training ----------------------------------------------------

    def fit(self, blocks, y) -> "TrNetModel":
        """Minibatch Adam on MSE(sigmoid output, binary label)."""
        self.initialize(blocks)
        mats = self._sorted_mats(blocks)
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (mats[0].shape[0],):
            raise DomainError("labels must align with block rows")
        if not np.isin(y, (0.0, 1.0)).all():
            raise DomainError("labels must be binary")
        cfg = self.config
        params = list(self._parameters())
        m_state = [np.zeros_like(p) for p in params]
        v_state = [np.zeros_like(p) for p in params]
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        step = 0
        n = len(y)
        self.history_ = []
        for epoch in range(cfg.epochs):
            erng = np.random.default_rng([cfg.seed, 1 + epoch])
            order = erng.permutation(n)
            for start in range(0, n, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                bmats = [x[idx] for x in mats]
                prob, caches = self._forward(bmats, True, erng)
                grads = self._backward(caches, prob, y[idx])
                step += 1
                c1 = 1.0 - beta1 ** step
                c2 = 1.0 - beta2 ** step
                for p, g, m1, v1 in zip(params, grads, m_state, v_state):
                    m1 += (1.0 - beta1) * (g - m1)
                    v1 += (1.0 - beta2) * (g * g - v1)
                    p -= cfg.lr * (m1 / c1) / (np.sqrt(v1 / c2) + eps)
            prob_all, _ = self._forward(mats, False, None)
            loss = float(np.mean((prob_all - y) ** 2))
            if not np.isfinite(loss):
                raise DomainError(
                    f"training diverged at epoch {epoch}: loss {loss!r} "
                    f"(lr={cfg.lr}, batch_size={cfg.batch_size})")
            self.history_.append(loss)
        return self

    # -- inference ---------------------------------------------------

    def _sorted_mats(self, blocks):
        if self.flavours_ is None:
            raise DomainError("model is not initialized")
        names, mats = _as_blocks(blocks)
        order = sorted(range(len(names)), key=names.__getitem__)
        names = [names[i] for i in order]
        mats = [mats[i] for i in order]
        if names != self.flavours_:
            raise DomainError(
                f"flavour mismatch: model has {self.flavours_}, got {names}")
        for m, w in zip(mats, self.input_widths_):
            if m.shape[1] != w:
                raise DomainError("block width does not match leg input")
        return mats

    def predict_proba(self, blocks) -> np.ndarray:
        return self._forward(self._sorted_mats(blocks), False, None)[0]

    def predict(self, blocks) -> np.ndarray:
        return (self.predict_proba(blocks) >= 0.5).astype(np.int64)

    # -- serialization -----------------------------------------------

    def _named_params(self):
        for li, layers in enumerate(self.leg_params_):
            for lj, (w, b) in enumerate(layers):
                yield f"leg{li}.W{lj}", w
                yield f"leg{li}.b{lj}", b
        for lj, (w, b) in enumerate(self.body_params_):
            yield f"body.W{lj}", w
            yield f"body.b{lj}", b
        yield "out.W", self.out_params_[0]
        yield "out.b", self.out_params_[1]

    def to_json_dict(self) -> dict:
        if self.leg_params_ is None:
            raise DomainError("model is not initialized")
        arrays = {name: {"shape": list(a.shape),
                         "data": [float(v) for v in a.ravel(order="C")]}
                  for name, a in self._named_params()}
        return {
            "format": "trnet-checkpoint-v1",
            "flavours": list(self.flavours_),
            "input_widths": list(self.input_widths_),
            "leg_out_widths": [int(w) for w in self._leg_out_widths],
            "config": self.config.to_json_dict(),
            "history": list(self.history_ or []),
            "arrays": arrays,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "TrNetModel":
        if d.get("format") != "trnet-checkpoint-v1":
            raise FormatError("unrecognized checkpoint format")
        cfg = d["config"]
        ls = cfg["leg_sizes"]
        if isinstance(ls, dict):
            leg_sizes: LegSizes = {k: tuple(v) for k, v in ls.items()}
        elif ls and isinstance(ls[0], list):
            leg_sizes = tuple(tuple(v) for v in ls)
        else:
            leg_sizes = tuple(ls)
        model = cls(TrNetConfig(
            leg_sizes=leg_sizes, body_sizes=tuple(cfg["body_sizes"]),
            dropout=cfg["dropout"], lr=cfg["lr"], epochs=cfg["epochs"],
            batch_size=cfg["batch_size"], seed=cfg["seed"]))
        model.flavours_ = list(d["flavours"])
        model.input_widths_ = list(d["input_widths"])
        model._leg_out_widths = list(d["leg_out_widths"])
        model.history_ = list(d["history"])
        arrays = {name: np.array(spec["data"], dtype=np.float64)
                  .reshape(spec["shape"])
                  for name, spec in d["arrays"].items()}
        model.leg_params_ = []
        for li in range(len(model.flavours_)):
            layers = []
            lj = 0
            while f"leg{li}.W{lj}" in arrays:
                layers.append([arrays[f"leg{li}.W{lj}"],
                               arrays[f"leg{li}.b{lj}"]])
                lj += 1
            model.leg_params_.append(layers)
        model.body_params_ = []
        lj = 0
        while f"body.W{lj}" in arrays:
            model.body_params_.append([arrays[f"body.W{lj}"],
                                       arrays[f"body.b{lj}"]])
            lj += 1
        model.out_params_ = [arrays["out.W"], arrays["out.b"]]
        return model


def train(config: TrNetConfig, blocks, y) -> TrNetModel:
    return TrNetModel(config).fit(blocks, y)


def save_checkpoint(model: TrNetModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_json_dict(), fh, sort_keys=True,
                  separators=(",", ":"))


def load_checkpoint(path) -> TrNetModel:
    with open(path) as fh:
        return TrNetModel.from_json_dict(json.load(fh))


def gradient_check(model: TrNetModel, blocks, y, n_samples: int = 5,
                   h: float = 1e-5, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference
    gradients over a sample of parameter entries (dropout off)."""
    mats = model._sorted_mats(blocks)
    y = np.asarray(y, dtype=np.float64)
    prob, caches = model._forward(mats, False, None)
    grads = model._backward(caches, prob, y)
    params = list(model._parameters())

    def loss():
        p, _ = model._forward(mats, False, None)
        return float(np.mean((p - y) ** 2))

    rng = np.random.default_rng(seed)
    worst = 0.0
    for p_arr, g_arr in zip(params, grads):
        size = p_arr.size
        if size <= n_samples:
            picks = range(size)
        else:
            picks = rng.choice(size, size=n_samples, replace=False)
        for i in picks:
            orig = p_arr.flat[i]
            p_arr.flat[i] = orig + h
            lp = loss()
            p_arr.flat[i] = orig - h
            lm = loss()
            p_arr.flat[i] = orig
            g_num = (lp - lm) / (2.0 * h)
            g_ana = float(g_arr.flat[i])
            rel = abs(g_ana - g_num) / max(abs(g_ana), abs(g_num), 1e-8)
            worst = max(worst, rel)
    return worst


_SEARCH_KEYS = ("leg_sizes", "body_sizes", "dropout", "lr", "epochs",
                "batch_size")


def random_search(space: dict, blocks, y, plan, budget: int,
                  groups=None, seed: int = 0):
    """Uniformly sample ``budget`` configs from per-field option lists
    and score each by mean CV balanced accuracy under ``plan``.

    Returns (best config, trials) where trials is the ordered list of
    (config, score); ties keep the first sampled config.
    """
    if budget < 1:
        raise DomainError("search budget must be >= 1")
    unknown = set(space) - set(_SEARCH_KEYS)
    if unknown:
        raise DomainError(f"unknown search fields: {sorted(unknown)}")
    defaults = TrNetConfig()
    options = {}
    for key in _SEARCH_KEYS:
        opts = list(space.get(key, [getattr(defaults, key)]))
        if not opts:
            raise DomainError(f"empty option list for {key}")
        options[key] = opts
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    trials = []
    best_idx = 0
    best_score = -np.inf
    for trial in range(budget):
        kwargs = {key: options[key][int(rng.integers(len(options[key])))]
                  for key in _SEARCH_KEYS}
        cfg = TrNetConfig(
            seed=int(np.random.default_rng([seed, trial]).integers(2 ** 31)),
            **kwargs)
        scores = []
        for tr, te in plan.folds(y, groups):
            model = TrNetModel(cfg)
            model.fit([(nm, x[tr]) for nm, x in blocks], y[tr])
            pred = model.predict([(nm, x[te]) for nm, x in blocks])
            scores.append(balanced_accuracy(y[te], pred))
        score = float(np.mean(scores))
        trials.append((cfg, score))
        if score > best_score:
            best_score = score
            best_idx = trial
    return trials[best_idx][0], trials
