"""Gradient-boosted regression trees on the logistic loss.

Trees grow leaf-wise (best gain first) up to ``max_leaves`` using exact
greedy splits over presorted feature columns. Ties go to the lowest feature
index, then the lowest threshold, then the oldest leaf.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import asdict, dataclass

import numba
import numpy as np

from ..nn import log_loss, sigmoid
from .base import HorizonLabeledSet, check_dim, single_class_fallback

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GbtConfig:
    max_leaves: int = 31
    max_trees: int = 200
    learning_rate: float = 0.1
    min_samples_leaf: int = 20
    early_stop_patience: int = 10
    l2: float = 1.0
    min_child_hessian: float = 1e-3

    def __post_init__(self) -> None:
        if self.max_trees < 1:
            raise ValueError("max_trees must be >= 1")
        if self.max_leaves < 2:
            raise ValueError("max_leaves must be >= 2")
        if self.min_samples_leaf < 1 or self.early_stop_patience < 1:
            raise ValueError("min_samples_leaf and early_stop_patience must be >= 1")
        if self.learning_rate < 0 or self.l2 < 0 or self.min_child_hessian < 0:
            raise ValueError("learning_rate, l2 and min_child_hessian must be nonnegative")

    @classmethod
    def desk(cls, **overrides) -> "GbtConfig":
        return cls(**overrides)

    @classmethod
    def paper(cls, **overrides) -> "GbtConfig":
        base = dict(max_leaves=64, max_trees=1000, learning_rate=0.01, l2=0.0)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)


@numba.njit(cache=True)
def _best_split(X, g, h, order, s, e, min_leaf, min_hess, lam):
    d = X.shape[1]
    G = 0.0
    H = 0.0
    for p in range(s, e):
        r = order[0, p]
        G += g[r]
        H += h[r]
    parent = G * G / (H + lam)
    best_gain = 1e-12
    best_f = -1
    best_thr = 0.0
    n = e - s
    for f in range(d):
        gl = 0.0
        hl = 0.0
        for p in range(s, e - 1):
            r = order[f, p]
            gl += g[r]
            hl += h[r]
            nl = p - s + 1
            if nl < min_leaf:
                continue
            if n - nl < min_leaf:
                break
            x0 = X[r, f]
            x1 = X[order[f, p + 1], f]
            if x1 <= x0:
                continue
            hr = H - hl
            if hl < min_hess or hr < min_hess:
                continue
            gr = G - gl
            gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent)
            if gain > best_gain:
                best_gain = gain
                best_f = f
                thr = x0 + 0.5 * (x1 - x0)
                if thr >= x1:
                    thr = x0
                best_thr = thr
    return best_gain, best_f, best_thr, G, H


@numba.njit(cache=True)
def _partition(X, order, s, e, f, thr, tmp):
    d = order.shape[0]
    nl = 0
    for k in range(d):
        a = 0
        for p in range(s, e):
            r = order[k, p]
            if X[r, f] <= thr:
                tmp[a] = r
                a += 1
        nl = a
        for p in range(s, e):
            r = order[k, p]
            if not X[r, f] <= thr:
                tmp[a] = r
                a += 1
        for p in range(e - s):
            order[k, s + p] = tmp[p]
    return nl


@numba.njit(cache=True)
def _grow_tree(X, g, h, order, max_leaves, min_leaf, min_hess, lam, lr, raw, tmp):
    cap = 2 * max_leaves
    feat = np.full(cap, -1, dtype=np.int64)
    thr = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    start = np.zeros(cap, dtype=np.int64)
    end = np.zeros(cap, dtype=np.int64)
    cand_gain = np.full(cap, -1.0)
    cand_f = np.full(cap, -1, dtype=np.int64)
    cand_thr = np.zeros(cap)
    n = order.shape[1]
    start[0] = 0
    end[0] = n
    gain, f, t, G, H = _best_split(X, g, h, order, 0, n, min_leaf, min_hess, lam)
    value[0] = -G / (H + lam)
    cand_gain[0] = gain if f >= 0 else -1.0
    cand_f[0] = f
    cand_thr[0] = t
    n_nodes = 1
    n_leaves = 1
    while n_leaves < max_leaves:
        best = -1
        bg = 0.0
        for v in range(n_nodes):
            if cand_f[v] >= 0 and cand_gain[v] > bg:
                bg = cand_gain[v]
                best = v
        if best < 0:
            break
        v = best
        s = start[v]
        e = end[v]
        nl = _partition(X, order, s, e, cand_f[v], cand_thr[v], tmp)
        feat[v] = cand_f[v]
        thr[v] = cand_thr[v]
        cand_f[v] = -1
        for child, cs, ce in ((n_nodes, s, s + nl), (n_nodes + 1, s + nl, e)):
            start[child] = cs
            end[child] = ce
            gain, f, t, G, H = _best_split(X, g, h, order, cs, ce, min_leaf, min_hess, lam)
            value[child] = -G / (H + lam)
            cand_gain[child] = gain
            cand_f[child] = f
            cand_thr[child] = t
        left[v] = n_nodes
        right[v] = n_nodes + 1
        n_nodes += 2
        n_leaves += 1
    for v in range(n_nodes):
        if feat[v] < 0:
            for p in range(start[v], end[v]):
                raw[order[0, p]] += lr * value[v]
    return feat[:n_nodes].copy(), thr[:n_nodes].copy(), left[:n_nodes].copy(), right[:n_nodes].copy(), value[:n_nodes].copy()


@numba.njit(cache=True)
def _tree_predict(X, feat, thr, left, right, value, scale, out):
    for r in range(X.shape[0]):
        v = 0
        while feat[v] >= 0:
            if X[r, feat[v]] <= thr[v]:
                v = left[v]
            else:
                v = right[v]
        out[r] += scale * value[v]


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size


class GBTClassifier:
    kind = "gbt"

    def __init__(self, base_score: float, trees: list[Tree], learning_rate: float, n_features: int,
                 rounds_used: int = 0, best_round: int = 0):
        self.base_score = float(base_score)
        self.trees = list(trees)
        self.learning_rate = float(learning_rate)
        self.n_features = int(n_features)
        self.rounds_used = rounds_used
        self.best_round = best_round
        self.degenerate = False

    def decision_function(self, X) -> np.ndarray:
        X = np.ascontiguousarray(check_dim(X, self.n_features))
        out = np.full(X.shape[0], self.base_score)
        for t in self.trees:
            _tree_predict(X, t.feature, t.threshold, t.left, t.right, t.value, self.learning_rate, out)
        return out

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.decision_function(X))

    def used_features(self) -> set[int]:
        used: set[int] = set()
        for t in self.trees:
            used.update(int(f) for f in t.feature[t.feature >= 0])
        return used

    def to_bytes(self) -> bytes:
        parts = [struct.pack("<qddqqq", self.n_features, self.base_score, self.learning_rate,
                             self.rounds_used, self.best_round, len(self.trees))]
        for t in self.trees:
            parts.append(struct.pack("<q", t.n_nodes))
            parts.append(t.feature.astype("<i8").tobytes())
            parts.append(t.threshold.astype("<f8").tobytes())
            parts.append(t.left.astype("<i8").tobytes())
            parts.append(t.right.astype("<i8").tobytes())
            parts.append(t.value.astype("<f8").tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, buf: bytes) -> "GBTClassifier":
        d, base, lr, used, best, n_trees = struct.unpack_from("<qddqqq", buf, 0)
        off = struct.calcsize("<qddqqq")
        trees = []
        for _ in range(n_trees):
            (m,) = struct.unpack_from("<q", buf, off)
            off += 8
            arrs = []
            for dt in ("<i8", "<f8", "<i8", "<i8", "<f8"):
                arrs.append(np.frombuffer(buf, dtype=dt, count=m, offset=off))
                off += 8 * m
            trees.append(Tree(arrs[0].astype(np.int64), arrs[1].astype(float), arrs[2].astype(np.int64),
                              arrs[3].astype(np.int64), arrs[4].astype(float)))
        return cls(base, trees, lr, d, used, best)


def train_gbt(train: HorizonLabeledSet, valid: HorizonLabeledSet | None, config: GbtConfig | None = None):
    """Boost logistic-loss trees with validation early stopping.

    The returned model keeps the trees up to the best validation round. A
    training set with a single class yields a flagged constant classifier.
    """
    config = config or GbtConfig()
    fallback = single_class_fallback(train)
    if fallback is not None:
        log.warning("single-class training set at h=%s h; using constant prior", train.horizon_hours)
        return fallback

    X = np.ascontiguousarray(train.X, dtype=float)
    y = train.labels.astype(float)
    n, d = X.shape
    prior = float(y.mean())
    base = math.log(prior / (1.0 - prior))
    presorted = np.ascontiguousarray(
        np.stack([np.argsort(X[:, f], kind="stable") for f in range(d)]), dtype=np.int64)
    raw = np.full(n, base)
    tmp = np.empty(n, dtype=np.int64)

    has_valid = valid is not None and len(valid) > 0
    if has_valid:
        Xv = np.ascontiguousarray(valid.X, dtype=float)
        yv = valid.labels.astype(float)
        raw_v = np.full(Xv.shape[0], base)
    stopper_best = log_loss(yv, sigmoid(raw_v)) if has_valid else math.inf
    best_round = 0
    bad = 0
    trees: list[Tree] = []
    lr = config.learning_rate
    for _ in range(config.max_trees):
        p = sigmoid(raw)
        g = p - y
        h = p * (1.0 - p)
        # partitioning scrambles the column orders, so every tree starts fresh
        arrs = _grow_tree(X, g, h, presorted.copy(), config.max_leaves, config.min_samples_leaf,
                          config.min_child_hessian, config.l2, lr, raw, tmp)
        tree = Tree(*arrs)
        trees.append(tree)
        if has_valid:
            _tree_predict(Xv, tree.feature, tree.threshold, tree.left, tree.right, tree.value, lr, raw_v)
            loss = log_loss(yv, sigmoid(raw_v))
            if loss < stopper_best:
                stopper_best = loss
                best_round = len(trees)
                bad = 0
            else:
                bad += 1
                if bad >= config.early_stop_patience:
                    break
        else:
            best_round = len(trees)
    rounds_used = len(trees)
    return GBTClassifier(base, trees[:best_round], lr, d, rounds_used, best_round)
