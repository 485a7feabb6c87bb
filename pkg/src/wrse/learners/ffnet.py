from __future__ import annotations

import struct
from dataclasses import asdict, dataclass

import numpy as np

from ..nn import MLP, Adam, EarlyStopping, log_loss, sigmoid, softplus
from .base import HorizonLabeledSet, check_dim, single_class_fallback


@dataclass(frozen=True)
class FFNetConfig:
    hidden_sizes: tuple[int, ...] = (50, 50)
    lr: float = 1e-2
    l2: float = 1e-4
    max_epochs: int = 300
    patience: int = 10
    seed: int = 0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["hidden_sizes"] = list(self.hidden_sizes)
        return out


class FFNetClassifier:
    kind = "ffnet"

    def __init__(self, net: MLP, rounds_used: int = 0, best_round: int = 0):
        self.net = net
        self.n_features = net.sizes[0]
        self.rounds_used = rounds_used
        self.best_round = best_round
        self.degenerate = False

    def decision_function(self, X) -> np.ndarray:
        X = check_dim(X, self.n_features)
        return self.net.forward(X)[:, 0]

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.decision_function(X))

    def to_bytes(self) -> bytes:
        return struct.pack("<qq", self.rounds_used, self.best_round) + self.net.to_bytes()

    @classmethod
    def from_bytes(cls, buf: bytes) -> "FFNetClassifier":
        used, best = struct.unpack_from("<qq", buf, 0)
        net, _ = MLP.from_bytes(buf, 16)
        return cls(net, used, best)


def loss_and_grads(net: MLP, X, y, l2: float):
    """Mean log-loss plus ``l2 * sum(W**2)`` and its parameter gradients."""
    z, acts = net.forward(X, keep=True)
    z = z[:, 0]
    p = sigmoid(z)
    loss = float(np.mean(softplus(z) - y * z))
    g_out = ((p - y) / X.shape[0])[:, None]
    grads = net.backward(acts, g_out)
    pen, pen_grads = net.l2_penalty(l2)
    return loss + pen, [g + pg for g, pg in zip(grads, pen_grads)]


def train_ffnet(train: HorizonLabeledSet, valid: HorizonLabeledSet | None,
                hidden_sizes=(50, 50), lr: float = 1e-2, l2: float = 1e-4, patience: int = 10,
                max_epochs: int = 300, seed: int = 0):
    """Full-batch Adam on a ReLU network with a sigmoid output."""
    fallback = single_class_fallback(train)
    if fallback is not None:
        return fallback
    rng = np.random.default_rng(seed)
    net = MLP(train.X.shape[1], hidden_sizes, 1, rng)
    if not hidden_sizes:
        net.W[0][:] = 0.0
    opt = Adam(lr=lr)
    has_valid = valid is not None and len(valid) > 0
    stopper = EarlyStopping(patience)
    best = (net.copy(), 0)
    epochs = 0
    for epoch in range(1, max_epochs + 1):
        _, grads = loss_and_grads(net, train.X, train.labels, l2)
        opt.step(net.params, grads)
        epochs = epoch
        if has_valid:
            loss = log_loss(valid.labels, sigmoid(net.forward(valid.X)[:, 0]))
            improved = loss < stopper.best
            stop = stopper.update(loss)
            if improved:
                best = (net.copy(), epoch)
            if stop:
                break
        else:
            best = (net.copy(), epoch)
    return FFNetClassifier(best[0], epochs, best[1])
