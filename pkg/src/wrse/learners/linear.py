from __future__ import annotations

import struct
from dataclasses import asdict, dataclass

import numpy as np

from ..nn import EarlyStopping, log_loss, sigmoid
from .base import HorizonLabeledSet, check_dim, single_class_fallback


@dataclass(frozen=True)
class LogisticConfig:
    lr: float = 0.5
    l2: float = 1e-4
    max_epochs: int = 1000
    patience: int = 10

    def to_dict(self) -> dict:
        return asdict(self)


class LogisticClassifier:
    kind = "logistic"

    def __init__(self, weights, bias: float, rounds_used: int = 0, best_round: int = 0):
        self.weights = np.asarray(weights, dtype=float)
        self.bias = float(bias)
        self.n_features = self.weights.size
        self.rounds_used = rounds_used
        self.best_round = best_round
        self.degenerate = False

    def predict_proba(self, X) -> np.ndarray:
        X = check_dim(X, self.n_features)
        # row-stable product, see MLP.forward
        return sigmoid(np.einsum("ij,j->i", X, self.weights) + self.bias)

    def to_bytes(self) -> bytes:
        head = struct.pack("<qdqq", self.n_features, self.bias, self.rounds_used, self.best_round)
        return head + self.weights.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, buf: bytes) -> "LogisticClassifier":
        d, b, used, best = struct.unpack_from("<qdqq", buf, 0)
        w = np.frombuffer(buf, dtype="<f8", count=d, offset=struct.calcsize("<qdqq"))
        return cls(w.astype(float), b, used, best)


def train_logistic(train: HorizonLabeledSet, valid: HorizonLabeledSet | None,
                   lr: float = 0.5, l2: float = 1e-4, max_epochs: int = 1000, patience: int = 10):
    """Full-batch gradient descent on the L2-penalised logistic loss.

    The penalty step is applied proximally (``w / (1 + lr*l2)``), which stays
    stable for any ``l2``; the bias is not penalised.
    """
    fallback = single_class_fallback(train)
    if fallback is not None:
        return fallback
    X, y = train.X, train.labels
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    has_valid = valid is not None and len(valid) > 0
    stopper = EarlyStopping(patience)
    best = (w.copy(), b, 0)
    epochs = 0
    for epoch in range(1, max_epochs + 1):
        p = sigmoid(X @ w + b)
        r = p - y
        w = (w - lr * (X.T @ r) / n) / (1.0 + lr * l2)
        b -= lr * float(r.mean())
        epochs = epoch
        if has_valid:
            loss = log_loss(valid.labels, sigmoid(valid.X @ w + b))
            improved = loss < stopper.best
            stop = stopper.update(loss)
            if improved:
                best = (w.copy(), b, epoch)
            if stop:
                break
        else:
            best = (w.copy(), b, epoch)
    return LogisticClassifier(best[0], best[1], epochs, best[2])
