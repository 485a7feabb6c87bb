"""Dense ReLU networks with hand-written reverse mode, Adam, early stopping."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np


class MLP:
    """Fully connected net: ReLU hidden layers, linear output layer.

    With ``hidden_sizes == []`` this is a plain affine map.
    """

    def __init__(self, n_in: int, hidden_sizes, n_out: int, rng: np.random.Generator | None = None):
        sizes = [int(n_in), *[int(h) for h in hidden_sizes], int(n_out)]
        self.sizes = sizes
        self.W: list[np.ndarray] = []
        self.b: list[np.ndarray] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            if rng is None:
                W = np.zeros((fan_in, fan_out))
            else:
                # He initialisation for the ReLU layers
                W = rng.standard_normal((fan_in, fan_out)) * math.sqrt(2.0 / fan_in)
            self.W.append(W)
            self.b.append(np.zeros(fan_out))

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.W, self.b):
            out.extend((W, b))
        return out

    def forward(self, X: np.ndarray, keep: bool = False):
        # einsum instead of BLAS: a row's output must not depend on which
        # other rows share the call (BLAS picks kernels by matrix shape)
        acts = [X]
        h = X
        last = len(self.W) - 1
        for i, (W, b) in enumerate(zip(self.W, self.b)):
            z = np.einsum("ij,jk->ik", h, W) + b
            h = z if i == last else np.maximum(z, 0.0)
            if keep:
                acts.append(h)
        return (h, acts) if keep else h

    def backward(self, acts, grad_out: np.ndarray) -> list[np.ndarray]:
        """Gradients of a scalar loss w.r.t. ``params`` given dL/d(output)."""
        grads: list[np.ndarray] = []
        g = grad_out
        for i in range(len(self.W) - 1, -1, -1):
            h_in = acts[i]
            gW = h_in.T @ g
            gb = g.sum(axis=0)
            grads[:0] = [gW, gb]
            if i > 0:
                g = (g @ self.W[i].T) * (acts[i] > 0)
        return grads

    def l2_penalty(self, l2: float) -> tuple[float, list[np.ndarray]]:
        """``l2 * sum(W**2)`` over weight matrices (biases are not penalised)."""
        val = l2 * sum(float(np.sum(W * W)) for W in self.W)
        grads = []
        for W, b in zip(self.W, self.b):
            grads.extend((2.0 * l2 * W, np.zeros_like(b)))
        return val, grads

    def copy(self) -> "MLP":
        other = MLP.__new__(MLP)
        other.sizes = list(self.sizes)
        other.W = [W.copy() for W in self.W]
        other.b = [b.copy() for b in self.b]
        return other

    def to_bytes(self) -> bytes:
        parts = [struct.pack("<q", len(self.sizes)), struct.pack(f"<{len(self.sizes)}q", *self.sizes)]
        for W, b in zip(self.W, self.b):
            parts.append(np.ascontiguousarray(W, dtype="<f8").tobytes())
            parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, buf: bytes, offset: int = 0) -> tuple["MLP", int]:
        (n,) = struct.unpack_from("<q", buf, offset)
        offset += 8
        sizes = list(struct.unpack_from(f"<{n}q", buf, offset))
        offset += 8 * n
        net = MLP.__new__(MLP)
        net.sizes = sizes
        net.W, net.b = [], []
        for fi, fo in zip(sizes[:-1], sizes[1:]):
            W = np.frombuffer(buf, dtype="<f8", count=fi * fo, offset=offset).reshape(fi, fo)
            offset += 8 * fi * fo
            b = np.frombuffer(buf, dtype="<f8", count=fo, offset=offset)
            offset += 8 * fo
            net.W.append(W.astype(float))
            net.b.append(b.astype(float))
        return net, offset


@dataclass
class Adam:
    """Adaptive moment estimation with bias correction."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    _m: list = field(default_factory=list, repr=False)
    _v: list = field(default_factory=list, repr=False)

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if not self._m:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class EarlyStopping:
    """Stop after ``patience`` consecutive epochs without strict improvement."""

    def __init__(self, patience: int):
        if patience < 1:
            raise ValueError("patience must be >= 1")
        self.patience = patience
        self.best = math.inf
        self.best_epoch = -1
        self.epoch = -1
        self.bad_epochs = 0

    def update(self, loss: float) -> bool:
        """Record one validation loss; True means stop now."""
        self.epoch += 1
        if loss < self.best:
            self.best = loss
            self.best_epoch = self.epoch
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
        return self.bad_epochs >= self.patience


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softplus(z):
    z = np.asarray(z, dtype=float)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def inverse_softplus(v: float) -> float:
    return float(v + math.log(-math.expm1(-v)))


def log_loss(y, p, eps: float = 1e-15) -> float:
    p = np.clip(p, eps, 1.0 - eps)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))
