from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..core import SnapshotTable


class DimensionMismatch(ValueError):
    pass


class EmptyResult(ValueError):
    pass


@dataclass(frozen=True)
class HorizonLabeledSet:
    """Binary training set for one horizon.

    ``kept_indices`` maps each row back to its position in the source
    snapshot table.
    """

    X: np.ndarray
    labels: np.ndarray
    kept_indices: np.ndarray
    horizon_hours: float

    def __len__(self) -> int:
        return self.labels.shape[0]


def make_horizon_labels(snapshots: SnapshotTable, h_hours: float, allow_empty: bool = False) -> HorizonLabeledSet:
    """Label snapshots for "dies within ``h_hours``".

    Deaths at ``y <= h`` are positives, anything with ``y > h`` is a negative,
    and discharges at ``y <= h`` are dropped because their outcome at ``h`` is
    unknown.
    """
    if not h_hours > 0:
        raise ValueError("h_hours must be positive")
    y, c = snapshots.y, snapshots.c
    inside = y <= h_hours
    keep = ~(c & inside)
    kept = np.flatnonzero(keep)
    if kept.size == 0 and not allow_empty:
        raise EmptyResult(f"every snapshot is censored before h={h_hours} h")
    labels = (inside[kept] & ~c[kept]).astype(float)
    return HorizonLabeledSet(snapshots.X[kept], labels, kept, float(h_hours))


def check_dim(X, d: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != d:
        raise DimensionMismatch(f"expected {d} features, got shape {X.shape}")
    return X


class ConstantClassifier:
    """Predicts one probability everywhere; used for single-class training sets."""

    kind = "constant"

    def __init__(self, probability: float, n_features: int, degenerate: bool = False):
        self.probability = float(probability)
        self.n_features = int(n_features)
        self.degenerate = degenerate
        self.rounds_used = 0
        self.best_round = 0

    def predict_proba(self, X) -> np.ndarray:
        X = check_dim(X, self.n_features)
        return np.full(X.shape[0], self.probability)

    def to_bytes(self) -> bytes:
        return struct.pack("<qdq", self.n_features, self.probability, int(self.degenerate))

    @classmethod
    def from_bytes(cls, buf: bytes) -> "ConstantClassifier":
        d, p, deg = struct.unpack_from("<qdq", buf, 0)
        return cls(p, d, bool(deg))


def single_class_fallback(train: HorizonLabeledSet) -> ConstantClassifier | None:
    """Return the flagged prior-only classifier when ``train`` has one class."""
    if len(train) == 0:
        raise EmptyResult("empty training set")
    prior = float(train.labels.mean())
    if prior in (0.0, 1.0):
        return ConstantClassifier(prior, train.X.shape[1], degenerate=True)
    return None


def predict_proba(classifier, x) -> np.ndarray:
    return classifier.predict_proba(x)
