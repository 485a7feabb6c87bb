"""Rolling temporal splits over stays in admission order."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, SplitTag


@dataclass(frozen=True)
class TemporalSplit:
    index: int
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray

    def datasets(self, data: Dataset) -> tuple[Dataset, Dataset, Dataset]:
        return (data.subset(self.train, SplitTag.TRAIN), data.subset(self.valid, SplitTag.VALIDATION),
                data.subset(self.test, SplitTag.TEST))


def temporal_splits(n_stays: int, n_splits: int = 5, fractions=(0.6, 0.2, 0.2),
                    window_frac: float = 0.8) -> list[TemporalSplit]:
    """Windows of ``window_frac * n`` consecutive stays, rolled forward evenly.

    Inside each window the first ``fractions[0]`` go to training, the next
    ``fractions[1]`` to validation and the rest to test, so every test stay
    was admitted after every training stay.
    """
    fr = np.asarray(fractions, dtype=float)
    if fr.shape != (3,) or np.any(fr <= 0) or abs(fr.sum() - 1.0) > 1e-9:
        raise ValueError("fractions must be three positive numbers summing to 1")
    if not 0 < window_frac <= 1:
        raise ValueError("window_frac must lie in (0, 1]")
    if n_splits < 1:
        raise ValueError("n_splits must be >= 1")
    w = int(round(window_frac * n_stays))
    n_tr = int(round(fr[0] * w))
    n_va = int(round(fr[1] * w))
    if n_tr < 1 or n_va < 1 or w - n_tr - n_va < 1:
        raise ValueError(f"{n_stays} stays are too few for these split fractions")
    starts = np.linspace(0, n_stays - w, n_splits).round().astype(int) if n_splits > 1 else np.array([0])
    out = []
    for i, s in enumerate(starts):
        idx = np.arange(s, s + w)
        out.append(TemporalSplit(i, idx[:n_tr], idx[n_tr:n_tr + n_va], idx[n_tr + n_va:]))
    return out
