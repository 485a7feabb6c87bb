"""The Weighted Resolution Survival Ensemble.

One binary classifier per horizon ``h_k`` estimates ``Pr[T < h_k | x]``; the
raw estimates are projected onto nondecreasing sequences with PAVA and read as
knots of a CDF.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import BeyondLast, CurveBatch, Dataset, SnapshotTable, SurvivalCurve
from .isotonic import pava_rows
from .learners import base_config as make_base_config
from .learners import make_horizon_labels, trainer_for
from .learners.base import check_dim
from .parallel import run_tasks, shared
from .weighting import HorizonGrid

log = logging.getLogger(__name__)


class HorizonTrainingError(RuntimeError):
    def __init__(self, k: int, horizon_hours: float, cause: Exception):
        super().__init__(f"base model k={k} (h={horizon_hours:.4g} h) failed: {cause}")
        self.k = k
        self.horizon_hours = horizon_hours


@dataclass(frozen=True)
class WrseModel:
    grid: HorizonGrid
    classifiers: tuple
    base_kind: str
    base_config: dict = field(default_factory=dict)
    beyond_last: BeyondLast = BeyondLast.CLAMP

    def __post_init__(self) -> None:
        if len(self.classifiers) != self.grid.K:
            raise ValueError(f"{len(self.classifiers)} classifiers for a grid of K={self.grid.K}")

    @property
    def n_features(self) -> int:
        return self.classifiers[0].n_features

    def raw_predictions(self, X) -> np.ndarray:
        X = check_dim(X, self.n_features)
        return np.column_stack([clf.predict_proba(X) for clf in self.classifiers])


def _as_table(data) -> SnapshotTable:
    if isinstance(data, SnapshotTable):
        return data
    if isinstance(data, Dataset):
        return SnapshotTable.from_dataset(data)
    raise TypeError(f"expected Dataset or SnapshotTable, got {type(data).__name__}")


def _fit_one(k: int):
    train, valid, grid, kind, config = shared()
    h = float(grid.horizons_hours[k])
    try:
        tr = make_horizon_labels(train, h)
        va = make_horizon_labels(valid, h, allow_empty=True) if valid is not None else None
        return trainer_for(kind, config)(tr, va)
    except Exception as exc:
        raise HorizonTrainingError(k + 1, h, exc) from exc


def fit_wrse(train, valid, grid: HorizonGrid, base_kind: str = "gbt", base_config=None,
             workers: int = 1, beyond_last: BeyondLast = BeyondLast.CLAMP) -> WrseModel:
    """Fit one classifier per horizon of ``grid``.

    ``train``/``valid`` are Datasets or SnapshotTables. ``base_config`` is a
    config object or a dict of overrides for the chosen kind. The K fits are
    independent and may run on ``workers`` processes; the result does not
    depend on the worker count.
    """
    train_t = _as_table(train)
    if len(train_t) == 0:
        raise ValueError("empty training set")
    valid_t = _as_table(valid) if valid is not None else None
    config = base_config if not (base_config is None or isinstance(base_config, dict)) \
        else make_base_config(base_kind, base_config)
    payload = (train_t, valid_t, grid, base_kind, config)
    clfs = run_tasks(_fit_one, range(grid.K), workers, payload)
    for k, clf in enumerate(clfs):
        if getattr(clf, "degenerate", False):
            log.warning("base model %d fell back to a constant prior %.4g", k + 1, clf.probability)
    return WrseModel(grid, tuple(clfs), base_kind, config.to_dict(), beyond_last)


def _project(raw: np.ndarray) -> np.ndarray:
    cdf = pava_rows(np.clip(raw, 0.0, 1.0))
    # PAVA averages stay inside [0, 1], the clip only absorbs rounding
    np.clip(cdf, 0.0, 1.0, out=cdf)
    if cdf.size and np.any(np.diff(cdf, axis=1) < 0):
        raise AssertionError("projected CDF is not monotone")
    return cdf


def predict_cdf(model: WrseModel, x) -> SurvivalCurve:
    raw = model.raw_predictions(np.asarray(x, dtype=float).reshape(1, -1))
    return SurvivalCurve(model.grid.horizons_hours, _project(raw)[0], model.beyond_last)


def _predict_chunk(bounds):
    model, X = shared()
    lo, hi = bounds
    return _project(model.raw_predictions(X[lo:hi]))


def predict_batch(model: WrseModel, snapshots, workers: int = 1, chunk: int = 20000) -> CurveBatch:
    """Curves for every row of ``snapshots`` (a SnapshotTable or an (n, d) matrix)."""
    X = snapshots.X if isinstance(snapshots, SnapshotTable) else np.asarray(snapshots, dtype=float)
    if X.ndim == 2 and X.shape[0] == 0:
        return CurveBatch(model.grid.horizons_hours, np.zeros((0, model.grid.K)), model.beyond_last)
    X = check_dim(X, model.n_features)
    bounds = [(lo, min(lo + chunk, X.shape[0])) for lo in range(0, X.shape[0], chunk)]
    parts = run_tasks(_predict_chunk, bounds, workers, (model, X))
    return CurveBatch(model.grid.horizons_hours, np.concatenate(parts), model.beyond_last)
