"""Stay records, hourly snapshots and the survival-curve representation."""

from __future__ import annotations

import csv
import enum
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np


class DataFormatError(ValueError):
    """Raised when dataset files or records violate the expected layout."""


class QueryBeyondSupport(ValueError):
    """Raised when a strict curve is queried past its last knot."""


class BeyondLast(enum.Enum):
    CLAMP = "clamp"
    UNDEFINED = "undefined"


class SplitTag(enum.Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


class _ClampCounter:
    """Process-wide tally of curve queries answered by clamping."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._count = 0

    def add(self, n: int) -> None:
        if n:
            with self._lock:
                self._count += int(n)

    @property
    def count(self) -> int:
        return self._count

    def reset(self) -> None:
        with self._lock:
            self._count = 0


clamp_counter = _ClampCounter()


@dataclass(frozen=True)
class StayRecord:
    """One ICU stay: hourly feature rows plus the observed event.

    Row ``r`` of ``features`` holds the measurements at hour ``r`` after
    admission. ``censored`` is True for a discharge, False for a death.
    """

    stay_id: str
    features: np.ndarray
    event_time_hours: float
    censored: bool

    def __post_init__(self) -> None:
        feats = np.array(self.features, dtype=float, copy=True)
        if feats.ndim == 1:
            feats = feats[None, :]
        if feats.ndim != 2 or feats.shape[0] < 1:
            raise DataFormatError(f"stay {self.stay_id}: need at least one feature row")
        if not np.all(np.isfinite(feats)):
            raise DataFormatError(f"stay {self.stay_id}: features contain missing values")
        e = float(self.event_time_hours)
        if not e > 0 or not math.isfinite(e):
            raise DataFormatError(f"stay {self.stay_id}: event_time_hours must be positive")
        if e < feats.shape[0] - 1:
            raise DataFormatError(
                f"stay {self.stay_id}: event at {e} h precedes last feature row "
                f"at {feats.shape[0] - 1} h"
            )
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "event_time_hours", e)
        object.__setattr__(self, "censored", bool(self.censored))

    @property
    def n_snapshots(self) -> int:
        return int(math.ceil(self.event_time_hours))

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class Snapshot:
    stay_id: str
    t_hours: float
    x: np.ndarray
    y_hours: float
    c: bool


@dataclass(frozen=True)
class Dataset:
    stays: tuple[StayRecord, ...]
    split_tag: SplitTag = SplitTag.TRAIN

    def __post_init__(self) -> None:
        stays = tuple(self.stays)
        ids = [s.stay_id for s in stays]
        if len(set(ids)) != len(ids):
            raise DataFormatError("stay_ids must be unique within a dataset")
        dims = {s.d for s in stays}
        if len(dims) > 1:
            raise DataFormatError(f"inconsistent feature dimensions {sorted(dims)}")
        object.__setattr__(self, "stays", stays)

    def __len__(self) -> int:
        return len(self.stays)

    @property
    def d(self) -> int:
        return self.stays[0].d if self.stays else 0

    def subset(self, indices: Sequence[int], split_tag: SplitTag) -> "Dataset":
        return Dataset(tuple(self.stays[i] for i in indices), split_tag)


def snapshots_of(dataset: Dataset) -> Iterator[Snapshot]:
    """Yield one snapshot per whole hour ``t`` before each stay's event.

    Hours past the last feature row reuse the last row (forward fill).
    """
    for stay in dataset.stays:
        last = stay.features.shape[0] - 1
        for t in range(stay.n_snapshots):
            x = stay.features[min(t, last)]
            yield Snapshot(stay.stay_id, float(t), x, stay.event_time_hours - t, stay.censored)


@dataclass(frozen=True)
class SnapshotTable:
    """Column-wise snapshots: the vectorised form of :func:`snapshots_of`."""

    X: np.ndarray
    y: np.ndarray
    c: np.ndarray
    t: np.ndarray
    stay_index: np.ndarray
    stay_ids: tuple[str, ...] = field(default=())

    def __len__(self) -> int:
        return self.y.shape[0]

    @classmethod
    def from_dataset(cls, dataset: Dataset) -> "SnapshotTable":
        d = dataset.d
        if not dataset.stays:
            return cls(np.zeros((0, d)), np.zeros(0), np.zeros(0, bool), np.zeros(0),
                       np.zeros(0, np.int64), ())
        xs, ys, cs, ts, idx = [], [], [], [], []
        for i, stay in enumerate(dataset.stays):
            n = stay.n_snapshots
            t = np.arange(n, dtype=float)
            rows = np.minimum(np.arange(n), stay.features.shape[0] - 1)
            xs.append(stay.features[rows])
            ts.append(t)
            ys.append(stay.event_time_hours - t)
            cs.append(np.full(n, stay.censored))
            idx.append(np.full(n, i, dtype=np.int64))
        return cls(
            np.concatenate(xs), np.concatenate(ys), np.concatenate(cs),
            np.concatenate(ts), np.concatenate(idx),
            tuple(s.stay_id for s in dataset.stays),
        )

    def take(self, rows: np.ndarray) -> "SnapshotTable":
        return SnapshotTable(self.X[rows], self.y[rows], self.c[rows], self.t[rows],
                             self.stay_index[rows], self.stay_ids)


@dataclass(frozen=True)
class SurvivalCurve:
    """Monotone CDF knots ``(h_k, F_k)``, linear in between and anchored at (0, 0)."""

    knots: np.ndarray
    cdf: np.ndarray
    beyond_last: BeyondLast = BeyondLast.CLAMP

    def __post_init__(self) -> None:
        knots = np.array(self.knots, dtype=float)
        cdf = np.array(self.cdf, dtype=float)
        _check_knots(knots)
        if cdf.shape != knots.shape:
            raise ValueError("cdf and knots must have the same length")
        if np.any(cdf < 0) or np.any(cdf > 1) or np.any(np.diff(cdf) < 0):
            raise ValueError("cdf values must be nondecreasing and within [0, 1]")
        knots.setflags(write=False)
        cdf.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "cdf", cdf)

    def F(self, tau_hours: float) -> float:
        return evaluate_curve(self, tau_hours)

    def S(self, tau_hours: float) -> float:
        return 1.0 - evaluate_curve(self, tau_hours)


def _check_knots(knots: np.ndarray) -> None:
    if knots.ndim != 1 or knots.size < 1:
        raise ValueError("need at least one knot")
    if knots[0] <= 0 or np.any(np.diff(knots) <= 0):
        raise ValueError("knots must be positive and strictly ascending")


def evaluate_curve(curve: SurvivalCurve, tau_hours: float) -> float:
    """Evaluate the predicted CDF at ``tau_hours`` (piecewise linear from the origin)."""
    tau = float(tau_hours)
    if tau < 0:
        raise ValueError("tau_hours must be nonnegative")
    if tau > curve.knots[-1]:
        if curve.beyond_last is BeyondLast.UNDEFINED:
            raise QueryBeyondSupport(f"tau={tau} h past last knot {curve.knots[-1]} h")
        clamp_counter.add(1)
        return float(curve.cdf[-1])
    return float(np.interp(tau, np.r_[0.0, curve.knots], np.r_[0.0, curve.cdf]))


class CurveBatch:
    """Many curves sharing one knot grid; row ``i`` is instance ``i``.

    Exposes ``cdf_at(tau)`` so metrics can treat it like any other predictor.
    """

    def __init__(self, knots, cdf, beyond_last: BeyondLast = BeyondLast.CLAMP):
        knots = np.asarray(knots, dtype=float)
        _check_knots(knots)
        cdf = np.asarray(cdf, dtype=float)
        if cdf.ndim != 2 or cdf.shape[1] != knots.size:
            raise ValueError(f"cdf must have shape (n, {knots.size})")
        self.knots = knots
        self.cdf = cdf
        self.beyond_last = beyond_last
        self._grid = np.r_[0.0, knots]

    def __len__(self) -> int:
        return self.cdf.shape[0]

    def __getitem__(self, i: int) -> SurvivalCurve:
        return SurvivalCurve(self.knots, self.cdf[i], self.beyond_last)

    def take(self, rows) -> "CurveBatch":
        return CurveBatch(self.knots, self.cdf[rows], self.beyond_last)

    def cdf_at(self, tau_hours: float, rows=None) -> np.ndarray:
        cdf = self.cdf if rows is None else self.cdf[rows]
        tau = float(tau_hours)
        if tau < 0:
            raise ValueError("tau_hours must be nonnegative")
        if tau >= self.knots[-1]:
            if tau > self.knots[-1]:
                if self.beyond_last is BeyondLast.UNDEFINED:
                    raise QueryBeyondSupport(f"tau={tau} h past last knot {self.knots[-1]} h")
                clamp_counter.add(cdf.shape[0])
            return cdf[:, -1].copy()
        j = int(np.searchsorted(self._grid, tau, side="right")) - 1
        lo, hi = self._grid[j], self._grid[j + 1]
        a = (tau - lo) / (hi - lo)
        left = cdf[:, j - 1] if j > 0 else 0.0
        return (1.0 - a) * left + a * cdf[:, j]

    @classmethod
    def from_curves(cls, curves: Sequence[SurvivalCurve]) -> "CurveBatch":
        if not curves:
            raise ValueError("no curves")
        knots = curves[0].knots
        for cv in curves:
            if not np.array_equal(cv.knots, knots):
                raise ValueError("curves do not share a knot grid")
        return cls(knots, np.stack([cv.cdf for cv in curves]), curves[0].beyond_last)


# --- dataset files -----------------------------------------------------------

def write_dataset(dataset: Dataset, stays_path, features_path) -> None:
    """Write the two-file delimited layout (stays + long-format features)."""
    d = dataset.d
    with open(stays_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stay_id", "event_time_hours", "censored"])
        for s in dataset.stays:
            w.writerow([s.stay_id, repr(s.event_time_hours), int(s.censored)])
    with open(features_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stay_id", "t_hours"] + [f"f{j}" for j in range(d)])
        for s in dataset.stays:
            for t, row in enumerate(s.features):
                w.writerow([s.stay_id, t] + [repr(float(v)) for v in row])


def read_dataset(stays_path, features_path, split_tag: SplitTag = SplitTag.TRAIN) -> Dataset:
    """Read the two-file layout; any structural problem raises DataFormatError."""
    stays_path, features_path = Path(stays_path), Path(features_path)
    meta: dict[str, tuple[float, bool]] = {}
    order: list[str] = []
    try:
        with open(stays_path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r, None)
            if header != ["stay_id", "event_time_hours", "censored"]:
                raise DataFormatError(f"{stays_path}: unexpected header {header}")
            for line_no, row in enumerate(r, start=2):
                if len(row) != 3:
                    raise DataFormatError(f"{stays_path}:{line_no}: expected 3 fields")
                sid, e, c = row
                if c not in ("0", "1"):
                    raise DataFormatError(f"{stays_path}:{line_no}: censored must be 0 or 1")
                if sid in meta:
                    raise DataFormatError(f"{stays_path}:{line_no}: duplicate stay_id {sid}")
                meta[sid] = (float(e), c == "1")
                order.append(sid)

        rows: dict[str, list[tuple[int, list[float]]]] = {sid: [] for sid in order}
        with open(features_path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r, None)
            if not header or header[:2] != ["stay_id", "t_hours"]:
                raise DataFormatError(f"{features_path}: unexpected header {header}")
            names = header[2:]
            if names != [f"f{j}" for j in range(len(names))] or not names:
                raise DataFormatError(f"{features_path}: feature columns must be f0..f{{d-1}}")
            for line_no, row in enumerate(r, start=2):
                if len(row) != len(header):
                    raise DataFormatError(f"{features_path}:{line_no}: wrong field count")
                sid = row[0]
                if sid not in rows:
                    raise DataFormatError(f"{features_path}:{line_no}: unknown stay_id {sid}")
                t = float(row[1])
                if t != int(t):
                    raise DataFormatError(f"{features_path}:{line_no}: t_hours must be whole hours")
                rows[sid].append((int(t), [float(v) for v in row[2:]]))
    except (ValueError, StopIteration) as exc:
        if isinstance(exc, DataFormatError):
            raise
        raise DataFormatError(str(exc)) from exc

    stays = []
    for sid in order:
        recs = sorted(rows[sid])
        if not recs:
            raise DataFormatError(f"stay {sid} has no feature rows")
        if [t for t, _ in recs] != list(range(len(recs))):
            raise DataFormatError(f"stay {sid}: feature rows must cover hours 0..k-1")
        e, c = meta[sid]
        stays.append(StayRecord(sid, np.array([v for _, v in recs]), e, c))
    return Dataset(tuple(stays), split_tag)
