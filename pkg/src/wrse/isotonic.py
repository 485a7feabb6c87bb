"""Pool-adjacent-violators isotonic regression and step recalibration maps."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .weighting import DomainError


class EmptyInput(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


@numba.njit(cache=True)
def _pava(y, w, out, blk_val, blk_w, blk_len):
    """Stack-based PAVA; ``out`` receives the fitted values."""
    n = y.shape[0]
    top = -1
    for i in range(n):
        top += 1
        blk_val[top] = y[i]
        blk_w[top] = w[i]
        blk_len[top] = 1
        while top > 0 and blk_val[top - 1] > blk_val[top]:
            wt = blk_w[top - 1] + blk_w[top]
            blk_val[top - 1] = (blk_w[top - 1] * blk_val[top - 1] + blk_w[top] * blk_val[top]) / wt
            blk_w[top - 1] = wt
            blk_len[top - 1] += blk_len[top]
            top -= 1
    pos = 0
    for b in range(top + 1):
        for _ in range(blk_len[b]):
            out[pos] = blk_val[b]
            pos += 1


@numba.njit(cache=True)
def _pava_rows(Y, out):
    n, k = Y.shape
    w = np.ones(k)
    bv = np.empty(k)
    bw = np.empty(k)
    bl = np.empty(k, dtype=np.int64)
    for r in range(n):
        _pava(Y[r], w, out[r], bv, bw, bl)


def pava(values, weights=None) -> np.ndarray:
    """Weighted least-squares projection onto nondecreasing sequences.

    Args:
        values: 1-d sequence to monotonise.
        weights: optional positive weights, same length.

    Returns:
        The fitted nondecreasing vector (a new array).
    """
    y = np.ascontiguousarray(values, dtype=float)
    if y.ndim != 1:
        raise ValueError("values must be one-dimensional")
    if y.size == 0:
        raise EmptyInput("pava needs at least one value")
    if weights is None:
        w = np.ones_like(y)
    else:
        w = np.ascontiguousarray(weights, dtype=float)
        if w.shape != y.shape:
            raise LengthMismatch("weights and values differ in length")
        if np.any(~(w > 0)):
            raise ValueError("weights must be positive")
    n = y.size
    out = np.empty(n)
    _pava(y, w, out, np.empty(n), np.empty(n), np.empty(n, dtype=np.int64))
    return out


def pava_rows(matrix) -> np.ndarray:
    """Unweighted PAVA applied independently to every row of a 2-d array."""
    Y = np.ascontiguousarray(matrix, dtype=float)
    if Y.ndim != 2:
        raise ValueError("expected a 2-d array")
    out = np.empty_like(Y)
    if Y.size:
        _pava_rows(Y, out)
    return out


@dataclass(frozen=True)
class RecalibrationMap:
    """Monotone step function from predicted to calibrated probability.

    Lookup is right-continuous: ``p`` takes the output of the largest
    threshold ``<= p``; values outside the threshold range are clamped.
    """

    thresholds: np.ndarray
    outputs: np.ndarray
    degenerate: bool = False

    def __call__(self, p):
        return apply_recalibration(self, p)


def fit_recalibration(predicted, outcomes) -> RecalibrationMap:
    p = np.asarray(predicted, dtype=float).ravel()
    o = np.asarray(outcomes, dtype=float).ravel()
    if p.shape != o.shape:
        raise LengthMismatch("predicted and outcomes differ in length")
    if p.size < 2:
        raise ValueError("need at least two points to fit a recalibration map")
    thresholds, inverse, counts = np.unique(p, return_inverse=True, return_counts=True)
    sums = np.bincount(inverse, weights=o)
    means = sums / counts
    if thresholds.size == 1:
        return RecalibrationMap(thresholds, means, degenerate=True)
    fitted = pava(means, counts.astype(float))
    return RecalibrationMap(thresholds, np.clip(fitted, 0.0, 1.0))


def apply_recalibration(rmap: RecalibrationMap, p):
    arr = np.asarray(p, dtype=float)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise DomainError("probabilities must lie in [0, 1]")
    j = np.searchsorted(rmap.thresholds, arr, side="right") - 1
    out = rmap.outputs[np.clip(j, 0, rmap.outputs.size - 1)]
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CurveRecalibrator:
    """One recalibration map per knot of a shared curve grid (``None`` = pass through)."""

    knots: np.ndarray
    maps: tuple

    def apply(self, batch):
        from .core import CurveBatch

        if not np.array_equal(batch.knots, self.knots):
            raise ValueError("curve grid differs from the grid the maps were fitted on")
        cdf = np.clip(batch.cdf, 0.0, 1.0)
        out = np.column_stack([cdf[:, k] if m is None else m(cdf[:, k])
                               for k, m in enumerate(self.maps)]) if len(batch) \
            else np.zeros_like(cdf)
        # per-knot maps can cross; project each row back onto a monotone CDF
        return CurveBatch(self.knots, pava_rows(out), batch.beyond_last)


def fit_curve_recalibration(batch, y, c) -> CurveRecalibrator:
    """Fit per-knot maps from validation curves and outcomes.

    At knot ``h`` the outcome is a death with ``y <= h``; snapshots discharged
    before ``h`` are left out.
    """
    y = np.asarray(y, dtype=float)
    c = np.asarray(c, dtype=bool)
    maps = []
    for k, h in enumerate(batch.knots):
        keep = ~(c & (y <= h))
        if keep.sum() < 2:
            maps.append(None)  # too little data: leave this knot as predicted
            continue
        outcome = (y[keep] <= h) & ~c[keep]
        maps.append(fit_recalibration(np.clip(batch.cdf[keep, k], 0.0, 1.0), outcome))
    return CurveRecalibrator(np.asarray(batch.knots, dtype=float), tuple(maps))
