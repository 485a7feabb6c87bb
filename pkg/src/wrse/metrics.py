"""Weighted calibration and time-dependent discrimination.

A predictor is anything with ``cdf_at(tau_hours, rows=None) -> (n,)`` giving
``F_i(tau)`` for each evaluation instance (a :class:`CurveBatch`, an oracle,
a random-score baseline ...). Instances are snapshots with remaining time
``y`` (hours) and censor flag ``c``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .weighting import HOURS_PER_DAY, weight

DEFAULT_HORIZONS_HOURS = tuple(HOURS_PER_DAY * k for k in range(1, 11))
DEFAULT_GAMMAS = (0.3, 0.5, 0.8)
TIE_MODES = ("strict", "half")


class NoInstances(ValueError):
    pass


class NoPairs(ValueError):
    pass


class NoDeaths(ValueError):
    pass


@dataclass(frozen=True)
class EvalSet:
    """Outcomes of the evaluation instances plus the predictor scoring them."""

    predictor: object
    y: np.ndarray
    c: np.ndarray

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float)
        c = np.asarray(self.c, dtype=bool)
        if y.shape != c.shape or y.ndim != 1:
            raise ValueError("y and c must be 1-d arrays of equal length")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "c", c)

    def __len__(self) -> int:
        return self.y.shape[0]


# --- calibration ----------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationCurve:
    bin_mean_predicted: np.ndarray
    bin_fraction_positive: np.ndarray
    bin_counts: np.ndarray

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Vertices of the reliability curve, (0, 0) and (1, 1) included."""
        order = np.argsort(self.bin_mean_predicted, kind="stable")
        q = np.r_[0.0, self.bin_mean_predicted[order], 1.0]
        f = np.r_[0.0, self.bin_fraction_positive[order], 1.0]
        return q, f

    def __call__(self, q):
        qs, fs = self.points()
        return np.interp(q, qs, fs)


def calibration_curve(predicted, outcomes, n_bins: int = 10) -> CalibrationCurve:
    """Equal-width bins on [0, 1]; empty bins are dropped."""
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    p = np.asarray(predicted, dtype=float)
    o = np.asarray(outcomes, dtype=float)
    b = np.minimum(np.floor(p * n_bins).astype(np.int64), n_bins - 1)
    b = np.maximum(b, 0)
    counts = np.bincount(b, minlength=n_bins)
    sum_p = np.bincount(b, weights=p, minlength=n_bins)
    sum_o = np.bincount(b, weights=o, minlength=n_bins)
    keep = counts > 0
    return CalibrationCurve(sum_p[keep] / counts[keep], sum_o[keep] / counts[keep], counts[keep])


def calibration_area(curve: CalibrationCurve) -> float:
    """Exact ``int_0^1 |c(q) - q| dq`` for the piecewise-linear curve."""
    q, f = curve.points()
    d = f - q
    w = np.diff(q)
    d0, d1 = d[:-1], d[1:]
    a0, a1 = np.abs(d0), np.abs(d1)
    same = d0 * d1 >= 0
    tot = a0 + a1
    # a sign change inside a segment leaves two triangles
    cross = np.where(tot > 0, (d0 * d0 + d1 * d1) / (2.0 * np.where(tot > 0, tot, 1.0)), 0.0)
    seg = np.where(same, 0.5 * (a0 + a1), cross) * w
    return float(np.sum(seg))


def _horizon_outcomes(ev: EvalSet, tau: float):
    inside = ev.y <= tau
    keep = ~(ev.c & inside)
    return np.flatnonzero(keep), (inside & ~ev.c)[keep]


@dataclass(frozen=True)
class CalibrationAt:
    tau_hours: float
    area: float
    instance_count: int
    curve: CalibrationCurve


def calibration_area_at(ev: EvalSet, tau_hours: float, n_bins: int = 10) -> CalibrationAt:
    """Calibration area at one horizon.

    Outcome is death within ``tau``; instances discharged before ``tau`` are
    left out.
    """
    rows, outcome = _horizon_outcomes(ev, float(tau_hours))
    if rows.size == 0:
        raise NoInstances(f"no evaluable instances at tau={tau_hours} h")
    pred = np.clip(ev.predictor.cdf_at(float(tau_hours), rows), 0.0, 1.0)
    curve = calibration_curve(pred, outcome, n_bins)
    return CalibrationAt(float(tau_hours), calibration_area(curve), int(rows.size), curve)


@dataclass(frozen=True)
class WeightedValue:
    value: float
    used_horizons: tuple
    dropped_horizons: tuple = ()


def weighted_mean_over_horizons(values: dict, gamma: float) -> float:
    taus = np.array(sorted(values))
    w = weight(gamma, taus / HOURS_PER_DAY)
    v = np.array([values[t] for t in taus])
    return float(np.sum(w * v) / np.sum(w))


def cal_weighted(ev: EvalSet, horizons_hours=DEFAULT_HORIZONS_HOURS, gamma: float = 0.5,
                 n_bins: int = 10, per_horizon: dict | None = None) -> WeightedValue:
    """``sum_tau w(tau) area(tau) / sum_tau w(tau)`` with ``w = gamma^(tau/24)``.

    Horizons without evaluable instances drop out of both sums.
    """
    horizons = [float(h) for h in horizons_hours]
    if not horizons:
        raise ValueError("horizon set is empty")
    areas, dropped = {}, []
    for tau in horizons:
        if per_horizon is not None and tau in per_horizon:
            areas[tau] = per_horizon[tau]
            continue
        try:
            areas[tau] = calibration_area_at(ev, tau, n_bins).area
        except NoInstances:
            dropped.append(tau)
    if not areas:
        raise NoInstances("no horizon has evaluable instances")
    return WeightedValue(weighted_mean_over_horizons(areas, gamma), tuple(sorted(areas)), tuple(dropped))


# --- discrimination -------------------------------------------------------------

@dataclass(frozen=True)
class ConcordanceAt:
    tau_hours: float
    concordant: float
    pair_count: int

    @property
    def fraction(self) -> float:
        return self.concordant / self.pair_count if self.pair_count else math.nan


def _concordance_counts(ev: EvalSet, tau: float, tie_mode: str) -> ConcordanceAt:
    at_risk = np.flatnonzero(ev.y >= tau)
    died = (ev.y[at_risk] == tau) & ~ev.c[at_risk]
    n_d = int(died.sum())
    if n_d == 0 or at_risk.size < 2:
        return ConcordanceAt(tau, 0.0, 0)
    S = 1.0 - np.asarray(ev.predictor.cdf_at(tau, at_risk), dtype=float)
    srt = np.sort(S)
    Si = S[died]
    hi = np.searchsorted(srt, Si, side="right")
    lo = np.searchsorted(srt, Si, side="left")
    greater = srt.size - hi
    conc = float(np.sum(greater))
    if tie_mode == "half":
        ties = (hi - lo) - 1  # the death itself is not its own partner
        conc += 0.5 * float(np.sum(ties))
    return ConcordanceAt(tau, conc, n_d * (at_risk.size - 1))


def concordant_fraction_at(ev: EvalSet, tau_hours: float, tie_mode: str = "strict") -> ConcordanceAt:
    """Fraction of concordant pairs among deaths at exactly ``tau``.

    Pairs are (i died at tau, j != i with y_j >= tau, any censor flag);
    concordant means ``S_i(tau) < S_j(tau)``. ``tie_mode="half"`` gives ties
    half credit.
    """
    if tie_mode not in TIE_MODES:
        raise ValueError(f"tie_mode must be one of {TIE_MODES}")
    res = _concordance_counts(ev, float(tau_hours), tie_mode)
    if res.pair_count == 0:
        raise NoPairs(f"no comparable pairs at tau={tau_hours} h")
    return res


@dataclass(frozen=True)
class ConcordanceTable:
    """Per death time: concordant count and pair count."""

    taus: np.ndarray
    concordant: np.ndarray
    pairs: np.ndarray

    def weighted(self, gamma: float) -> float:
        if self.taus.size == 0 or self.pairs.sum() == 0:
            raise NoDeaths("no comparable pairs")
        w = weight(gamma, self.taus / HOURS_PER_DAY)
        return float(np.sum(self.concordant * w) / np.sum(self.pairs * w))

    def windowed(self, edges_hours) -> list[tuple[float, float, int]]:
        """Pooled (tau, fraction, pairs) over death times in (prev edge, edge]."""
        out = []
        prev = 0.0
        for e in edges_hours:
            m = (self.taus > prev) & (self.taus <= e)
            p = int(self.pairs[m].sum())
            out.append((float(e), float(self.concordant[m].sum() / p) if p else math.nan, p))
            prev = e
        return out


def concordance_table(ev: EvalSet, tie_mode: str = "strict") -> ConcordanceTable:
    if tie_mode not in TIE_MODES:
        raise ValueError(f"tie_mode must be one of {TIE_MODES}")
    taus = np.unique(ev.y[~ev.c])
    rows = [_concordance_counts(ev, float(t), tie_mode) for t in taus]
    return ConcordanceTable(taus.astype(float), np.array([r.concordant for r in rows], dtype=float),
                            np.array([r.pair_count for r in rows], dtype=np.int64))


def ctd_weighted(ev: EvalSet, gamma: float, tie_mode: str = "strict") -> float:
    """Weighted time-dependent concordance over all distinct death times."""
    if not np.any(~ev.c):
        raise NoDeaths("no uncensored instances")
    return concordance_table(ev, tie_mode).weighted(gamma)


# --- reports ----------------------------------------------------------------------

def _num(v):
    if v is None:
        return None
    v = float(v)
    return None if math.isnan(v) else v


@dataclass
class MetricReport:
    """Per-horizon rows plus the weighted scalars for each gamma."""

    per_horizon: list = field(default_factory=list)
    weighted: dict = field(default_factory=dict)
    dropped_horizons: list = field(default_factory=list)
    n_instances: int = 0
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "n_instances": self.n_instances,
            "dropped_horizons": [float(t) for t in self.dropped_horizons],
            "per_horizon": {
                "tau_hours": [float(r["tau_hours"]) for r in self.per_horizon],
                "cal_area": [_num(r["cal_area"]) for r in self.per_horizon],
                "concordant_fraction": [_num(r["concordant_fraction"]) for r in self.per_horizon],
                "pair_count": [int(r["pair_count"]) for r in self.per_horizon],
                "instance_count": [int(r["instance_count"]) for r in self.per_horizon],
            },
            "weighted": {f"{g:g}": {k: _num(v) for k, v in sorted(m.items())}
                         for g, m in sorted(self.weighted.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tau_hours", "cal_area", "concordant_fraction", "pair_count"])
        for r in self.per_horizon:
            w.writerow([repr(float(r["tau_hours"])), _fmt(r["cal_area"]),
                        _fmt(r["concordant_fraction"]), int(r["pair_count"])])
        return buf.getvalue()


def _fmt(v) -> str:
    v = _num(v)
    return "" if v is None else repr(v)


def evaluate(ev: EvalSet, gammas=DEFAULT_GAMMAS, horizons_hours=DEFAULT_HORIZONS_HOURS,
             n_bins: int = 10, tie_mode: str = "strict", label: str = "") -> MetricReport:
    """Full report: per-horizon calibration/concordance and weighted aggregates.

    The per-horizon concordance at ``tau`` pools death times in the window
    since the previous horizon, because deaths at exactly a whole-day ``tau``
    need not exist.
    """
    horizons = [float(h) for h in horizons_hours]
    cal, counts, dropped = {}, {}, []
    for tau in horizons:
        try:
            r = calibration_area_at(ev, tau, n_bins)
            cal[tau], counts[tau] = r.area, r.instance_count
        except NoInstances:
            dropped.append(tau)
            counts[tau] = 0
    table = concordance_table(ev, tie_mode)
    windows = table.windowed(horizons)
    rows = []
    for tau, (_, frac, pairs) in zip(horizons, windows):
        rows.append({"tau_hours": tau, "cal_area": cal.get(tau, math.nan),
                     "concordant_fraction": frac, "pair_count": pairs, "instance_count": counts[tau]})
    weighted = {}
    for g in gammas:
        g = float(g)
        m = {"cal_w": weighted_mean_over_horizons(cal, g) if cal else math.nan}
        try:
            m["ctd_w"] = table.weighted(g)
        except NoDeaths:
            m["ctd_w"] = math.nan
        weighted[g] = m
    return MetricReport(rows, weighted, dropped, len(ev), label)


@dataclass
class SplitSummary:
    """Mean and standard error of each metric across split reports."""

    label: str
    n_splits: int
    weighted: dict
    per_horizon: dict
    insufficient_replicates: bool

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "n_splits": self.n_splits,
            "insufficient_replicates": self.insufficient_replicates,
            "weighted": {f"{g:g}": {k: {"mean": _num(v[0]), "se": _num(v[1])} for k, v in sorted(m.items())}
                         for g, m in sorted(self.weighted.items())},
            "per_horizon": {k: {"mean": [_num(x) for x in v[0]], "se": [_num(x) for x in v[1]]}
                            for k, v in sorted(self.per_horizon.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def mean_se(values) -> tuple[float, float]:
    v = np.asarray([x for x in values if x is not None and not math.isnan(x)], dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    if v.size == 1 or np.all(v == v[0]):
        # identical replicates: skip the mean's rounding, the spread is exactly 0
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def aggregate_splits(reports: list[MetricReport], label: str = "") -> SplitSummary:
    """Mean and ``sd / sqrt(n)`` per metric; one split gives se 0 and a flag."""
    if not reports:
        raise ValueError("need at least one report")
    gammas = sorted(reports[0].weighted)
    weighted = {}
    for g in gammas:
        keys = sorted(reports[0].weighted[g])
        weighted[g] = {k: mean_se([r.weighted[g][k] for r in reports]) for k in keys}
    per_h = {}
    taus = [r["tau_hours"] for r in reports[0].per_horizon]
    per_h["tau_hours"] = (taus, [0.0] * len(taus))
    for key in ("cal_area", "concordant_fraction"):
        cols = [mean_se([r.per_horizon[i][key] for r in reports]) for i in range(len(taus))]
        per_h[key] = ([c[0] for c in cols], [c[1] for c in cols])
    return SplitSummary(label or reports[0].label, len(reports), weighted, per_h, len(reports) < 2)
