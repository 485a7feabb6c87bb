"""Synthetic censored cohorts with closed-form ground truth.

Every stay draws from its own PCG64 stream, derived from the scenario seed and
the stay index (``SeedSequence(seed, spawn_key=(i,))``). A stay therefore
looks the same however many stays are generated or in what order, and its
latent variables can be regenerated later to build the true survival curve.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import Dataset, SnapshotTable, SplitTag, StayRecord


class ScenarioMismatch(ValueError):
    """The snapshot was not produced by the scenario being asked about."""


class ScenarioKind(str, enum.Enum):
    EXPONENTIAL_PH = "exponential_ph"
    WEIBULL_PH = "weibull_ph"
    TIME_VARYING = "time_varying"


@dataclass(frozen=True)
class Scenario:
    """Generative description of a cohort.

    Rates are per hour. ``baseline_rate`` is the exponential/time-varying
    baseline hazard; ``weibull_shape``/``weibull_scale`` (hours) define the
    Weibull baseline. ``drift_sd`` is the per-hour standard deviation of the
    linear feature drift in the time-varying scenario. Stays still open at
    ``max_stay_hours`` are discharged there.
    """

    kind: ScenarioKind = ScenarioKind.EXPONENTIAL_PH
    d: int = 5
    beta: tuple[float, ...] = (1.2, -0.8, 0.6, 0.0, 0.0)
    baseline_rate: float = 1.0 / 48.0
    weibull_shape: float = 1.5
    weibull_scale: float = 72.0
    drift_sd: float = 0.01
    censoring_rate: float = 1.0 / 2000.0
    seed: int = 0
    max_stay_hours: float = 24.0 * 365.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        beta = tuple(float(b) for b in self.beta)
        object.__setattr__(self, "beta", beta)
        if self.d < 1 or len(beta) != self.d:
            raise ValueError(f"beta must have d={self.d} entries, got {len(beta)}")
        if not self.baseline_rate > 0:
            raise ValueError("baseline_rate must be positive")
        if not (self.weibull_shape > 0 and self.weibull_scale > 0):
            raise ValueError("Weibull shape and scale must be positive")
        if self.censoring_rate < 0 or self.drift_sd < 0:
            raise ValueError("censoring_rate and drift_sd must be nonnegative")
        if not self.max_stay_hours > 1:
            raise ValueError("max_stay_hours must exceed 1")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["kind"] = self.kind.value
        out["beta"] = list(self.beta)
        return out


@dataclass(frozen=True)
class StayLatents:
    x0: np.ndarray
    drift: np.ndarray
    death_time: float
    discharge_time: float


def stay_id(index: int) -> str:
    return f"s{index:06d}"


def stay_index(sid: str) -> int:
    if not (sid.startswith("s") and sid[1:].isdigit()):
        raise ScenarioMismatch(f"stay id {sid!r} was not produced by the generator")
    return int(sid[1:])


def _rng(scenario: Scenario, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(scenario.seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


def draw_latents(scenario: Scenario, index: int) -> StayLatents:
    """Features, drift and the two competing event times of stay ``index``."""
    rng = _rng(scenario, index)
    beta = np.array(scenario.beta)
    x0 = rng.standard_normal(scenario.d)
    drift = rng.standard_normal(scenario.d) * scenario.drift_sd
    if scenario.kind is not ScenarioKind.TIME_VARYING:
        drift = np.zeros(scenario.d)
    e = rng.standard_exponential()
    u = rng.standard_exponential()
    risk = math.exp(float(beta @ x0))
    if scenario.kind is ScenarioKind.EXPONENTIAL_PH:
        death = e / (scenario.baseline_rate * risk)
    elif scenario.kind is ScenarioKind.WEIBULL_PH:
        death = scenario.weibull_scale * (e / risk) ** (1.0 / scenario.weibull_shape)
    else:
        a = scenario.baseline_rate * risk
        b = float(beta @ drift)
        death = _invert_drift_hazard(a, b, e)
    discharge = u / scenario.censoring_rate if scenario.censoring_rate > 0 else math.inf
    return StayLatents(x0, drift, float(death), float(discharge))


def _invert_drift_hazard(a: float, b: float, target: float) -> float:
    """Solve ``int_0^T a e^{b s} ds = target`` for T (inf if never reached)."""
    if abs(b) < 1e-12:
        return target / a
    arg = b * target / a
    if arg <= -1.0:
        return math.inf
    return math.log1p(arg) / b


def quantize(v: float) -> float:
    """Round an event time onto the half-hour lattice 0.5, 1.5, 2.5, ...

    Events never coincide with whole-hour snapshot times, so remaining times
    ``y`` are exact half-integers and never 0.
    """
    return math.ceil(v - 0.5) + 0.5


def _stay(scenario: Scenario, index: int) -> StayRecord:
    lat = draw_latents(scenario, index)
    raw = min(lat.death_time, lat.discharge_time, scenario.max_stay_hours)
    censored = not lat.death_time <= min(lat.discharge_time, scenario.max_stay_hours)
    event = quantize(raw)
    n_rows = int(math.ceil(event))
    t = np.arange(n_rows, dtype=float)[:, None]
    feats = lat.x0[None, :] + t * lat.drift[None, :]
    return StayRecord(stay_id(index), feats, event, censored)


def generate(scenario: Scenario, n_stays: int, split_tag: SplitTag = SplitTag.TRAIN) -> Dataset:
    """Cohort of ``n_stays`` stays in generation (admission) order."""
    if int(n_stays) != n_stays or n_stays < 1:
        raise ValueError("n_stays must be a positive integer")
    return Dataset(tuple(_stay(scenario, i) for i in range(int(n_stays))), split_tag)


# --- ground truth -------------------------------------------------------------

@dataclass(frozen=True)
class OracleCurve:
    """True conditional survival ``S(tau | alive at t, x)`` of one snapshot."""

    scenario: Scenario
    latents: StayLatents
    t_hours: float

    def S(self, tau_hours):
        tau = np.asarray(tau_hours, dtype=float)
        out = np.exp(-_cum_hazard(self.scenario, self.latents.x0[None, :], self.latents.drift[None, :],
                                  np.array([self.t_hours]), tau.reshape(1, -1))[0])
        out = out.reshape(tau.shape)
        return float(out) if out.ndim == 0 else out

    def F(self, tau_hours):
        return 1.0 - self.S(tau_hours)


def _cum_hazard(scenario: Scenario, x0, drift, t, tau):
    """Hazard accumulated over ``(t, t + tau]``; x0/drift are (n, d), t (n,), tau (n, m)."""
    beta = np.array(scenario.beta)
    risk = np.exp(np.einsum("ij,j->i", x0, beta))[:, None]
    t = t[:, None]
    if scenario.kind is ScenarioKind.EXPONENTIAL_PH:
        return scenario.baseline_rate * risk * tau
    if scenario.kind is ScenarioKind.WEIBULL_PH:
        k, s = scenario.weibull_shape, scenario.weibull_scale
        return risk * (((t + tau) / s) ** k - (t / s) ** k)
    a = scenario.baseline_rate * risk
    b = np.einsum("ij,j->i", drift, beta)[:, None]
    safe_b = np.where(np.abs(b) < 1e-12, 1.0, b)
    grown = a * np.exp(safe_b * t) * np.expm1(safe_b * tau) / safe_b
    return np.where(np.abs(b) < 1e-12, a * tau, grown)


def _check_snapshot(scenario: Scenario, sid: str, t: float, x, latents: StayLatents) -> None:
    expect = latents.x0 + t * latents.drift
    if np.asarray(x).shape != expect.shape or not np.allclose(x, expect, rtol=0, atol=1e-9):
        raise ScenarioMismatch(f"snapshot of {sid} at t={t} does not match the scenario")


def oracle_curve(scenario: Scenario, snapshot) -> OracleCurve:
    """Ground-truth survival for a snapshot produced by ``generate(scenario, ...)``."""
    idx = stay_index(snapshot.stay_id)
    lat = draw_latents(scenario, idx)
    _check_snapshot(scenario, snapshot.stay_id, snapshot.t_hours, snapshot.x, lat)
    return OracleCurve(scenario, lat, float(snapshot.t_hours))


class OraclePredictor:
    """True-distribution predictor for every row of a snapshot table.

    Implements ``cdf_at(tau, rows=None)`` like :class:`CurveBatch`, so it can
    be scored by the metrics exactly like a fitted model.
    """

    def __init__(self, scenario: Scenario, table: SnapshotTable, check: bool = True):
        self.scenario = scenario
        ids = table.stay_ids
        lat = {}
        for i in np.unique(table.stay_index):
            lat[i] = draw_latents(scenario, stay_index(ids[i]))
        self.x0 = np.stack([lat[i].x0 for i in table.stay_index]) if len(table) else np.zeros((0, scenario.d))
        self.drift = np.stack([lat[i].drift for i in table.stay_index]) if len(table) else np.zeros((0, scenario.d))
        self.t = table.t.copy()
        if check and len(table):
            expect = self.x0 + self.t[:, None] * self.drift
            if expect.shape != table.X.shape or not np.allclose(expect, table.X, rtol=0, atol=1e-9):
                raise ScenarioMismatch("snapshot features do not match the scenario")

    def __len__(self) -> int:
        return self.t.shape[0]

    def survival(self, taus, rows=None) -> np.ndarray:
        """Matrix of ``S(tau_j)`` for the selected rows."""
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        sel = slice(None) if rows is None else rows
        t = self.t[sel]
        H = _cum_hazard(self.scenario, self.x0[sel], self.drift[sel], t,
                        np.broadcast_to(taus, (t.shape[0], taus.size)))
        return np.exp(-H)

    def cdf_at(self, tau_hours: float, rows=None) -> np.ndarray:
        return -np.expm1(-self._H(tau_hours, rows))

    def _H(self, tau, rows):
        sel = slice(None) if rows is None else rows
        t = self.t[sel]
        return _cum_hazard(self.scenario, self.x0[sel], self.drift[sel], t,
                           np.full((t.shape[0], 1), float(tau)))[:, 0]


class AntiOraclePredictor:
    """Swaps survival and CDF of a base predictor: ``S' = F``."""

    def __init__(self, base):
        self.base = base

    def cdf_at(self, tau_hours: float, rows=None) -> np.ndarray:
        return 1.0 - self.base.cdf_at(tau_hours, rows)


class RandomScorePredictor:
    """Exponential curves with a random rate per instance, unrelated to the data.

    Every instance keeps one uniform score ``u`` at all horizons, so rankings
    are pure noise.
    """

    def __init__(self, n: int, seed: int = 0, scale_hours: float = 48.0):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        self.u = rng.random(n)
        self.scale = scale_hours

    def cdf_at(self, tau_hours: float, rows=None) -> np.ndarray:
        u = self.u if rows is None else self.u[rows]
        return -np.expm1(-u * float(tau_hours) / self.scale)


class ConstantPredictor:
    """The same curve for everybody (``F(tau) = 1 - exp(-tau/scale)``)."""

    def __init__(self, n: int, scale_hours: float = 48.0):
        self.n = n
        self.scale = scale_hours

    def cdf_at(self, tau_hours: float, rows=None) -> np.ndarray:
        m = self.n if rows is None else np.arange(self.n)[rows].size
        return np.full(m, -math.expm1(-float(tau_hours) / self.scale))


def cohort_summary(dataset: Dataset) -> dict:
    e = np.array([s.event_time_hours for s in dataset.stays])
    c = np.array([s.censored for s in dataset.stays])
    return {
        "n_stays": len(dataset),
        "death_fraction": float(np.mean(~c)) if len(e) else 0.0,
        "median_stay_hours": float(np.median(e)) if len(e) else 0.0,
        "n_snapshots": int(sum(s.n_snapshots for s in dataset.stays)),
    }
