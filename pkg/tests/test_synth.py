import math

import numpy as np
import pytest

from wrse.core import Dataset, SnapshotTable, snapshots_of
from wrse.synth import (OraclePredictor, Scenario, ScenarioKind, ScenarioMismatch, cohort_summary,
                        draw_latents, generate, oracle_curve, quantize, stay_id)


def test_exponential_marginal_mean():
    sc = Scenario(d=1, beta=(0.0,), baseline_rate=1 / 24, censoring_rate=0.0, seed=11, max_stay_hours=1e9)
    e = np.array([draw_latents(sc, i).death_time for i in range(10_000)])
    assert abs(e.mean() - 24) <= 3 * 24 / math.sqrt(e.size)


def test_no_censoring_when_rate_is_zero():
    ds = generate(Scenario(censoring_rate=0.0), 300)
    assert not any(s.censored for s in ds.stays)


def test_same_seed_is_bit_identical():
    a, b = generate(Scenario(seed=4), 50), generate(Scenario(seed=4), 50)
    for x, y in zip(a.stays, b.stays):
        assert x.stay_id == y.stay_id and x.event_time_hours == y.event_time_hours
        assert x.features.tobytes() == y.features.tobytes()
    c = generate(Scenario(seed=5), 50)
    assert any(x.event_time_hours != y.event_time_hours for x, y in zip(a.stays, c.stays))


def test_stays_are_generated_independently():
    # prefix property of per-stay streams: more stays never change earlier ones
    a, b = generate(Scenario(seed=2), 20), generate(Scenario(seed=2), 40)
    assert [s.event_time_hours for s in a.stays] == [s.event_time_hours for s in b.stays[:20]]


def test_quantization():
    assert quantize(0.01) == 0.5 and quantize(0.5) == 0.5 and quantize(0.51) == 1.5
    assert quantize(1.0) == 1.5 and quantize(1.5) == 1.5 and quantize(7.2) == 7.5
    ds = generate(Scenario(), 200)
    y = SnapshotTable.from_dataset(ds).y
    assert np.all(y > 0) and np.all(y % 1 == 0.5)


def test_oracle_examples():
    sc = Scenario(d=1, beta=(0.0,), baseline_rate=1 / 24)
    snap = next(snapshots_of(generate(sc, 1)))
    cv = oracle_curve(sc, snap)
    assert cv.S(24.0) == pytest.approx(math.exp(-1), rel=1e-14)
    assert cv.S(0.0) == 1.0


def test_exponential_oracle_is_memoryless():
    sc = Scenario(censoring_rate=0.0)
    snaps = [s for s in snapshots_of(generate(sc, 5)) if s.stay_id == stay_id(0)]
    taus = np.array([1.0, 24.0, 100.0])
    ref = oracle_curve(sc, snaps[0]).S(taus)
    for s in snaps[1:]:
        np.testing.assert_allclose(oracle_curve(sc, s).S(taus), ref, rtol=1e-14)


def test_weibull_conditional_survival():
    sc = Scenario(kind=ScenarioKind.WEIBULL_PH, seed=1)
    snaps = [s for s in snapshots_of(generate(sc, 3)) if s.stay_id == stay_id(1)]
    lat = draw_latents(sc, 1)
    r = math.exp(float(np.dot(sc.beta, lat.x0)))
    S0 = lambda t: math.exp(-((t / sc.weibull_scale) ** sc.weibull_shape))
    for s in snaps[:4]:
        for tau in (2.0, 30.0):
            want = (S0(s.t_hours + tau) / S0(s.t_hours)) ** r
            assert oracle_curve(sc, s).S(tau) == pytest.approx(want, rel=1e-12)


def test_time_varying_oracle_is_a_survival_function():
    sc = Scenario(kind=ScenarioKind.TIME_VARYING, drift_sd=0.05, seed=3)
    tab = SnapshotTable.from_dataset(generate(sc, 40))
    S = OraclePredictor(sc, tab).survival(np.linspace(0, 200, 50))
    assert np.all(S[:, 0] == 1.0) and np.all(np.diff(S, axis=1) <= 0) and np.all(S >= 0)


def test_oracle_rejects_foreign_snapshots():
    sc = Scenario()
    tab = SnapshotTable.from_dataset(generate(Scenario(seed=9), 5))
    with pytest.raises(ScenarioMismatch):
        OraclePredictor(sc, tab)
    snap = next(snapshots_of(generate(Scenario(seed=9), 1)))
    with pytest.raises(ScenarioMismatch):
        oracle_curve(sc, snap)


def test_death_fraction_matches_analytic_probability():
    sc = Scenario(d=1, beta=(0.0,), baseline_rate=1 / 48, censoring_rate=1 / 200, seed=8)
    lat = [draw_latents(sc, i) for i in range(5000)]
    h = 24.0
    # stays still uncensored at h: death before h has probability 1 - e^{-h/48}
    at_risk = [l for l in lat if l.discharge_time > h]
    frac = np.mean([l.death_time <= h for l in at_risk])
    p = 1 - math.exp(-h / 48)
    assert abs(frac - p) <= 3 * math.sqrt(p * (1 - p) / len(at_risk))


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(d=2, beta=(1.0,))
    with pytest.raises(ValueError):
        Scenario(baseline_rate=0.0)
    with pytest.raises(ValueError):
        generate(Scenario(), 0)
    assert Scenario().to_dict()["kind"] == "exponential_ph"


def test_summary():
    s = cohort_summary(generate(Scenario(), 100))
    assert s["n_stays"] == 100 and 0 < s["death_fraction"] <= 1
    assert cohort_summary(Dataset(()))["n_stays"] == 0
