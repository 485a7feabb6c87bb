import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from wrse.core import SnapshotTable
from wrse.nn import EarlyStopping
from wrse.parametric import (NonFiniteLoss, ParametricConfig, TrapezoidGrid, crps_exponential,
                             crps_exponential_grad, crps_exponential_trapezoid, crps_lognormal,
                             crps_lognormal_batch, crps_trapezoid, exponential_cdf, lognormal_cdf,
                             predict_parametric_batch, predict_parametric_curve, train_parametric)
from wrse.persistence import load_model, save_model
from wrse.weighting import DomainError, HorizonGrid


def test_exponential_examples():
    e = math.exp(-1)
    assert crps_exponential(1, 1, 0) == pytest.approx((4 * e - 3) / 2 + 1, abs=1e-14)
    assert crps_exponential(1, 1, 0) == pytest.approx(0.235759, abs=1e-6)
    assert crps_exponential(1, 1, 1) == pytest.approx(0.168091, abs=1e-6)
    assert crps_exponential(0.3, 1e-9, 1) == pytest.approx(0.0, abs=1e-20)
    with pytest.raises(DomainError):
        crps_exponential(0, 1, 0)
    with pytest.raises(DomainError):
        crps_exponential(1, 0, 0)


def test_exponential_vectorised():
    lam = np.array([0.1, 1.0])
    v = crps_exponential(lam, np.array([2.0, 3.0]), np.array([0, 1]))
    assert v.shape == (2,)
    assert v[1] == crps_exponential(1.0, 3.0, 1)


@settings(max_examples=200)
@given(st.floats(1e-3, 1.0), st.floats(0.1, 500), st.floats(0.1, 500))
def test_censored_crps_grows_with_y(lam, a, b):
    lo, hi = min(a, b), max(a, b)
    assert 0 <= crps_exponential(lam, lo, 1) <= crps_exponential(lam, hi, 1) + 1e-12


def test_trapezoid_matches_closed_form():
    for lam, y, c in [(1.0, 1.0, 0), (1.0, 1.0, 1), (0.5, 3.0, 0), (2.0, 0.3, 0)]:
        v = crps_exponential_trapezoid(lam, y, c)
        assert abs(v - crps_exponential(lam, y, c)) <= 1e-4
        assert v.tail_bound >= 0
    # at hour scale the value itself is large; the relative error stays small
    for lam, y, c in [(1 / 24, 30.0, 0), (0.2, 3.0, 1), (0.01, 400.0, 0)]:
        exact = crps_exponential(lam, y, c)
        assert abs(crps_exponential_trapezoid(lam, y, c) - exact) <= 1e-4 * exact


def test_trapezoid_edge_cases():
    g = TrapezoidGrid(64, 10.0)
    assert crps_trapezoid(lambda t: exponential_cdf(t, 1.0), 1e-12, 1, g) == pytest.approx(0.0, abs=1e-20)
    with pytest.raises(DomainError):
        TrapezoidGrid(1)
    with pytest.raises(DomainError):
        TrapezoidGrid(16, -1.0)
    with pytest.raises(DomainError):
        crps_trapezoid(lambda t: t, 1.0, 0, TrapezoidGrid(16))


def test_lognormal_examples():
    assert lognormal_cdf(1.0, 0.0, 1.0) == 0.5
    ref = integrate.quad(lambda u: lognormal_cdf(u, 0, 1) ** 2, 0, 1)[0]
    assert abs(crps_lognormal(0, 1, 1, 1) - ref) <= 1e-4
    vals = [crps_lognormal(1.0, s, math.e, 1) for s in (0.5, 0.1, 0.02, 0.005)]
    assert all(a > b for a, b in zip(vals, vals[1:])) and vals[-1] < 1e-2


def test_lognormal_tail_bound_covers_truncation():
    g = TrapezoidGrid(2048, tail_horizon=20.0, log_spaced=True, log_floor=-3.0)
    v = crps_lognormal(1.0, 1.0, 2.0, 0, g)
    full = crps_lognormal(1.0, 1.0, 2.0, 0)
    assert 0 <= full - v <= v.tail_bound + 1e-6


def test_lognormal_batch_matches_scalar_and_gradient(rng):
    mu, sig = rng.uniform(0, 4, 6), rng.uniform(0.3, 1.5, 6)
    y, c = rng.uniform(1, 100, 6), rng.random(6) < 0.5
    vals, dmu, dsig = crps_lognormal_batch(mu, sig, y, c, n_points=512)
    for i in range(6):
        assert vals[i] == pytest.approx(crps_lognormal(mu[i], sig[i], y[i], c[i]), rel=1e-4)
    h = 1e-6
    fm = (crps_lognormal_batch(mu + h, sig, y, c, 512)[0] - crps_lognormal_batch(mu - h, sig, y, c, 512)[0]) / (2 * h)
    fs = (crps_lognormal_batch(mu, sig + h, y, c, 512)[0] - crps_lognormal_batch(mu, sig - h, y, c, 512)[0]) / (2 * h)
    # node positions depend on mu and sigma only through max/min switches, so
    # away from those the fixed-node derivative is exact
    np.testing.assert_allclose(dmu, fm, rtol=1e-3, atol=1e-6)
    np.testing.assert_allclose(dsig, fs, rtol=2e-2, atol=1e-3)


def test_exponential_gradient_small_and_large_arguments():
    for lam, y in [(1e-3, 0.1), (0.5, 400.0), (0.05, 20.0)]:
        for c in (0, 1):
            h = 1e-7 * lam
            fd = (crps_exponential(lam + h, y, c) - crps_exponential(lam - h, y, c)) / (2 * h)
            assert crps_exponential_grad(lam, y, c) == pytest.approx(fd, rel=1e-5)


def test_patience_semantics():
    s = EarlyStopping(10)
    stops = [s.update(v) for v in [5, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4]]
    assert stops.index(True) == 11 and s.best_epoch == 1


def table(X, y, c):
    n = len(y)
    return SnapshotTable(np.asarray(X, float), np.asarray(y, float), np.asarray(c, bool), np.zeros(n),
                         np.arange(n), tuple(f"s{i}" for i in range(n)))


def test_training_recovers_feature_dependent_rates(rng):
    x = rng.integers(0, 2, 3000).astype(float)
    lam = np.where(x > 0, 1 / 10, 1 / 40)
    y = rng.exponential(1 / lam)
    tr = table(x[:, None], y, np.zeros(3000))
    m = train_parametric(tr, None, ParametricConfig(max_epochs=1500, l2=0.0))
    rates = m.head_params(np.array([[0.0], [1.0]]))["rate"]
    np.testing.assert_allclose(rates, [1 / 40, 1 / 10], rtol=0.15)


def test_lognormal_training_fits_median(rng):
    y = np.exp(rng.normal(3.0, 0.5, 2000))
    tr = table(np.zeros((2000, 1)), y, np.zeros(2000))
    m = train_parametric(tr, tr, ParametricConfig(head="lognormal", max_epochs=300))
    p = m.head_params(np.zeros((1, 1)))
    assert p["mu"][0] == pytest.approx(3.0, abs=0.1)
    assert p["sigma"][0] == pytest.approx(0.5, rel=0.2)


def test_training_errors():
    with pytest.raises(ValueError):
        train_parametric(table(np.zeros((0, 1)), [], []), None)
    bad = table(np.array([[np.nan], [1.0]]), [1.0, 2.0], [0, 0])
    with pytest.raises(NonFiniteLoss, match="epoch 1"):
        train_parametric(bad, None)
    with pytest.raises(ValueError):
        ParametricConfig(head="gamma")


def test_curves_and_archive(tmp_path, rng):
    X = rng.normal(size=(200, 2))
    tr = table(X, rng.exponential(24, 200), rng.random(200) < 0.2)
    for head in ("exponential", "lognormal"):
        m = train_parametric(tr, tr, ParametricConfig(head=head, hidden_sizes=(4,), max_epochs=30))
        batch = predict_parametric_batch(m, tr)
        assert np.all(np.diff(batch.cdf, axis=1) >= 0)
        np.testing.assert_array_equal(predict_parametric_curve(m, X[3]).cdf, batch.cdf[3])
        back = load_model(save_model(m, tmp_path / head))
        np.testing.assert_array_equal(predict_parametric_batch(back, tr).cdf, batch.cdf)


def test_exponential_curve_examples():
    from wrse.nn import inverse_softplus
    m = train_parametric(table(np.zeros((2, 1)), [1.0, 2.0], [0, 0]), None, max_epochs=1, lr=1e-12)
    m.net.b[-1][0] = inverse_softplus(1 / 24)
    m.net.W[-1][:] = 0.0
    lam = m.head_params(np.zeros((1, 1)))["rate"][0]
    cv = predict_parametric_curve(m, [0.0], HorizonGrid(np.array([math.log(2) / lam, 24.0]), "custom"))
    assert cv.cdf[0] == pytest.approx(0.5, abs=1e-7)
    assert cv.cdf[1] == pytest.approx(1 - math.exp(-1), abs=1e-7)
