import numpy as np
import pytest

from wrse.core import SnapshotTable
from wrse.learners import (BASE_KINDS, ConstantClassifier, DimensionMismatch, EmptyResult, GBTClassifier,
                           GbtConfig, HorizonLabeledSet, base_config, classifier_from_bytes, make_horizon_labels,
                           predict_proba, train_ffnet, train_gbt, train_logistic, trainer_for)
from wrse.learners.ffnet import loss_and_grads
from wrse.nn import MLP, EarlyStopping, log_loss, sigmoid


def labeled(X, y, h=24.0):
    X = np.asarray(X, dtype=float)
    return HorizonLabeledSet(X, np.asarray(y, dtype=float), np.arange(len(y)), h)


def table(y, c, d=2):
    n = len(y)
    return SnapshotTable(np.zeros((n, d)), np.asarray(y, float), np.asarray(c, bool), np.zeros(n),
                         np.arange(n), tuple(f"s{i}" for i in range(n)))


def test_horizon_label_examples():
    hs = make_horizon_labels(table([10, 30, 10], [False, True, True]), 24)
    np.testing.assert_array_equal(hs.labels, [1, 0])
    np.testing.assert_array_equal(hs.kept_indices, [0, 1])


def test_horizon_label_boundary_and_errors():
    hs = make_horizon_labels(table([24.0, 24.5], [False, True]), 24)
    np.testing.assert_array_equal(hs.labels, [1, 0])
    with pytest.raises(EmptyResult):
        make_horizon_labels(table([1.0, 2.0], [True, True]), 24)
    assert len(make_horizon_labels(table([1.0], [True]), 24, allow_empty=True)) == 0
    with pytest.raises(ValueError):
        make_horizon_labels(table([1.0], [False]), 0)


def separable(rng, n=200):
    X = rng.normal(size=(n, 2))
    y = (X[:, 0] + X[:, 1] > 0).astype(float)
    return X, y


def test_gbt_separable_toy(rng):
    X, y = separable(rng)
    clf = train_gbt(labeled(X, y), None, GbtConfig(min_samples_leaf=5))
    assert log_loss(y, clf.predict_proba(X)) < 0.1
    Xt, yt = separable(rng)
    # axis-aligned splits only approximate the diagonal boundary
    assert np.mean((clf.predict_proba(Xt) > 0.5) == yt) > 0.85


def test_gbt_single_class_is_flagged_prior():
    clf = train_gbt(labeled(np.zeros((5, 2)), np.ones(5)), None)
    assert isinstance(clf, ConstantClassifier) and clf.degenerate
    np.testing.assert_array_equal(clf.predict_proba(np.ones((3, 2))), [1.0, 1.0, 1.0])


def test_gbt_config_validation():
    with pytest.raises(ValueError):
        GbtConfig(max_trees=0)
    assert GbtConfig.paper().learning_rate == 0.01


def test_gbt_zero_trees_predicts_prior():
    clf = GBTClassifier(np.log(0.25 / 0.75), [], 0.1, 3)
    np.testing.assert_allclose(clf.predict_proba(np.zeros((4, 3))), 0.25)


def test_gbt_early_stopping_keeps_best_round(rng):
    X = rng.normal(size=(400, 3))
    y = (rng.random(400) < 0.3).astype(float)  # pure noise: validation loss stops improving fast
    clf = train_gbt(labeled(X[:300], y[:300]), labeled(X[300:], y[300:]), GbtConfig(early_stop_patience=3))
    assert clf.rounds_used <= 200 and clf.best_round <= clf.rounds_used
    assert len(clf.trees) == clf.best_round


def test_gbt_is_deterministic(rng):
    X, y = separable(rng)
    a = train_gbt(labeled(X, y), labeled(X, y)).to_bytes()
    b = train_gbt(labeled(X, y), labeled(X, y)).to_bytes()
    assert a == b


def test_logistic_threshold_rule(rng):
    X = rng.uniform(-1, 1, (300, 1))
    y = (X[:, 0] > 0.2).astype(float)
    clf = train_logistic(labeled(X[:200], y[:200]), labeled(X[200:], y[200:]), max_epochs=3000, patience=50)
    assert np.mean((clf.predict_proba(X[200:]) > 0.5) == y[200:]) > 0.95


def test_logistic_untrained_predicts_half():
    clf = train_logistic(labeled(np.ones((4, 2)), [0, 1, 0, 1]), None, max_epochs=1, lr=0.0)
    np.testing.assert_array_equal(clf.predict_proba(np.ones((2, 2))), [0.5, 0.5])


def test_logistic_huge_l2_leaves_only_the_prior(rng):
    X = rng.normal(size=(200, 3))
    y = (X[:, 0] > 0.5).astype(float)
    clf = train_logistic(labeled(X, y), None, l2=1e9, max_epochs=3000)
    assert np.max(np.abs(clf.weights)) < 1e-6
    np.testing.assert_allclose(clf.predict_proba(X), y.mean(), atol=1e-4)


def test_logistic_definition():
    from wrse.learners import LogisticClassifier
    clf = LogisticClassifier([0.5, -1.0], 0.25)
    x = np.array([[2.0, 1.0]])
    np.testing.assert_allclose(predict_proba(clf, x), sigmoid(0.5 * 2 - 1 + 0.25))
    with pytest.raises(DimensionMismatch):
        clf.predict_proba(np.ones((1, 3)))


def test_ffnet_xor(rng):
    X = rng.uniform(-1, 1, (400, 2))
    y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(float)
    clf = train_ffnet(labeled(X, y), None, hidden_sizes=(16, 16), lr=1e-2, max_epochs=1500)
    assert np.mean((clf.predict_proba(X) > 0.5) == y) > 0.9


def test_ffnet_without_hidden_layers_matches_logistic(rng):
    X = rng.normal(size=(200, 2))
    y = (X[:, 0] - X[:, 1] > 0).astype(float)
    net = train_ffnet(labeled(X, y), None, hidden_sizes=(), lr=0.05, l2=0.0, max_epochs=2000)
    lin = train_logistic(labeled(X, y), None, lr=2.0, l2=0.0, max_epochs=20000)
    # both are affine-logit models fitted to the same loss
    assert np.mean((net.predict_proba(X) > 0.5) == (lin.predict_proba(X) > 0.5)) > 0.97


def test_ffnet_gradient_check(rng):
    net = MLP(3, (5, 4), 1, rng)
    X = rng.normal(size=(20, 3))
    y = (rng.random(20) < 0.5).astype(float)
    _, grads = loss_and_grads(net, X, y, 0.01)
    for p, g in zip(net.params, grads):
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + 1e-6
            up, _ = loss_and_grads(net, X, y, 0.01)
            p[idx] = old - 1e-6
            dn, _ = loss_and_grads(net, X, y, 0.01)
            p[idx] = old
            fd = (up - dn) / 2e-6
            assert abs(g[idx] - fd) <= 1e-4 * max(abs(fd), 1e-3)


def test_early_stopping():
    s = EarlyStopping(2)
    assert [s.update(v) for v in (1.0, 0.9, 0.95, 0.9)] == [False, False, False, True]
    assert s.best_epoch == 1


@pytest.mark.parametrize("kind", BASE_KINDS)
def test_round_trip_bytes(kind, rng):
    X, y = separable(rng, 120)
    cfg = base_config(kind, {"hidden_sizes": [4]} if kind == "ffnet" else {})
    clf = trainer_for(kind, cfg)(labeled(X, y), labeled(X, y))
    back = classifier_from_bytes(clf.kind, clf.to_bytes())
    np.testing.assert_array_equal(back.predict_proba(X), clf.predict_proba(X))
    assert back.to_bytes() == clf.to_bytes()


def test_constant_round_trip():
    clf = ConstantClassifier(0.3, 4, degenerate=True)
    back = classifier_from_bytes("constant", clf.to_bytes())
    assert back.probability == 0.3 and back.degenerate and back.n_features == 4


def test_base_config_rejects_unknown():
    with pytest.raises(ValueError):
        base_config("forest")
    with pytest.raises(ValueError):
        base_config("gbt", {"preset": "huge"})
    assert base_config("gbt", {"preset": "paper"}).max_leaves == 64
