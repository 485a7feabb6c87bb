import numpy as np
import pytest

from wrse.core import BeyondLast, SnapshotTable
from wrse.ensemble import HorizonTrainingError, WrseModel, fit_wrse, predict_batch, predict_cdf
from wrse.learners import ConstantClassifier, DimensionMismatch, make_horizon_labels
from wrse.persistence import ArchiveError, archive_digest, load_model, save_model
from wrse.splits import temporal_splits
from wrse.synth import Scenario, generate
from wrse.weighting import even_horizons, weighted_horizons


@pytest.fixture(scope="module")
def small():
    ds = generate(Scenario(seed=7), 300)
    tr, va, te = (SnapshotTable.from_dataset(d) for d in temporal_splits(len(ds), 1)[0].datasets(ds))
    return tr, va, te


FAST = {"max_trees": 20}


def constant_model(probs, d=2):
    grid = even_horizons(len(probs), len(probs))
    return WrseModel(grid, tuple(ConstantClassifier(p, d) for p in probs), "constant")


def test_projection_examples():
    cv = predict_cdf(constant_model([0.3, 0.2, 0.5]), [0.0, 0.0])
    np.testing.assert_allclose(cv.cdf, [0.25, 0.25, 0.5])
    cv = predict_cdf(constant_model([0.1, 0.4, 0.8]), [0.0, 0.0])
    np.testing.assert_array_equal(cv.cdf, [0.1, 0.4, 0.8])
    for k, h in enumerate(cv.knots):
        assert cv.F(h) == cv.cdf[k]


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        predict_cdf(constant_model([0.1]), [0.0, 0.0, 1.0])


def test_label_frequency_family_needs_no_projection(small):
    tr = small[0]
    grid = weighted_horizons(0.5, 8)
    # nested positives: the death-within-h frequency can only grow with h
    probs = [make_horizon_labels(tr, h).labels.mean() for h in grid.horizons_hours]
    model = WrseModel(grid, tuple(ConstantClassifier(p, tr.X.shape[1]) for p in probs), "constant")
    assert np.all(np.diff(probs) >= 0)
    np.testing.assert_array_equal(predict_batch(model, tr.X[:5]).cdf, np.tile(probs, (5, 1)))


def test_fit_and_predict(small):
    tr, va, te = small
    model = fit_wrse(tr, va, weighted_horizons(0.5, 4), base_config=FAST)
    assert len(model.classifiers) == 4
    batch = predict_batch(model, te)
    assert batch.cdf.shape == (len(te), 4)
    assert np.all(np.diff(batch.cdf, axis=1) >= 0)
    for i in (0, len(te) // 2, len(te) - 1):
        np.testing.assert_array_equal(predict_cdf(model, te.X[i]).cdf, batch.cdf[i])
    assert len(predict_batch(model, np.zeros((0, te.X.shape[1])))) == 0


def test_single_horizon_is_one_classifier(small):
    tr, va, te = small
    model = fit_wrse(tr, va, even_horizons(1, 1), base_config=FAST)
    direct = model.classifiers[0].predict_proba(te.X)
    np.testing.assert_array_equal(predict_batch(model, te).cdf[:, 0], np.clip(direct, 0, 1))


def test_paper_grid_size(small):
    tr, va, _ = small
    grid = weighted_horizons(0.5, 15)
    model = fit_wrse(tr, va, grid, base_kind="logistic", base_config={"max_epochs": 50})
    assert len(model.classifiers) == 15
    np.testing.assert_array_equal([c for c in grid.horizons_hours], model.grid.horizons_hours)


def test_workers_give_identical_models(small, tmp_path):
    tr, va, te = small
    grid = weighted_horizons(0.5, 3)
    a = fit_wrse(tr, va, grid, base_config=FAST, workers=1)
    b = fit_wrse(tr, va, grid, base_config=FAST, workers=3)
    assert [c.to_bytes() for c in a.classifiers] == [c.to_bytes() for c in b.classifiers]
    np.testing.assert_array_equal(predict_batch(a, te, workers=2, chunk=50).cdf, predict_batch(a, te).cdf)


def test_errors_are_annotated_with_k(small):
    tr, va, _ = small
    all_censored = SnapshotTable(tr.X, np.minimum(tr.y, 1.0), np.ones_like(tr.c), tr.t, tr.stay_index, tr.stay_ids)
    with pytest.raises(HorizonTrainingError) as exc:
        fit_wrse(all_censored, va, even_horizons(2, 2), base_config=FAST)
    assert exc.value.k == 1
    with pytest.raises(ValueError):
        fit_wrse(tr.take(np.arange(0)), va, even_horizons(2, 2))


def test_archive_round_trip(small, tmp_path):
    tr, va, te = small
    for kind, cfg in (("gbt", FAST), ("logistic", {"max_epochs": 30}), ("ffnet", {"hidden_sizes": [4], "max_epochs": 30})):
        model = fit_wrse(tr, va, weighted_horizons(0.5, 3), base_kind=kind, base_config=cfg,
                         beyond_last=BeyondLast.UNDEFINED)
        d = save_model(model, tmp_path / kind)
        back = load_model(d)
        assert back.beyond_last is BeyondLast.UNDEFINED and back.base_kind == kind
        np.testing.assert_array_equal(predict_batch(back, te).cdf, predict_batch(model, te).cdf)
        save_model(back, tmp_path / (kind + "2"))
        assert archive_digest(tmp_path / kind) == archive_digest(tmp_path / (kind + "2"))


def test_archive_errors(tmp_path):
    with pytest.raises(ArchiveError):
        load_model(tmp_path)
    (tmp_path / "manifest.json").write_text('{"format": "other"}')
    with pytest.raises(ArchiveError):
        load_model(tmp_path)
