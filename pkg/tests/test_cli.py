import json
import subprocess
import sys

import numpy as np
import pytest

from wrse import experiment as E
from wrse.cli import main
from wrse.core import read_dataset
from wrse.persistence import archive_digest
from wrse.splits import temporal_splits
from wrse.synth import Scenario, generate

SMALL = {
    "scenario": {"n_stays": 300},
    "split": {"n_splits": 2},
    "models": {"wrse": {"K": 3, "base_config": {"max_trees": 20}},
               "parametric": {"head": "exponential", "predictor": {"max_epochs": 50}}},
    "metrics": {"include_reference": True},
    "sweep": {"spacings": ["even", "weighted:0.5"], "K": [2, 3, 4], "base_learners": ["logistic"]},
    "importance": {"n_repeats": 1},
}


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def run(tmp_path, cmd, cfg=SMALL, *extra):
    return main([cmd, "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path / "out"), *extra])


def test_generate_round_trip(tmp_path, capsys):
    assert run(tmp_path, "generate") == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["n_stays"] == 300
    back = read_dataset(tmp_path / "out/data/stays.csv", tmp_path / "out/data/features.csv")
    ref = generate(Scenario(), 300)
    for a, b in zip(ref.stays, back.stays):
        assert a.stay_id == b.stay_id and a.event_time_hours == b.event_time_hours and a.censored == b.censored
        np.testing.assert_array_equal(a.features, b.features)


def test_seed_override_changes_cohort(tmp_path, capsys):
    run(tmp_path, "generate")
    a = (tmp_path / "out/data/stays.csv").read_text()
    run(tmp_path, "generate", SMALL, "--seed", "3")
    b = (tmp_path / "out/data/stays.csv").read_text()
    assert a != b and a.splitlines()[0] == b.splitlines()[0]


@pytest.mark.parametrize("cfg,fragment", [
    ({"metrics": {"gammas": [1.2]}}, "metrics.gammas"),
    ({"models": {"wrse": {"gamma": 1.2}}}, "models.wrse.gamma"),
    ({"scenario": {"bogus": 1}}, "scenario.bogus"),
    ({"runtime": {"workers": 0}}, "runtime.workers"),
    ({"scenario": {"stays_path": "/nonexistent/s.csv", "features_path": "/nonexistent/f.csv"}}, "scenario"),
])
def test_config_errors_exit_2(tmp_path, capsys, cfg, fragment):
    assert run(tmp_path, "generate", cfg) == 2
    assert fragment in capsys.readouterr().err


def test_data_errors_exit_3(tmp_path, capsys):
    (tmp_path / "s.csv").write_text("stay_id,event_time_hours,censored\na,2.5,0\n")
    (tmp_path / "f.csv").write_text("stay_id,t_hours,f0\nzz,0,1\n")
    cfg = {"scenario": {"stays_path": str(tmp_path / "s.csv"), "features_path": str(tmp_path / "f.csv")}}
    assert run(tmp_path, "generate", cfg) == 3
    assert "data error" in capsys.readouterr().err


def test_runtime_errors_exit_1(tmp_path, capsys):
    assert run(tmp_path, "importance") == 1  # nothing trained yet
    assert "error" in capsys.readouterr().err


def test_unreadable_config_exit_2(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["generate", "--config", str(p)]) == 2


def test_train_eval_importance(tmp_path, capsys):
    assert run(tmp_path, "train") == 0
    out = tmp_path / "out"
    for i in range(2):
        assert (out / f"models/split_{i}/wrse/manifest.json").is_file()
        assert (out / f"models/split_{i}/parametric/manifest.json").is_file()
    assert set(json.loads((out / "timings.json").read_text())) == {"split_0", "split_1"}
    capsys.readouterr()
    assert run(tmp_path, "eval") == 0
    table = capsys.readouterr().out.splitlines()
    assert table[0].split(",") == ["model"] + [f"{m}_gamma_{g}" for m in ("ctd_w", "cal_w") for g in ("0.3", "0.5", "0.8")]
    models = {line.split(",")[0] for line in table[1:]}
    assert models == {"wrse", "parametric_exponential", "oracle", "random", "constant"}
    rows = {r["model"]: r for r in json.loads((out / "reports/table.json").read_text())}
    assert rows["constant"]["ctd_w_gamma_0.5"]["mean"] == 0.0
    rep = json.loads((out / "reports/wrse/split_0.json").read_text())
    assert set(rep["weighted"]) == {"0.3", "0.5", "0.8"}
    assert (out / "reports/wrse/per_horizon.csv").read_text().startswith("tau_hours")
    assert run(tmp_path, "importance") == 0
    assert "gamma=0.3" in capsys.readouterr().out
    assert (out / "importance/importance_gamma_0.8.csv").is_file()


def test_reports_identical_across_worker_counts(tmp_path, capsys):
    cfg = dict(SMALL, models={"wrse": SMALL["models"]["wrse"]})
    results = []
    for w in (1, 3):
        out = tmp_path / f"w{w}"
        args = ["--config", write_cfg(tmp_path, cfg), "--out", str(out), "--workers", str(w)]
        assert main(["train", *args]) == 0 and main(["eval", *args]) == 0
        results.append((archive_digest(out / "models/split_1/wrse"),
                        (out / "reports/wrse/split_1.json").read_bytes(),
                        (out / "reports/table.csv").read_bytes()))
    assert results[0] == results[1]


def test_sweep_rows_and_resume(tmp_path, capsys):
    assert run(tmp_path, "sweep") == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 1 + 6 and len(lines[0].split(",")) == 7
    cells = tmp_path / "out/sweep/cells"
    assert len(list(cells.glob("*.json"))) == 6
    # a finished cell is read back, not refitted: a doctored checkpoint survives
    victim = sorted(cells.glob("*.json"))[0]
    row = json.loads(victim.read_text())
    row["ctd_w_gamma_0.5"]["mean"] = 0.123456
    victim.write_text(json.dumps(row))
    others = sorted(cells.glob("*.json"))[1:]
    others[0].unlink()
    assert run(tmp_path, "sweep") == 0
    assert "0.1235 ±" in capsys.readouterr().out
    assert len(list(cells.glob("*.json"))) == 6


def test_temporal_split_soundness():
    for n in (50, 300, 2000):
        for sp in temporal_splits(n):
            assert sp.train.max() < sp.valid.min() <= sp.valid.max() < sp.test.min()
            assert len(set(sp.train) | set(sp.valid) | set(sp.test)) == len(sp.train) + len(sp.valid) + len(sp.test)
    with pytest.raises(ValueError):
        temporal_splits(3)


def test_defaults_validate():
    cfg = E.validate_config({})
    assert cfg["metrics"]["gammas"] == [0.3, 0.5, 0.8] and cfg["split"]["n_splits"] == 5


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "wrse.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "generate" in r.stdout
