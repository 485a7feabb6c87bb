"""Experiment configuration and the generate/train/eval/sweep/importance pipelines.

A run is described by one JSON document::

    {
      "scenario": {...synthetic parameters...}  or  {"stays_path": ..., "features_path": ...},
      "split":    {"n_splits": 5, "fractions": [0.6, 0.2, 0.2], "window_frac": 0.8},
      "models":   {"wrse": {...}, "parametric": {...}},
      "metrics":  {"gammas": [0.3, 0.5, 0.8], "horizons_hours": [...], "n_bins": 10, "tie_mode": "strict"},
      "runtime":  {"workers": 1, "seed": 0, "out": "wrse-run"},
      "sweep":    {...}, "importance": {...}      (optional)
    }

Missing keys take the defaults in :data:`DEFAULTS`; unknown keys are errors.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

from . import metrics as M
from .core import Dataset, SnapshotTable, read_dataset, write_dataset
from .ensemble import fit_wrse, predict_batch
from .importance import aggregate_importance, permutation_importance
from .isotonic import fit_curve_recalibration
from .learners import BASE_KINDS, base_config
from .parametric import ParametricConfig, predict_parametric_batch, train_parametric
from .persistence import load_model, save_model
from .splits import temporal_splits
from .synth import ConstantPredictor, OraclePredictor, RandomScorePredictor, Scenario, cohort_summary, generate
from .weighting import even_horizons, weighted_horizons

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


DEFAULTS: dict = {
    "scenario": {
        "kind": "exponential_ph", "n_stays": 2000, "d": 5, "beta": [1.2, -0.8, 0.6, 0.0, 0.0],
        "baseline_rate": 1.0 / 48.0, "weibull_shape": 1.5, "weibull_scale": 72.0, "drift_sd": 0.01,
        "censoring_rate": 1.0 / 2000.0, "seed": None, "max_stay_hours": 24.0 * 365.0,
    },
    "split": {"n_splits": 5, "fractions": [0.6, 0.2, 0.2], "window_frac": 0.8},
    "models": {
        "wrse": {"gamma": 0.5, "K": 10, "spacing": "weighted", "span_days": 10.0,
                 "base_learner": "gbt", "base_config": {}, "recalibrate": False},
        "parametric": {"head": "exponential", "predictor": {}},
    },
    "metrics": {"gammas": [0.3, 0.5, 0.8], "horizons_hours": list(M.DEFAULT_HORIZONS_HOURS),
                "n_bins": 10, "tie_mode": "strict", "include_reference": False},
    "runtime": {"workers": 1, "seed": 0, "out": "wrse-run", "benchmark": False},
    "sweep": {"spacings": ["even", "weighted:0.3", "weighted:0.5", "weighted:0.8"],
              "K": [5, 7, 10], "base_learners": ["gbt", "ffnet", "logistic"]},
    "importance": {"n_repeats": 5, "gammas": [0.3, 0.8]},
}
_FILE_SCENARIO_KEYS = {"stays_path", "features_path"}


# --- validation -----------------------------------------------------------------

def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _merge(path: str, default: dict, given) -> dict:
    if not isinstance(given, dict):
        _fail(path, "expected an object")
    out = copy.deepcopy(default)
    for k, v in given.items():
        if k not in default:
            _fail(f"{path}.{k}", "unknown key")
        if isinstance(default[k], dict) and default[k] and k not in ("base_config", "predictor"):
            out[k] = _merge(f"{path}.{k}", default[k], v)
        else:
            out[k] = v
    return out


def _num(path, v, lo=None, hi=None, lo_open=False, hi_open=False, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (isinstance(v, float) and not math.isfinite(v)):
        _fail(path, f"expected a number, got {v!r}")
    if integer and int(v) != v:
        _fail(path, f"expected an integer, got {v!r}")
    if lo is not None and (v <= lo if lo_open else v < lo):
        _fail(path, f"must be {'>' if lo_open else '>='} {lo}, got {v!r}")
    if hi is not None and (v >= hi if hi_open else v > hi):
        _fail(path, f"must be {'<' if hi_open else '<='} {hi}, got {v!r}")
    return int(v) if integer else float(v)


def _gamma(path, v):
    return _num(path, v, 0.0, 1.0, lo_open=True, hi_open=True)


def _parse_spacing(path, s):
    if s == "even":
        return ("even", None)
    if isinstance(s, str) and s.startswith("weighted:"):
        try:
            g = float(s.split(":", 1)[1])
        except ValueError:
            _fail(path, f"bad spacing {s!r}")
        return ("weighted", _gamma(path, g))
    _fail(path, f"spacing must be 'even' or 'weighted:<gamma>', got {s!r}")


def validate_config(raw: dict) -> dict:
    """Fill defaults and check every field; raises ConfigError with a field path."""
    if not isinstance(raw, dict):
        raise ConfigError("$: config must be a JSON object")
    for k in raw:
        if k not in DEFAULTS:
            _fail(k, "unknown section")
    cfg = {}
    sc = raw.get("scenario", {})
    if isinstance(sc, dict) and _FILE_SCENARIO_KEYS & set(sc):
        extra = set(sc) - _FILE_SCENARIO_KEYS
        if extra:
            _fail(f"scenario.{sorted(extra)[0]}", "file-based scenarios take only stays_path and features_path")
        for k in sorted(_FILE_SCENARIO_KEYS):
            if not isinstance(sc.get(k), str) or not sc.get(k):
                _fail(f"scenario.{k}", "required path missing")
        cfg["scenario"] = dict(sc)
    else:
        cfg["scenario"] = _merge("scenario", DEFAULTS["scenario"], sc)
    for section in ("split", "models", "metrics", "runtime", "sweep", "importance"):
        if section == "models" and "models" in raw:
            given = raw["models"]
            if not isinstance(given, dict):
                _fail("models", "expected an object")
            cfg["models"] = {}
            for name, block in given.items():
                if name not in DEFAULTS["models"]:
                    _fail(f"models.{name}", "unknown model (expected wrse or parametric)")
                if block is not None:
                    cfg["models"][name] = _merge(f"models.{name}", DEFAULTS["models"][name], block)
            continue
        cfg[section] = _merge(section, DEFAULTS[section], raw.get(section, {}))

    rt = cfg["runtime"]
    rt["workers"] = _num("runtime.workers", rt["workers"], 1, integer=True)
    rt["seed"] = _num("runtime.seed", rt["seed"], 0, integer=True)
    if not isinstance(rt["out"], str) or not rt["out"]:
        _fail("runtime.out", "expected a directory path")
    if not isinstance(rt["benchmark"], bool):
        _fail("runtime.benchmark", "expected true or false")

    sc = cfg["scenario"]
    if "stays_path" not in sc:
        if sc["seed"] is None:
            sc["seed"] = rt["seed"]
        sc["n_stays"] = _num("scenario.n_stays", sc["n_stays"], 1, integer=True)
        sc["seed"] = _num("scenario.seed", sc["seed"], 0, integer=True)
        sc["d"] = _num("scenario.d", sc["d"], 1, integer=True)
        if not isinstance(sc["beta"], list) or len(sc["beta"]) != sc["d"]:
            _fail("scenario.beta", f"expected a list of d={sc['d']} numbers")
        sc["beta"] = [_num(f"scenario.beta[{i}]", b) for i, b in enumerate(sc["beta"])]
        if sc["kind"] not in ("exponential_ph", "weibull_ph", "time_varying"):
            _fail("scenario.kind", f"unknown scenario kind {sc['kind']!r}")
        for k in ("baseline_rate", "weibull_shape", "weibull_scale"):
            sc[k] = _num(f"scenario.{k}", sc[k], 0.0, lo_open=True)
        for k in ("censoring_rate", "drift_sd"):
            sc[k] = _num(f"scenario.{k}", sc[k], 0.0)
        sc["max_stay_hours"] = _num("scenario.max_stay_hours", sc["max_stay_hours"], 1.0, lo_open=True)

    sp = cfg["split"]
    sp["n_splits"] = _num("split.n_splits", sp["n_splits"], 1, integer=True)
    sp["window_frac"] = _num("split.window_frac", sp["window_frac"], 0.0, 1.0, lo_open=True)
    fr = sp["fractions"]
    if not isinstance(fr, list) or len(fr) != 3:
        _fail("split.fractions", "expected three numbers")
    sp["fractions"] = [_num(f"split.fractions[{i}]", f, 0.0, 1.0, lo_open=True) for i, f in enumerate(fr)]
    if abs(sum(sp["fractions"]) - 1.0) > 1e-9:
        _fail("split.fractions", "must sum to 1")

    models = cfg["models"]
    if "wrse" in models:
        w = models["wrse"]
        w["gamma"] = _gamma("models.wrse.gamma", w["gamma"])
        w["K"] = _num("models.wrse.K", w["K"], 1, integer=True)
        if w["spacing"] not in ("weighted", "even"):
            _fail("models.wrse.spacing", "expected 'weighted' or 'even'")
        w["span_days"] = _num("models.wrse.span_days", w["span_days"], 0.0, lo_open=True)
        if w["base_learner"] not in BASE_KINDS:
            _fail("models.wrse.base_learner", f"expected one of {list(BASE_KINDS)}")
        if not isinstance(w["recalibrate"], bool):
            _fail("models.wrse.recalibrate", "expected true or false")
        try:
            base_config(w["base_learner"], w["base_config"])
        except (TypeError, ValueError) as exc:
            _fail("models.wrse.base_config", str(exc))
    if "parametric" in models:
        p = models["parametric"]
        try:
            _parametric_config(p, rt["seed"])
        except (TypeError, ValueError) as exc:
            _fail("models.parametric", str(exc))

    mt = cfg["metrics"]
    if not isinstance(mt["gammas"], list) or not mt["gammas"]:
        _fail("metrics.gammas", "expected a nonempty list")
    mt["gammas"] = [_gamma(f"metrics.gammas[{i}]", g) for i, g in enumerate(mt["gammas"])]
    if not isinstance(mt["horizons_hours"], list) or not mt["horizons_hours"]:
        _fail("metrics.horizons_hours", "expected a nonempty list")
    mt["horizons_hours"] = [_num(f"metrics.horizons_hours[{i}]", h, 0.0, lo_open=True)
                            for i, h in enumerate(mt["horizons_hours"])]
    mt["n_bins"] = _num("metrics.n_bins", mt["n_bins"], 1, integer=True)
    if mt["tie_mode"] not in M.TIE_MODES:
        _fail("metrics.tie_mode", f"expected one of {list(M.TIE_MODES)}")
    if not isinstance(mt["include_reference"], bool):
        _fail("metrics.include_reference", "expected true or false")

    sw = cfg["sweep"]
    for i, s in enumerate(sw["spacings"]):
        _parse_spacing(f"sweep.spacings[{i}]", s)
    sw["K"] = [_num(f"sweep.K[{i}]", k, 1, integer=True) for i, k in enumerate(sw["K"])]
    for i, b in enumerate(sw["base_learners"]):
        if b not in BASE_KINDS:
            _fail(f"sweep.base_learners[{i}]", f"expected one of {list(BASE_KINDS)}")

    im = cfg["importance"]
    im["n_repeats"] = _num("importance.n_repeats", im["n_repeats"], 1, integer=True)
    im["gammas"] = [_gamma(f"importance.gammas[{i}]", g) for i, g in enumerate(im["gammas"])]
    return cfg


def _parametric_config(block: dict, seed: int) -> ParametricConfig:
    pred = dict(block.get("predictor") or {})
    pred.setdefault("seed", seed)
    if "hidden_sizes" in pred:
        pred["hidden_sizes"] = tuple(pred["hidden_sizes"])
    return ParametricConfig(head=block["head"], **pred)


def load_config(path, overrides: dict | None = None) -> dict:
    """Read a JSON config (``None`` = all defaults) and apply CLI overrides."""
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"--config: no such file {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--config: invalid JSON ({exc})")
    if not isinstance(raw, dict):
        raise ConfigError("$: config must be a JSON object")
    raw = copy.deepcopy(raw)
    ov = overrides or {}
    rt = raw.setdefault("runtime", {})
    if not isinstance(rt, dict):
        raise ConfigError("runtime: expected an object")
    for key in ("workers", "seed", "out"):
        if ov.get(key) is not None:
            rt[key] = ov[key]
    if ov.get("seed") is not None and isinstance(raw.get("scenario", {}), dict) \
            and not _FILE_SCENARIO_KEYS & set(raw.get("scenario", {})):
        raw.setdefault("scenario", {})["seed"] = ov["seed"]
    return validate_config(raw)


# --- data ----------------------------------------------------------------------

def scenario_of(cfg: dict) -> Scenario | None:
    sc = cfg["scenario"]
    if "stays_path" in sc:
        return None
    keys = ("kind", "d", "beta", "baseline_rate", "weibull_shape", "weibull_scale", "drift_sd",
            "censoring_rate", "seed", "max_stay_hours")
    return Scenario(**{k: sc[k] for k in keys})


def load_data(cfg: dict) -> Dataset:
    sc = cfg["scenario"]
    if "stays_path" in sc:
        for k in ("stays_path", "features_path"):
            if not Path(sc[k]).is_file():
                raise ConfigError(f"scenario.{k}: no such file {sc[k]}")
        return read_dataset(sc["stays_path"], sc["features_path"])
    try:
        return generate(scenario_of(cfg), sc["n_stays"])
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from exc


@dataclass
class SplitData:
    index: int
    train: SnapshotTable
    valid: SnapshotTable
    test: SnapshotTable


def split_data(cfg: dict, data: Dataset) -> list[SplitData]:
    sp = cfg["split"]
    try:
        splits = temporal_splits(len(data), sp["n_splits"], sp["fractions"], sp["window_frac"])
    except ValueError as exc:
        raise ConfigError(f"split: {exc}") from exc
    out = []
    for s in splits:
        tr, va, te = s.datasets(data)
        out.append(SplitData(s.index, SnapshotTable.from_dataset(tr), SnapshotTable.from_dataset(va),
                             SnapshotTable.from_dataset(te)))
    return out


def out_dir(cfg: dict) -> Path:
    return Path(cfg["runtime"]["out"])


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# --- generate ------------------------------------------------------------------

def run_generate(cfg: dict) -> dict:
    data = load_data(cfg)
    d = out_dir(cfg) / "data"
    d.mkdir(parents=True, exist_ok=True)
    write_dataset(data, d / "stays.csv", d / "features.csv")
    summary = cohort_summary(data)
    _write(d / "summary.json", _json(summary))
    return summary


# --- train ---------------------------------------------------------------------

def wrse_grid(block: dict):
    if block["spacing"] == "weighted":
        return weighted_horizons(block["gamma"], block["K"])
    return even_horizons(block["K"], block["span_days"])


def _fit_wrse_block(block, split: SplitData, workers: int, seed: int):
    opts = dict(block["base_config"])
    if block["base_learner"] == "ffnet":
        opts.setdefault("seed", seed)
    return fit_wrse(split.train, split.valid, wrse_grid(block), block["base_learner"], opts, workers)


def run_train(cfg: dict) -> dict:
    """Fit every configured model on every split and archive it.

    Wall-clock times go to ``timings.json`` next to (not inside) the archives so
    archives stay byte-identical across runs.
    """
    data = load_data(cfg)
    splits = split_data(cfg, data)
    workers, seed = cfg["runtime"]["workers"], cfg["runtime"]["seed"]
    root = out_dir(cfg) / "models"
    timings: dict = {}
    for s in splits:
        tag = f"split_{s.index}"
        timings[tag] = {}
        if "wrse" in cfg["models"]:
            block = cfg["models"]["wrse"]
            t0 = time.perf_counter()
            try:
                model = _fit_wrse_block(block, s, workers, seed)
            except Exception as exc:
                raise RuntimeError(f"split {s.index}: {exc}") from exc
            timings[tag]["wrse"] = {"seconds": time.perf_counter() - t0, "workers": workers}
            if cfg["runtime"]["benchmark"]:
                for w in sorted({1, workers}):
                    t0 = time.perf_counter()
                    _fit_wrse_block(block, s, w, seed)
                    timings[tag][f"wrse_workers_{w}"] = {"seconds": time.perf_counter() - t0, "workers": w}
            save_model(model, root / tag / "wrse")
        if "parametric" in cfg["models"]:
            pcfg = _parametric_config(cfg["models"]["parametric"], seed)
            t0 = time.perf_counter()
            try:
                model = train_parametric(s.train, s.valid, pcfg)
            except Exception as exc:
                raise RuntimeError(f"split {s.index}: {exc}") from exc
            timings[tag]["parametric"] = {"seconds": time.perf_counter() - t0, "workers": 1}
            save_model(model, root / tag / "parametric")
    _write(out_dir(cfg) / "timings.json", _json(timings))
    return timings


# --- eval ----------------------------------------------------------------------

def _metric_kwargs(cfg):
    mt = cfg["metrics"]
    return dict(gammas=mt["gammas"], horizons_hours=mt["horizons_hours"], n_bins=mt["n_bins"],
                tie_mode=mt["tie_mode"])


def predictors_for_split(cfg: dict, split: SplitData, models_root: Path) -> dict:
    """Name -> predictor over the split's test snapshots."""
    preds = {}
    tag = f"split_{split.index}"
    wpath = models_root / tag / "wrse"
    if "wrse" in cfg["models"] and (wpath / "manifest.json").is_file():
        model = load_model(wpath)
        if model.n_features != split.test.X.shape[1]:
            raise ValueError(f"{wpath}: archive expects {model.n_features} features, data has {split.test.X.shape[1]}")
        batch = predict_batch(model, split.test, cfg["runtime"]["workers"])
        if cfg["models"]["wrse"]["recalibrate"]:
            rec = fit_curve_recalibration(predict_batch(model, split.valid), split.valid.y, split.valid.c)
            batch = rec.apply(batch)
        preds["wrse"] = batch
    ppath = models_root / tag / "parametric"
    if "parametric" in cfg["models"] and (ppath / "manifest.json").is_file():
        model = load_model(ppath)
        if model.n_features != split.test.X.shape[1]:
            raise ValueError(f"{ppath}: archive expects {model.n_features} features")
        # baselines are recalibrated per knot on the validation split
        rec = fit_curve_recalibration(predict_parametric_batch(model, split.valid), split.valid.y, split.valid.c)
        preds[f"parametric_{model.head}"] = rec.apply(predict_parametric_batch(model, split.test))
    if cfg["metrics"]["include_reference"]:
        sc = scenario_of(cfg)
        if sc is not None:
            preds["oracle"] = OraclePredictor(sc, split.test)
        preds["random"] = RandomScorePredictor(len(split.test), cfg["runtime"]["seed"] + split.index)
        preds["constant"] = ConstantPredictor(len(split.test))
    return preds


def table_rows(summaries: dict, gammas) -> list[dict]:
    """One row per model: label plus C^td,w and Cal^w (mean, se) for each gamma."""
    rows = []
    for label, summ in summaries.items():
        row = {"model": label}
        for metric in ("ctd_w", "cal_w"):
            for g in gammas:
                m, se = summ.weighted[float(g)][metric]
                row[f"{metric}_gamma_{g:g}"] = {"mean": M._num(m), "se": M._num(se)}
        rows.append(row)
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if not rows:
        return ""
    cols = [k for k in rows[0] if k != "model"]
    w.writerow(["model"] + cols)
    for r in rows:
        cells = []
        for c in cols:
            m, se = r[c]["mean"], r[c]["se"]
            cells.append("" if m is None else f"{m:.4f} ± {se:.4f}")
        w.writerow([r["model"]] + cells)
    return buf.getvalue()


def run_eval(cfg: dict) -> dict:
    data = load_data(cfg)
    splits = split_data(cfg, data)
    root = out_dir(cfg)
    models_root = root / "models"
    reports: dict = {}
    for s in splits:
        preds = predictors_for_split(cfg, s, models_root)
        for name, p in preds.items():
            rep = M.evaluate(M.EvalSet(p, s.test.y, s.test.c), label=name, **_metric_kwargs(cfg))
            reports.setdefault(name, []).append(rep)
            _write(root / "reports" / name / f"split_{s.index}.json", rep.to_json())
            _write(root / "reports" / name / f"split_{s.index}.csv", rep.to_csv())
    if not reports:
        raise FileNotFoundError(f"no model archives under {models_root}; run train first")
    summaries = {name: M.aggregate_splits(reps, name) for name, reps in reports.items()}
    for name, summ in summaries.items():
        _write(root / "reports" / name / "summary.json", summ.to_json())
        _write(root / "reports" / name / "per_horizon.csv", _per_horizon_csv(summ))
    rows = table_rows(summaries, cfg["metrics"]["gammas"])
    _write(root / "reports" / "table.json", _json(rows))
    _write(root / "reports" / "table.csv", rows_to_csv(rows))
    return {"rows": rows, "summaries": summaries}


def _per_horizon_csv(summ: M.SplitSummary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau_hours", "cal_area", "cal_area_se", "concordant_fraction", "concordant_fraction_se"])
    taus = summ.per_horizon["tau_hours"][0]
    ca, cf = summ.per_horizon["cal_area"], summ.per_horizon["concordant_fraction"]
    for i, t in enumerate(taus):
        w.writerow([repr(float(t))] + [M._fmt(x) for x in (ca[0][i], ca[1][i], cf[0][i], cf[1][i])])
    return buf.getvalue()


# --- sweep ---------------------------------------------------------------------

def sweep_cells(cfg: dict) -> list[dict]:
    sw = cfg["sweep"]
    base = cfg["models"].get("wrse", DEFAULTS["models"]["wrse"])
    cells = []
    for spacing in sw["spacings"]:
        kind, g = _parse_spacing("sweep.spacings", spacing)
        for K in sw["K"]:
            for learner in sw["base_learners"]:
                block = copy.deepcopy(base)
                block.update(spacing=kind, K=K, base_learner=learner,
                             base_config=base["base_config"] if learner == base["base_learner"] else {})
                if g is not None:
                    block["gamma"] = g
                name = (f"{kind}-g{g:g}" if g is not None else f"even-{block['span_days']:g}d") + f"-K{K}-{learner}"
                cells.append({"name": name, "block": block})
    return cells


def run_sweep(cfg: dict) -> list[dict]:
    """Train and score every sweep cell; finished cells are checkpointed and skipped on rerun."""
    data = load_data(cfg)
    splits = split_data(cfg, data)
    root = out_dir(cfg) / "sweep"
    workers, seed = cfg["runtime"]["workers"], cfg["runtime"]["seed"]
    rows = []
    for cell in sweep_cells(cfg):
        ckpt = root / "cells" / f"{cell['name']}.json"
        if ckpt.is_file():
            rows.append(json.loads(ckpt.read_text()))
            continue
        reps = []
        for s in splits:
            model = _fit_wrse_block(cell["block"], s, workers, seed)
            batch = predict_batch(model, s.test, workers)
            reps.append(M.evaluate(M.EvalSet(batch, s.test.y, s.test.c), label=cell["name"],
                                   **_metric_kwargs(cfg)))
        summ = M.aggregate_splits(reps, cell["name"])
        row = table_rows({cell["name"]: summ}, cfg["metrics"]["gammas"])[0]
        _write(ckpt, _json(row))
        rows.append(row)
    _write(root / "sweep.json", _json(rows))
    _write(root / "sweep.csv", rows_to_csv(rows))
    return rows


# --- importance ----------------------------------------------------------------

def run_importance(cfg: dict):
    data = load_data(cfg)
    splits = split_data(cfg, data)
    root = out_dir(cfg)
    im = cfg["importance"]
    reports = []
    for s in splits:
        path = root / "models" / f"split_{s.index}" / "wrse"
        if not (path / "manifest.json").is_file():
            raise FileNotFoundError(f"{path}: no WRSE archive; run train first")
        model = load_model(path)
        reports.append(permutation_importance(model, s.valid, im["gammas"], im["n_repeats"],
                                              cfg["runtime"]["seed"], cfg["runtime"]["workers"]))
    rep = aggregate_importance(reports)
    _write(root / "importance" / "importance.json", rep.to_json())
    for g in im["gammas"]:
        _write(root / "importance" / f"importance_gamma_{g:g}.csv", rep.to_csv(g))
    return rep
