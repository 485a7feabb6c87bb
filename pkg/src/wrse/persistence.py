"""Model archives: a directory with ``manifest.json`` plus binary parameter dumps.

Layout (format version 1)::

    manifest.json          sorted-key JSON: model type, grid, configs, file list
    clf_000.bin ...        one file per WRSE base classifier
    predictor.bin          parametric models: the network

Binary files are little-endian. Array lengths are stored explicitly as int64
counts ahead of the arrays, and floats are IEEE-754 float64. Nothing time-dependent is written, so
identical models give byte-identical archives.

Classifier layouts (``q`` = int64, ``d`` = float64):

* gbt: ``q n_features, d base_score, d learning_rate, q rounds_used,
  q best_round, q n_trees`` then per tree ``q n_nodes`` followed by
  feature[q], threshold[d], left[q], right[q], value[d], each n_nodes long.
  Leaves have feature = -1.
* logistic: ``q d, d bias, q rounds_used, q best_round`` then weights[d].
* ffnet: ``q rounds_used, q best_round`` then a network block.
* constant: ``q n_features, d probability, q degenerate``.
* network block: ``q L`` then L layer sizes[q], then per layer W (row-major,
  fan_in x fan_out) and b.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .core import BeyondLast
from .ensemble import WrseModel
from .learners import classifier_from_bytes
from .nn import MLP
from .parametric import ParametricModel
from .weighting import HorizonGrid

FORMAT = "wrse-archive"
VERSION = 1


class ArchiveError(ValueError):
    pass


def _dump_manifest(path: Path, manifest: dict) -> None:
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def save_model(model, directory) -> Path:
    """Write ``model`` (WrseModel or ParametricModel) to ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    if isinstance(model, WrseModel):
        files = []
        for k, clf in enumerate(model.classifiers):
            name = f"clf_{k:03d}.bin"
            (d / name).write_bytes(clf.to_bytes())
            files.append({"file": name, "kind": clf.kind,
                          "horizon_hours": float(model.grid.horizons_hours[k]),
                          "degenerate": bool(getattr(clf, "degenerate", False))})
        manifest = {
            "format": FORMAT, "version": VERSION, "model": "wrse",
            "grid": {"horizons_hours": [float(h) for h in model.grid.horizons_hours],
                     "spacing": model.grid.spacing,
                     "parameter": None if np.isnan(model.grid.parameter) else float(model.grid.parameter)},
            "base_kind": model.base_kind, "base_config": model.base_config,
            "beyond_last": model.beyond_last.value, "classifiers": files,
        }
    elif isinstance(model, ParametricModel):
        (d / "predictor.bin").write_bytes(model.net.to_bytes())
        manifest = {
            "format": FORMAT, "version": VERSION, "model": "parametric", "head": model.head,
            "config": model.config, "epochs": model.epochs, "best_epoch": model.best_epoch,
            "predictor": "predictor.bin",
        }
    else:
        raise TypeError(f"cannot archive {type(model).__name__}")
    _dump_manifest(d / "manifest.json", manifest)
    return d


def load_model(directory):
    d = Path(directory)
    try:
        manifest = json.loads((d / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ArchiveError(f"{d}: unreadable manifest ({exc})") from exc
    if manifest.get("format") != FORMAT or manifest.get("version") != VERSION:
        raise ArchiveError(f"{d}: not a version-{VERSION} archive")
    if manifest["model"] == "wrse":
        g = manifest["grid"]
        grid = HorizonGrid(np.array(g["horizons_hours"]), g["spacing"],
                           float("nan") if g["parameter"] is None else g["parameter"])
        clfs = tuple(classifier_from_bytes(c["kind"], (d / c["file"]).read_bytes())
                     for c in manifest["classifiers"])
        return WrseModel(grid, clfs, manifest["base_kind"], manifest["base_config"],
                         BeyondLast(manifest["beyond_last"]))
    if manifest["model"] == "parametric":
        net, _ = MLP.from_bytes((d / manifest["predictor"]).read_bytes())
        return ParametricModel(manifest["head"], net, manifest["config"],
                               manifest["epochs"], manifest["best_epoch"])
    raise ArchiveError(f"{d}: unknown model type {manifest['model']!r}")


def archive_digest(directory) -> str:
    """SHA-256 over the archive's files in name order (for identity checks)."""
    h = hashlib.sha256()
    for p in sorted(Path(directory).iterdir()):
        if p.is_file():
            h.update(p.name.encode())
            h.update(p.read_bytes())
    return h.hexdigest()
