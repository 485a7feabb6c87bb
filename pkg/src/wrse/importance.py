"""Gamma-weighted permutation importance over the WRSE base models.

For base model k and feature f, importance is the increase in that model's
log-loss on its own horizon labels when column f of the validation snapshots
is shuffled. Scores are combined across models with weights ``w(h_k / 24)``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .core import Dataset, SnapshotTable
from .ensemble import WrseModel
from .learners import make_horizon_labels
from .nn import log_loss
from .parallel import run_tasks, shared
from .weighting import HOURS_PER_DAY, weight

DEFAULT_GAMMAS = (0.3, 0.8)


@dataclass(frozen=True)
class ImportanceReport:
    """``raw[k, f]``: mean loss increase for model k and feature f over repeats.

    ``raw_std`` is the spread over repeats; ``scores[gamma]`` the weighted
    per-feature aggregate and ``score_std[gamma]`` its spread across splits
    (zeros for a single report).
    """

    horizons_hours: np.ndarray
    raw: np.ndarray
    raw_std: np.ndarray
    scores: dict
    score_std: dict
    n_splits: int = 1

    def ranking(self, gamma: float) -> list[tuple[int, float, float]]:
        s, sd = self.scores[gamma], self.score_std[gamma]
        order = sorted(range(s.size), key=lambda f: (-s[f], f))
        return [(f, float(s[f]), float(sd[f])) for f in order]

    def to_dict(self) -> dict:
        return {
            "n_splits": self.n_splits,
            "horizons_hours": [float(h) for h in self.horizons_hours],
            "per_model": {"mean": self.raw.tolist(), "std": self.raw_std.tolist()},
            "weighted": {f"{g:g}": [{"feature": f"f{f}", "score": v, "std": sd}
                                    for f, v, sd in self.ranking(g)]
                         for g in sorted(self.scores)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self, gamma: float) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["feature", "score", "std"])
        for f, v, sd in self.ranking(gamma):
            w.writerow([f"f{f}", repr(v), repr(sd)])
        return buf.getvalue()


def _uses_feature(clf, f: int) -> bool:
    if hasattr(clf, "used_features"):
        return f in clf.used_features()
    if hasattr(clf, "weights"):
        return bool(clf.weights[f] != 0.0)
    if hasattr(clf, "net"):
        return bool(np.any(clf.net.W[0][f] != 0.0))
    return False  # constant classifiers ignore every input


def _task(args):
    k, f = args
    model, tables, seed, n_repeats = shared()
    X, labels, base = tables[k]
    clf = model.classifiers[k]
    if X.shape[0] == 0 or not _uses_feature(clf, f):
        return np.zeros(n_repeats)
    out = np.empty(n_repeats)
    Xp = X.copy()
    for r in range(n_repeats):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, k, f, r])))
        Xp[:, f] = X[rng.permutation(X.shape[0]), f]
        out[r] = log_loss(labels, clf.predict_proba(Xp)) - base
    return out


def permutation_importance(model: WrseModel, valid, gammas=DEFAULT_GAMMAS, n_repeats: int = 5,
                           seed: int = 0, workers: int = 1) -> ImportanceReport:
    if int(n_repeats) != n_repeats or n_repeats < 1:
        raise ValueError("n_repeats must be a positive integer")
    table = SnapshotTable.from_dataset(valid) if isinstance(valid, Dataset) else valid
    if len(table) == 0:
        raise ValueError("validation set is empty")
    tables = []
    for k, h in enumerate(model.grid.horizons_hours):
        lab = make_horizon_labels(table, float(h))
        clf = model.classifiers[k]
        tables.append((lab.X, lab.labels, log_loss(lab.labels, clf.predict_proba(lab.X))))
    d = table.X.shape[1]
    K = model.grid.K
    tasks = [(k, f) for k in range(K) for f in range(d)]
    res = run_tasks(_task, tasks, workers, (model, tables, int(seed), int(n_repeats)))
    per = np.array(res).reshape(K, d, int(n_repeats))
    raw = per.mean(axis=2)
    raw_std = per.std(axis=2)
    scores, stds = {}, {}
    for g in gammas:
        w = weight(float(g), model.grid.horizons_hours / HOURS_PER_DAY)
        scores[float(g)] = (w @ raw) / w.sum()
        stds[float(g)] = np.zeros(d)
    return ImportanceReport(model.grid.horizons_hours.copy(), raw, raw_std, scores, stds)


def aggregate_importance(reports: list[ImportanceReport]) -> ImportanceReport:
    """Mean of the weighted scores across splits, with their standard deviation."""
    if not reports:
        raise ValueError("need at least one report")
    gammas = sorted(reports[0].scores)
    scores = {g: np.mean([r.scores[g] for r in reports], axis=0) for g in gammas}
    stds = {g: (np.std([r.scores[g] for r in reports], axis=0, ddof=1) if len(reports) > 1
                else np.zeros_like(scores[g])) for g in gammas}
    raw = np.mean([r.raw for r in reports], axis=0)
    raw_std = np.mean([r.raw_std for r in reports], axis=0)
    return ImportanceReport(reports[0].horizons_hours, raw, raw_std, scores, stds, len(reports))
