"""Binary base classifiers for "dies within h hours"."""

from __future__ import annotations

from functools import partial

from .base import (
    ConstantClassifier,
    DimensionMismatch,
    EmptyResult,
    HorizonLabeledSet,
    make_horizon_labels,
    predict_proba,
)
from .ffnet import FFNetClassifier, FFNetConfig, train_ffnet
from .gbt import GBTClassifier, GbtConfig, train_gbt
from .linear import LogisticClassifier, LogisticConfig, train_logistic

BASE_KINDS = ("gbt", "logistic", "ffnet")

_DECODERS = {
    "gbt": GBTClassifier.from_bytes,
    "logistic": LogisticClassifier.from_bytes,
    "ffnet": FFNetClassifier.from_bytes,
    "constant": ConstantClassifier.from_bytes,
}


def base_config(kind: str, options: dict | None = None):
    """Build the frozen config object for a base-learner kind.

    ``options`` may carry ``preset`` ("desk" or "paper", gbt only) plus any
    config field overrides.
    """
    opts = dict(options or {})
    if kind == "gbt":
        preset = opts.pop("preset", "desk")
        if preset not in ("desk", "paper"):
            raise ValueError(f"unknown gbt preset {preset!r}")
        return GbtConfig.paper(**opts) if preset == "paper" else GbtConfig.desk(**opts)
    if kind == "logistic":
        return LogisticConfig(**opts)
    if kind == "ffnet":
        if "hidden_sizes" in opts:
            opts["hidden_sizes"] = tuple(int(h) for h in opts["hidden_sizes"])
        return FFNetConfig(**opts)
    raise ValueError(f"unknown base learner {kind!r}; expected one of {BASE_KINDS}")


def trainer_for(kind: str, config):
    """Return ``f(train, valid) -> classifier`` for the given kind and config."""
    if kind == "gbt":
        return partial(train_gbt, config=config)
    if kind == "logistic":
        return partial(train_logistic, **config.to_dict())
    if kind == "ffnet":
        return partial(train_ffnet, **config.to_dict())
    raise ValueError(f"unknown base learner {kind!r}")


def classifier_from_bytes(kind: str, buf: bytes):
    return _DECODERS[kind](buf)


__all__ = [
    "BASE_KINDS", "ConstantClassifier", "DimensionMismatch", "EmptyResult", "FFNetClassifier",
    "FFNetConfig", "GBTClassifier", "GbtConfig", "HorizonLabeledSet", "LogisticClassifier",
    "LogisticConfig", "base_config", "classifier_from_bytes", "make_horizon_labels",
    "predict_proba", "train_ffnet", "train_gbt", "train_logistic", "trainer_for",
]
