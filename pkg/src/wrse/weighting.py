"""Exponential decay weighting and base-model horizon grids.

Weights are defined on days; grids are stored in hours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

HOURS_PER_DAY = 24.0


class DomainError(ValueError):
    pass


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
    return gamma


@dataclass(frozen=True)
class DecayWeighting:
    gamma: float

    def __post_init__(self) -> None:
        _check_gamma(self.gamma)

    def __call__(self, tau_days):
        return weight(self.gamma, tau_days)

    def of_hours(self, tau_hours):
        return weight(self.gamma, np.asarray(tau_hours, dtype=float) / HOURS_PER_DAY)

    def inverse(self, p):
        return inverse_weight(self.gamma, p)


def weight(gamma: float, tau_days):
    """``gamma ** tau_days``; accepts scalars or arrays."""
    gamma = _check_gamma(gamma)
    tau = np.asarray(tau_days, dtype=float)
    if np.any(tau < 0):
        raise DomainError("tau_days must be nonnegative")
    out = np.power(gamma, tau)
    return float(out) if out.ndim == 0 else out


def inverse_weight(gamma: float, p: float) -> float:
    gamma = _check_gamma(gamma)
    p = float(p)
    if not 0.0 < p <= 1.0:
        raise DomainError(f"p must lie in (0, 1], got {p}")
    return math.log(p) / math.log(gamma)


@dataclass(frozen=True)
class HorizonGrid:
    """Ascending base-model horizons in hours plus how they were spaced.

    ``spacing`` is ``"weighted"`` (parameter = gamma), ``"even"``
    (parameter = span in days) or ``"custom"``.
    """

    horizons_hours: np.ndarray
    spacing: str = "custom"
    parameter: float = float("nan")

    def __post_init__(self) -> None:
        h = np.array(self.horizons_hours, dtype=float)
        if h.ndim != 1 or h.size < 1:
            raise DomainError("a grid needs at least one horizon")
        if h[0] <= 0 or np.any(np.diff(h) <= 0):
            raise DomainError("horizons must be positive and strictly ascending")
        h.setflags(write=False)
        object.__setattr__(self, "horizons_hours", h)

    @property
    def K(self) -> int:
        return self.horizons_hours.size

    def label(self) -> str:
        if self.spacing == "weighted":
            return f"weighted(gamma={self.parameter:g}), K={self.K}"
        if self.spacing == "even":
            return f"even({self.parameter:g} days), K={self.K}"
        return f"custom, K={self.K}"


def weighted_horizons(gamma: float, K: int) -> HorizonGrid:
    """``h_k = w^-1(1 - k/(K+1))`` days, converted to hours.

    Quantiles of the decay curve: more models land where weights are high.
    """
    gamma = _check_gamma(gamma)
    if int(K) != K or K < 1:
        raise DomainError("K must be a positive integer")
    K = int(K)
    lg = math.log(gamma)
    # log1p keeps h_1 accurate when k/(K+1) is small
    days = [math.log1p(-k / (K + 1)) / lg for k in range(1, K + 1)]
    return HorizonGrid(np.array(days) * HOURS_PER_DAY, "weighted", gamma)


def even_horizons(K: int, span_days: float = 10.0) -> HorizonGrid:
    if int(K) != K or K < 1:
        raise DomainError("K must be a positive integer")
    if not span_days > 0:
        raise DomainError("span_days must be positive")
    K = int(K)
    hours = [HOURS_PER_DAY * k * span_days / K for k in range(1, K + 1)]
    return HorizonGrid(np.array(hours), "even", float(span_days))
