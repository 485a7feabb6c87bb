"""Parametric survival heads trained with the censored Survival-CRPS.

The exponential head has a closed-form score and gradient. The log-normal
head is scored with a trapezoidal rule in log-time, whose grid is treated as
a constant when differentiating.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import ndtr

from .core import CurveBatch, Dataset, SnapshotTable, SurvivalCurve
from .learners.base import check_dim
from .nn import MLP, Adam, EarlyStopping, inverse_softplus, sigmoid, softplus
from .weighting import DomainError, HorizonGrid

log = logging.getLogger(__name__)

LAMBDA_FLOOR = 1e-8
SIGMA_FLOOR = 1e-6
HEADS = ("exponential", "lognormal")
# hourly knots over ten days: the shared grid parametric CDFs are read off on
EVAL_KNOTS_HOURS = np.arange(1.0, 241.0)

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class NonFiniteLoss(RuntimeError):
    pass


# --- exponential closed form --------------------------------------------------

_G_TERMS = 30
# (1 - e^-s)^2 = sum_{k>=2} (-1)^k (2^k - 2)/k! s^k, integrated termwise
_G_COEF = np.array([(-1) ** k * (2.0 ** k - 2.0) / math.factorial(k) / (k + 1)
                    for k in range(2, 2 + _G_TERMS)])


def _G(x):
    """``int_0^x (1 - e^-s)^2 ds``.

    The closed form cancels badly below x = 1 (the result is ~x^3/3), so a
    power series takes over there.
    """
    x = np.asarray(x, dtype=float)
    small = x < 1.0
    xb = np.where(small, 1.0, x)
    big = xb + 2.0 * np.expm1(-xb) - 0.5 * np.expm1(-2.0 * xb)
    xs = np.where(small, x, 0.0)
    series = np.zeros_like(xs)
    for a in _G_COEF[::-1]:
        series = series * xs + a
    series = series * xs ** 3
    return np.where(small, series, big)


def _check_exp_args(lam, y):
    lam = np.asarray(lam, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(~(lam > 0)):
        raise DomainError("lambda must be positive")
    if np.any(~(y > 0)):
        raise DomainError("y must be positive")
    return lam, y


def crps_exponential(lam, y, c):
    """Censored CRPS of ``F(t) = 1 - exp(-lam t)`` at observed time ``y``.

    Algebraically ``(4 e^{-lam y} - c e^{-2 lam y} - 3) / (2 lam) + y``; it is
    evaluated as ``G(lam y)/lam + (1-c) e^{-2 lam y}/(2 lam)`` to avoid the
    cancellation of the textbook form when ``lam * y`` is small.
    """
    lam, y = _check_exp_args(lam, y)
    c = np.asarray(c, dtype=float)
    x = lam * y
    out = _G(x) / lam + (1.0 - c) * np.exp(-2.0 * x) / (2.0 * lam)
    return float(out) if out.ndim == 0 else out


def crps_exponential_grad(lam, y, c):
    """Derivative of :func:`crps_exponential` with respect to ``lam``."""
    lam, y = _check_exp_args(lam, y)
    c = np.asarray(c, dtype=float)
    x = lam * y
    e2 = np.exp(-2.0 * x)
    g = -_G(x) / lam ** 2 + (y / lam) * np.expm1(-x) ** 2
    g = g + (1.0 - c) * (-y * e2 / lam - e2 / (2.0 * lam ** 2))
    return float(g) if g.ndim == 0 else g


def exponential_cdf(tau, lam):
    return -np.expm1(-np.asarray(lam, dtype=float) * np.asarray(tau, dtype=float))


# --- trapezoidal CRPS ---------------------------------------------------------

@dataclass(frozen=True)
class TrapezoidGrid:
    """Node layout for the trapezoidal CRPS.

    Each segment ([0, y] and, for deaths, [y, tail_horizon]) gets
    ``points_per_segment`` equally spaced nodes, in time or (``log_spaced``)
    in log-time. Log spacing starts at ``exp(log_floor)`` instead of 0.
    """

    points_per_segment: int = 1024
    tail_horizon: float | None = None
    log_spaced: bool = False
    log_floor: float | None = None

    def __post_init__(self) -> None:
        if int(self.points_per_segment) != self.points_per_segment or self.points_per_segment < 2:
            raise DomainError("points_per_segment must be an integer >= 2")
        if self.tail_horizon is not None and not self.tail_horizon > 0:
            raise DomainError("tail_horizon must be positive")
        if self.log_spaced and self.log_floor is None:
            raise DomainError("log-spaced grids need a log_floor")


class CrpsValue(float):
    """A CRPS estimate that also carries an upper bound on the truncation error."""

    tail_bound: float

    def __new__(cls, value: float, tail_bound: float = 0.0):
        obj = super().__new__(cls, value)
        obj.tail_bound = float(tail_bound)
        return obj


def crps_trapezoid(cdf_eval, y: float, c, grid: TrapezoidGrid, tail_bound: float = 0.0) -> CrpsValue:
    """Trapezoidal Survival-CRPS for a vectorised CDF ``cdf_eval``.

    ``tail_bound`` is the caller's bound on whatever the grid leaves out
    (beyond ``tail_horizon`` and, on log grids, below the floor); it is passed
    through on the result.
    """
    y = float(y)
    if not y > 0:
        raise DomainError("y must be positive")
    n = int(grid.points_per_segment)
    if grid.log_spaced:
        ly = math.log(y)
        lo = min(grid.log_floor, ly)
        u = np.linspace(lo, ly, n)
        tau = np.exp(u)
        first = np.trapezoid(np.asarray(cdf_eval(tau)) ** 2 * tau, u) if ly > lo else 0.0
    else:
        tau = np.linspace(0.0, y, n)
        first = np.trapezoid(np.asarray(cdf_eval(tau)) ** 2, tau)
    second = 0.0
    if not bool(c):
        if grid.tail_horizon is None:
            raise DomainError("uncensored instances need a tail_horizon")
        T = float(grid.tail_horizon)
        if T > y:
            if grid.log_spaced:
                u = np.linspace(math.log(y), math.log(T), n)
                tau = np.exp(u)
                second = np.trapezoid((1.0 - np.asarray(cdf_eval(tau))) ** 2 * tau, u)
            else:
                tau = np.linspace(y, T, n)
                second = np.trapezoid((1.0 - np.asarray(cdf_eval(tau))) ** 2, tau)
    return CrpsValue(float(first + second), tail_bound)


def crps_exponential_trapezoid(lam: float, y: float, c, points_per_segment: int = 1024) -> CrpsValue:
    """Trapezoidal CRPS of an exponential CDF, tail cut at ``y + 20/lam``."""
    lam = float(lam)
    if not lam > 0:
        raise DomainError("lambda must be positive")
    T = y + 20.0 / lam
    # int_T^inf e^{-2 lam t} dt
    bound = 0.0 if c else math.exp(-2.0 * lam * T) / (2.0 * lam)
    return crps_trapezoid(lambda t: exponential_cdf(t, lam), y, c,
                          TrapezoidGrid(points_per_segment, T), bound)


def lognormal_cdf(tau, mu, sigma):
    """``Phi((ln tau - mu)/sigma)``; the normal CDF comes from scipy's ``ndtr``."""
    tau = np.asarray(tau, dtype=float)
    with np.errstate(divide="ignore"):
        z = (np.log(tau) - mu) / sigma
    return ndtr(z)


def lognormal_excess_mean(mu: float, sigma: float, T: float) -> float:
    """``E[(X - T)+]`` for ``ln X ~ N(mu, sigma^2)``; bounds the truncated tail."""
    d1 = (mu + sigma ** 2 - math.log(T)) / sigma
    return float(math.exp(mu + sigma ** 2 / 2.0) * ndtr(d1) - T * ndtr(d1 - sigma))


def crps_lognormal(mu: float, sigma: float, y: float, c, grid: TrapezoidGrid | None = None) -> CrpsValue:
    """Trapezoidal CRPS of a log-normal CDF in log-time.

    The lower segment starts at ``mu - 8 sigma`` and the death tail ends at
    ``mu + 8 sigma`` (log-hours) unless ``grid`` says otherwise.
    """
    mu, sigma, y = float(mu), float(sigma), float(y)
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    if not y > 0:
        raise DomainError("y must be positive")
    n = grid.points_per_segment if grid is not None else TrapezoidGrid.points_per_segment
    floor = grid.log_floor if grid is not None and grid.log_floor is not None else mu - 8.0 * sigma
    T = grid.tail_horizon if grid is not None and grid.tail_horizon is not None \
        else math.exp(max(mu + 8.0 * sigma, math.log(y)))
    lo = math.exp(min(floor, math.log(y)))
    # int_0^lo F^2 <= lo F(lo)^2 ; int_T^inf (1-F)^2 <= E[(X-T)+]
    bound = lo * float(lognormal_cdf(lo, mu, sigma)) ** 2
    if not c:
        bound += lognormal_excess_mean(mu, sigma, T)
    g = TrapezoidGrid(n, T, log_spaced=True, log_floor=floor)
    return crps_trapezoid(lambda t: lognormal_cdf(t, mu, sigma), y, c, g, bound)


def crps_lognormal_batch(mu, sigma, y, c, n_points: int = 64):
    """Vectorised log-normal CRPS with gradients in ``mu`` and ``sigma``.

    Uses the same log-time layout as :func:`crps_lognormal`; the node
    positions are held fixed when differentiating.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    y = np.asarray(y, dtype=float)
    alive = 1.0 - np.asarray(c, dtype=float)
    ly = np.log(y)
    a = np.minimum(mu - 8.0 * sigma, ly)
    b = np.maximum(mu + 8.0 * sigma, ly)
    s = np.linspace(0.0, 1.0, n_points)
    tw = np.full(n_points, 1.0)
    tw[[0, -1]] = 0.5
    tw /= n_points - 1

    vals = np.zeros_like(y)
    dmu = np.zeros_like(y)
    dsig = np.zeros_like(y)
    for left, right, scale, lower in ((a, ly, None, True), (ly, b, alive, False)):
        width = right - left
        U = left[:, None] + width[:, None] * s
        Z = (U - mu[:, None]) / sigma[:, None]
        F = ndtr(Z)
        W = np.exp(U) * (width[:, None] * tw)
        pdf = np.exp(-0.5 * Z * Z) * _INV_SQRT_2PI
        if lower:
            core, dcore = F * F, 2.0 * F
        else:
            core, dcore = (1.0 - F) ** 2, -2.0 * (1.0 - F)
        v = np.sum(core * W, axis=1)
        # dF/dmu = -pdf/sigma, dF/dsigma = -pdf*Z/sigma
        gm = np.sum(dcore * (-pdf / sigma[:, None]) * W, axis=1)
        gs = np.sum(dcore * (-pdf * Z / sigma[:, None]) * W, axis=1)
        if scale is not None:
            v, gm, gs = v * scale, gm * scale, gs * scale
        vals += v
        dmu += gm
        dsig += gs
    return vals, dmu, dsig


# --- model --------------------------------------------------------------------

@dataclass(frozen=True)
class ParametricConfig:
    """Predictor and optimiser settings for a parametric head.

    ``hidden_sizes=()`` gives a linear predictor.
    """

    head: str = "exponential"
    hidden_sizes: tuple[int, ...] = ()
    lr: float = 1e-2
    l2: float = 1e-4
    max_epochs: int = 2000
    patience: int = 10
    seed: int = 0
    train_points: int = 64
    init_from_data: bool = True

    def __post_init__(self) -> None:
        if self.head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}")
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.lr <= 0 or self.l2 < 0 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("invalid optimiser settings")
        if self.train_points < 2:
            raise ValueError("train_points must be >= 2")

    @classmethod
    def paper(cls, **overrides) -> "ParametricConfig":
        base = dict(hidden_sizes=(50, 50), lr=1e-4, l2=0.01, max_epochs=100000)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["hidden_sizes"] = list(self.hidden_sizes)
        return out


class ParametricModel:
    def __init__(self, head: str, net: MLP, config: dict | None = None,
                 epochs: int = 0, best_epoch: int = 0):
        if head not in HEADS:
            raise ValueError(f"unknown head {head!r}")
        self.head = head
        self.net = net
        self.config = dict(config or {})
        self.epochs = epochs
        self.best_epoch = best_epoch

    @property
    def n_features(self) -> int:
        return self.net.sizes[0]

    def head_params(self, X) -> dict:
        """Per-row head parameters: ``rate`` (per hour) or ``mu``/``sigma`` (log-hours)."""
        X = check_dim(X, self.n_features)
        return _link(self.head, self.net.forward(X))

    def cdf(self, X, taus) -> np.ndarray:
        p = self.head_params(X)
        taus = np.asarray(taus, dtype=float)[None, :]
        if self.head == "exponential":
            return exponential_cdf(taus, p["rate"][:, None])
        return lognormal_cdf(taus, p["mu"][:, None], p["sigma"][:, None])


def _link(head: str, raw: np.ndarray) -> dict:
    if head == "exponential":
        return {"rate": softplus(raw[:, 0]) + LAMBDA_FLOOR}
    return {"mu": raw[:, 0], "sigma": softplus(raw[:, 1]) + SIGMA_FLOOR}


def _loss_and_grad_out(head: str, raw, y, c, n_points: int):
    """Mean CRPS and its gradient with respect to the raw network outputs."""
    n = y.shape[0]
    p = _link(head, raw)
    g = np.zeros_like(raw)
    if head == "exponential":
        lam = p["rate"]
        vals = crps_exponential(lam, y, c)
        g[:, 0] = crps_exponential_grad(lam, y, c) * sigmoid(raw[:, 0]) / n
    else:
        vals, dmu, dsig = crps_lognormal_batch(p["mu"], p["sigma"], y, c, n_points)
        g[:, 0] = dmu / n
        g[:, 1] = dsig * sigmoid(raw[:, 1]) / n
    return float(np.mean(vals)), g


def _table(data) -> SnapshotTable:
    return SnapshotTable.from_dataset(data) if isinstance(data, Dataset) else data


def train_parametric(train, valid, config: ParametricConfig | None = None, **overrides) -> ParametricModel:
    """Minimise mean Survival-CRPS over training snapshots with full-batch Adam.

    Training stops once the validation CRPS has not improved for
    ``patience`` epochs and the best epoch's weights are returned.
    """
    config = config or ParametricConfig(**overrides)
    tr = _table(train)
    if len(tr) == 0:
        raise ValueError("empty training set")
    va = _table(valid) if valid is not None else None
    has_valid = va is not None and len(va) > 0
    n_out = 1 if config.head == "exponential" else 2
    rng = np.random.default_rng(config.seed)
    net = MLP(tr.X.shape[1], config.hidden_sizes, n_out, rng)
    net.W[-1][:] = 0.0
    X, y, c = tr.X, tr.y, tr.c.astype(float)
    if config.init_from_data:
        # start every row at the pooled fit
        if config.head == "exponential":
            rate = max(float(np.sum(1.0 - c)) / float(np.sum(y)), 1e-6)
            net.b[-1][0] = inverse_softplus(rate)
        else:
            ly = np.log(y)
            net.b[-1][0] = float(np.median(ly))
            net.b[-1][1] = inverse_softplus(max(float(np.std(ly)), 0.1))
    else:
        net.W[-1][:] = 0.0
        net.b[-1][:] = 0.0

    opt = Adam(lr=config.lr)
    stopper = EarlyStopping(config.patience)
    best = (net.copy(), 0)
    epochs = 0
    for epoch in range(1, config.max_epochs + 1):
        raw, acts = net.forward(X, keep=True)
        if not np.all(np.isfinite(raw)):
            raise NonFiniteLoss(f"epoch {epoch}: {int(np.sum(~np.isfinite(raw)))} non-finite predictor outputs")
        loss, g_out = _loss_and_grad_out(config.head, raw, y, c, config.train_points)
        pen, pen_grads = net.l2_penalty(config.l2)
        if not math.isfinite(loss + pen):
            raise NonFiniteLoss(
                f"epoch {epoch}: loss={loss} penalty={pen}; raw outputs in "
                f"[{np.nanmin(raw):.3g}, {np.nanmax(raw):.3g}]")
        grads = [a + b for a, b in zip(net.backward(acts, g_out), pen_grads)]
        opt.step(net.params, grads)
        epochs = epoch
        if has_valid:
            vraw = net.forward(va.X)
            if not np.all(np.isfinite(vraw)):
                raise NonFiniteLoss(f"epoch {epoch}: non-finite outputs on validation rows")
            vloss, _ = _loss_and_grad_out(config.head, vraw, va.y, va.c.astype(float), config.train_points)
            if not math.isfinite(vloss):
                raise NonFiniteLoss(f"epoch {epoch}: validation loss {vloss}")
            improved = vloss < stopper.best
            stop = stopper.update(vloss)
            if improved:
                best = (net.copy(), epoch)
            if stop:
                break
        else:
            best = (net.copy(), epoch)
    log.info("%s head: %d epochs, best %d", config.head, epochs, best[1])
    return ParametricModel(config.head, best[0], config.to_dict(), epochs, best[1])


def _knots(grid) -> np.ndarray:
    if grid is None:
        return EVAL_KNOTS_HOURS
    return grid.horizons_hours if isinstance(grid, HorizonGrid) else np.asarray(grid, dtype=float)


def predict_parametric_batch(model: ParametricModel, snapshots, grid=None) -> CurveBatch:
    """Discretise the head CDF of every row onto ``grid`` (hourly to 240 h by default)."""
    X = snapshots.X if isinstance(snapshots, SnapshotTable) else np.asarray(snapshots, dtype=float)
    knots = _knots(grid)
    if X.ndim == 2 and X.shape[0] == 0:
        return CurveBatch(knots, np.zeros((0, knots.size)))
    cdf = np.clip(model.cdf(X, knots), 0.0, 1.0)
    # the analytic CDF is monotone; this only guards against rounding
    np.maximum.accumulate(cdf, axis=1, out=cdf)
    return CurveBatch(knots, cdf)


def predict_parametric_curve(model: ParametricModel, x, grid=None) -> SurvivalCurve:
    batch = predict_parametric_batch(model, np.asarray(x, dtype=float).reshape(1, -1), grid)
    return batch[0]
