"""Invariant-measure averages, averaged coefficients, decay fits, correctors.

All estimators run the frozen equation in fixed-size replica blocks whose
generators derive from (master seed, block index), so results are
reproducible and independent of scheduling.  Observables ``g`` receive the
fast state as an (R, d2) array and must return an (R,) array (or an (R, k)
array for vector-valued averages).
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    InsufficientSignalError,
    ParameterError,
    PreconditionError,
)
from .rng import BLOCK_SIZE, block_generator, block_ranges, master_seed
from .sde_core import SlowFastSystem, _as_batch, _drift, _matvec
from .stable_noise import StableSpec, _increments

_KEY_OFFSET = 2**31


@dataclass(frozen=True)
class ErgodicEstimate:
    """A Monte Carlo estimate of an invariant-measure average."""

    value: float
    stderr: float
    burn_in: float
    horizon: float
    replicas: int

    def __post_init__(self):
        if self.stderr < 0:
            raise ParameterError("stderr must be >= 0")
        if not (self.horizon > self.burn_in):
            raise ParameterError("horizon must exceed burn_in")


@dataclass(frozen=True)
class CorrectorValue:
    """A truncated corrector integral with its tail bound."""

    value: float
    truncation_T: float
    residual_bound: float
    stderr: float = 0.0

    def __post_init__(self):
        if self.residual_bound < 0:
            raise ParameterError("residual_bound must be >= 0")


@dataclass
class ErgodicConfig:
    """Budget and memoization knobs for invariant-measure estimation.

    ``burn_in`` defaults to 20% of the horizon (exponential ergodicity makes
    the residual bias e^{-beta burn_in}; callers with a decay fit should use
    5/beta_hat instead).  ``t_step``/``x_step`` set the rectangular
    memoization grid for the averaged coefficients; ``None`` caches exact
    evaluation points instead of interpolating.
    """

    burn_in: Optional[float] = None
    horizon: float = 25.0
    dt: float = 0.01
    replicas: int = 256
    seed: int = 0
    t_step: Optional[float] = None
    x_step: Optional[float] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self):
        if self.burn_in is None:
            self.burn_in = 0.2 * self.horizon
        if not (self.horizon > self.burn_in > 0):
            raise ParameterError("need horizon > burn_in > 0")
        if self.dt <= 0:
            raise ParameterError("dt must be positive")
        if self.replicas < 2:
            raise ParameterError("need at least 2 replicas")


def _frozen_block_average(system, x, funcs, burn_in, horizon, dt, start, stop, gen):
    """Time averages of ``funcs(y)`` over (burn_in, horizon] for one block.

    Returns an array of per-replica averages, shape (stop - start, k).
    """
    r = stop - start
    xf = np.broadcast_to(_as_batch(x, system.d1), (r, system.d1)).copy()
    y = np.broadcast_to(_as_batch(np.zeros(system.d2), system.d2), (r, system.d2)).copy()
    spec2 = StableSpec(system.alpha2, system.d2)
    n_steps = int(np.ceil(horizon / dt - 1e-12))
    clips = [0]
    acc = None
    n_window = 0
    for k in range(n_steps):
        h = min(dt, horizon - k * dt)
        dl2 = _increments(spec2, h, gen, r)
        y = (
            y
            + _drift(system.f, (xf, y), y.shape, system.drift_cap, clips) * h
            + _matvec(system.delta2, (xf, y), dl2, system.d2)
        )
        t = (k + 1) * dt
        if t > burn_in:
            vals = np.asarray(funcs(y), dtype=float)
            if vals.ndim == 1:
                vals = vals[:, None]
            acc = vals.copy() if acc is None else acc + vals
            n_window += 1
    if acc is None:
        raise ParameterError("no time steps fall inside (burn_in, horizon]")
    return acc / n_window


def _frozen_time_average(system, x, funcs, burn_in, horizon, dt, replicas, seed, stream):
    """Across-replica mean and stderr of frozen-path time averages."""
    per_replica = []
    for index, start, stop in block_ranges(replicas, BLOCK_SIZE):
        gen = block_generator(seed, index, stream=stream)
        per_replica.append(
            _frozen_block_average(system, x, funcs, burn_in, horizon, dt, start, stop, gen)
        )
    per_replica = np.concatenate(per_replica, axis=0)
    mean = per_replica.mean(axis=0)
    stderr = per_replica.std(axis=0, ddof=1) / np.sqrt(per_replica.shape[0])
    return mean, stderr


def invariant_average(
    system: SlowFastSystem,
    x,
    g: Callable,
    burn_in: float,
    horizon: float,
    dt: float,
    replicas: int,
    rng,
) -> ErgodicEstimate:
    """Estimate the invariant-measure average of ``g`` for the frozen equation.

    The estimator is the time average over (burn_in, horizon] of ``g`` along
    frozen paths, averaged across replicas; the standard error comes from
    the across-replica spread.
    """
    if not (horizon > burn_in > 0):
        raise ParameterError("need horizon > burn_in > 0")
    seed = master_seed(rng)
    mean, stderr = _frozen_time_average(
        system, x, g, burn_in, horizon, dt, replicas, seed, stream=0
    )
    return ErgodicEstimate(float(mean[0]), float(stderr[0]), burn_in, horizon, replicas)


def _node_key(kind, indices):
    return (kind,) + tuple(int(i) + _KEY_OFFSET for i in indices)


def _node_average(system, t, x, cfg, kind):
    """Averaged coefficient at one exact (t, x) node, cached."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if cfg.t_step is not None:
        it = int(np.round(t / cfg.t_step))
    else:
        it = 0
    if cfg.x_step is not None:
        ix = tuple(int(np.round(c / cfg.x_step)) for c in x)
    else:
        ix = tuple(np.round(x / 1e-12).astype(np.int64))  # exact-point cache key
    key = _node_key(kind, (it,) + ix) if cfg.t_step or cfg.x_step else (kind, float(t), tuple(x))
    with cfg._lock:
        if key in cfg._cache:
            return cfg._cache[key]
    if kind == "b":
        def funcs(y):
            xb = np.broadcast_to(x, (y.shape[0], system.d1))
            return np.asarray(system.b(t, xb, y), dtype=float).reshape(y.shape[0], system.d1)
        k_out = (system.d1,)
    else:
        def funcs(y):
            xb = np.broadcast_to(x, (y.shape[0], system.d1))
            m = np.asarray(system.delta1(t, xb, y), dtype=float)
            m = np.broadcast_to(m, (y.shape[0], system.d1, system.d1))
            return m.reshape(y.shape[0], system.d1 * system.d1)
        k_out = (system.d1, system.d1)
    # process-independent stream id (builtin hash of strings is randomized)
    stream = int.from_bytes(
        hashlib.sha256(repr(key).encode()).digest()[:4], "big"
    ) % (2**31)
    mean, _ = _frozen_time_average(
        system, x, funcs, cfg.burn_in, cfg.horizon, cfg.dt, cfg.replicas, cfg.seed, stream
    )
    value = mean.reshape(k_out)
    with cfg._lock:
        cfg._cache[key] = value
    return value


def _interpolated_average(system, t, x, cfg, kind):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if cfg.t_step is None and cfg.x_step is None:
        return _node_average(system, t, x, cfg, kind)
    axes = []
    if cfg.t_step is not None:
        axes.append(("t", t / cfg.t_step))
    if cfg.x_step is not None:
        for c in x:
            axes.append(("x", c / cfg.x_step))
    lows = [int(np.floor(pos)) for _, pos in axes]
    fracs = [pos - lo for (_, pos), lo in zip(axes, lows)]
    out = None
    for corner in range(2 ** len(axes)):
        weight = 1.0
        coords = []
        for a in range(len(axes)):
            bit = (corner >> a) & 1
            weight *= fracs[a] if bit else (1.0 - fracs[a])
            coords.append(lows[a] + bit)
        if weight == 0.0:
            continue
        i = 0
        if cfg.t_step is not None:
            tn = coords[0] * cfg.t_step
            i = 1
        else:
            tn = t
        xn = np.array(coords[i:]) * cfg.x_step if cfg.x_step is not None else x
        val = _node_average(system, tn, xn, cfg, kind)
        out = weight * val if out is None else out + weight * val
    return out


def averaged_drift(system: SlowFastSystem, t: float, x, ergodic_config: ErgodicConfig):
    """b_bar(t, x): the drift averaged against the frozen invariant measure."""
    return _interpolated_average(system, t, x, ergodic_config, "b")


def averaged_noise(system: SlowFastSystem, t: float, x, ergodic_config: ErgodicConfig):
    """delta1_bar(t, x): the slow noise coefficient averaged the same way."""
    return _interpolated_average(system, t, x, ergodic_config, "d1")


def grid_refinement_gap(system, t, x, cfg: ErgodicConfig) -> float:
    """Change in interpolated b_bar when the memoization grid is halved."""
    if cfg.x_step is None:
        raise ParameterError("grid_refinement_gap needs a finite x_step")
    fine = ErgodicConfig(
        burn_in=cfg.burn_in,
        horizon=cfg.horizon,
        dt=cfg.dt,
        replicas=cfg.replicas,
        seed=cfg.seed,
        t_step=cfg.t_step / 2 if cfg.t_step else None,
        x_step=cfg.x_step / 2,
    )
    coarse_val = averaged_drift(system, t, x, cfg)
    fine_val = averaged_drift(system, t, x, fine)
    return float(np.max(np.abs(coarse_val - fine_val)))


def _coupled_frozen_moments(system, x, y_starts, p, time_grid, dt, replicas, seed, power_fn):
    """Mean/stderr of |Y^{y1} - Y^{y2}|^p at grid times, synchronous coupling."""
    t_max = float(time_grid[-1])
    n_steps = int(np.round(t_max / dt))
    if abs(n_steps * dt - t_max) > 1e-9:
        n_steps = int(np.ceil(t_max / dt - 1e-12))
    idx = np.round(np.asarray(time_grid) / dt).astype(int)
    if np.any(np.abs(idx * dt - np.asarray(time_grid)) > dt / 2 + 1e-12):
        raise ParameterError("time_grid points must be close to multiples of dt")
    idx_set = {int(i): j for j, i in enumerate(idx)}
    sums = np.zeros(len(time_grid))
    sqs = np.zeros(len(time_grid))
    count = 0
    spec2 = StableSpec(system.alpha2, system.d2)
    y1_0, y2_0 = y_starts
    for index, start, stop in block_ranges(replicas, BLOCK_SIZE):
        gen = block_generator(seed, index, stream=3)
        r = stop - start
        xf = np.broadcast_to(_as_batch(x, system.d1), (r, system.d1)).copy()
        ya = np.broadcast_to(_as_batch(y1_0, system.d2), (r, system.d2)).copy()
        yb = np.broadcast_to(_as_batch(y2_0, system.d2), (r, system.d2)).copy()
        clips = [0]
        if 0 in idx_set:
            v = power_fn(np.linalg.norm(ya - yb, axis=1), p)
            sums[idx_set[0]] += v.sum()
            sqs[idx_set[0]] += (v**2).sum()
        for k in range(n_steps):
            h = min(dt, t_max - k * dt)
            dl2 = _increments(spec2, h, gen, r)
            ya = (
                ya
                + _drift(system.f, (xf, ya), ya.shape, system.drift_cap, clips) * h
                + _matvec(system.delta2, (xf, ya), dl2, system.d2)
            )
            yb = (
                yb
                + _drift(system.f, (xf, yb), yb.shape, system.drift_cap, clips) * h
                + _matvec(system.delta2, (xf, yb), dl2, system.d2)
            )
            j = idx_set.get(k + 1)
            if j is not None:
                v = power_fn(np.linalg.norm(ya - yb, axis=1), p)
                sums[j] += v.sum()
                sqs[j] += (v**2).sum()
        count += r
    mean = sums / count
    var = np.maximum(sqs / count - mean**2, 0.0)
    stderr = np.sqrt(var / count)
    return mean, stderr


def _weighted_exp_fit(times, values, stderrs):
    """WLS fit of log(values) = log C - beta * t; returns beta, C, r2."""
    times = np.asarray(times, dtype=float)
    logs = np.log(values)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = np.where(values > 0, stderrs / values, np.inf)
    if np.all(sigma == 0) or not np.any(np.isfinite(sigma)):
        w = np.ones_like(logs)
    else:
        floor = max(np.min(sigma[sigma > 0], initial=1e-12), 1e-12)
        w = 1.0 / np.maximum(sigma, floor) ** 2
    X = np.stack([np.ones_like(times), -times], axis=1)
    WX = X * w[:, None]
    beta_cov = np.linalg.inv(X.T @ WX)
    coef = beta_cov @ (WX.T @ logs)
    fitted = X @ coef
    ssr = float(np.sum(w * (logs - fitted) ** 2))
    sst = float(np.sum(w * (logs - np.average(logs, weights=w)) ** 2))
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    return float(coef[1]), float(np.exp(coef[0])), r2


def ergodic_decay_rate(
    system: SlowFastSystem,
    x,
    g: Callable,
    y0,
    time_grid,
    replicas: int,
    rng,
    dt: float = 0.005,
    gbar: Optional[tuple] = None,
    full_output: bool = False,
):
    """Fit the exponential decay of |P_t g(y0) - g_bar| on a time grid.

    Grid points whose gap is below three combined standard errors are
    excluded; fewer than three usable points raises
    :class:`InsufficientSignalError`.  Returns (beta_hat, C_hat, fit_r2).
    ``gbar`` may supply a precomputed (value, stderr) pair for the
    invariant average; otherwise it is estimated internally.
    """
    time_grid = np.asarray(time_grid, dtype=float)
    if time_grid.ndim != 1 or time_grid.shape[0] < 4:
        raise PreconditionError("time_grid must contain at least 4 increasing points")
    if np.any(np.diff(time_grid) <= 0) or time_grid[0] <= 0:
        raise PreconditionError("time_grid must be strictly increasing and positive")
    seed = master_seed(rng)

    t_max = float(time_grid[-1])
    if gbar is None:
        est = invariant_average(
            system, x, g, burn_in=2.0 * t_max, horizon=6.0 * t_max, dt=dt,
            replicas=max(replicas // 2, 64), rng=seed + 1,
        )
        gbar = (est.value, est.stderr)
    gbar_val, gbar_se = gbar

    idx = np.round(time_grid / dt).astype(int)
    if np.any(np.abs(idx * dt - time_grid) > dt / 2 + 1e-12):
        raise ParameterError("time_grid points must be close to multiples of dt")
    n_steps = int(idx[-1])
    idx_set = {int(i): j for j, i in enumerate(idx)}

    sums = np.zeros(len(time_grid))
    sqs = np.zeros(len(time_grid))
    count = 0
    spec2 = StableSpec(system.alpha2, system.d2)
    for index, start, stop in block_ranges(replicas, BLOCK_SIZE):
        gen = block_generator(seed, index, stream=2)
        r = stop - start
        xf = np.broadcast_to(_as_batch(x, system.d1), (r, system.d1)).copy()
        y = np.broadcast_to(_as_batch(y0, system.d2), (r, system.d2)).copy()
        clips = [0]
        for k in range(n_steps):
            dl2 = _increments(spec2, dt, gen, r)
            y = (
                y
                + _drift(system.f, (xf, y), y.shape, system.drift_cap, clips) * dt
                + _matvec(system.delta2, (xf, y), dl2, system.d2)
            )
            j = idx_set.get(k + 1)
            if j is not None:
                v = np.asarray(g(y), dtype=float).reshape(r)
                sums[j] += v.sum()
                sqs[j] += (v**2).sum()
        count += r
    mean = sums / count
    var = np.maximum(sqs / count - mean**2, 0.0)
    se = np.sqrt(var / count)

    gaps = np.abs(mean - gbar_val)
    se_comb = np.sqrt(se**2 + gbar_se**2)
    usable = gaps > 3.0 * se_comb
    if int(usable.sum()) < 3:
        raise InsufficientSignalError(
            f"only {int(usable.sum())} grid points rise above the noise floor"
        )
    snapped = idx * dt  # the times actually sampled
    beta, c_hat, r2 = _weighted_exp_fit(snapped[usable], gaps[usable], se_comb[usable])
    if full_output:
        points = [
            (float(t), float(gap), float(s), bool(u))
            for t, gap, s, u in zip(snapped, gaps, se_comb, usable)
        ]
        return beta, c_hat, r2, points
    return beta, c_hat, r2


def wasserstein_contraction(
    system: SlowFastSystem,
    x,
    y1,
    y2,
    p: float,
    time_grid,
    replicas: int,
    rng,
    dt: float = 0.005,
):
    """Decay-rate fit for the synchronous-coupling moment distance.

    Estimates D_t = (E |Y_t^{y1} - Y_t^{y2}|^p)^{1/p}, an upper bound on the
    Wasserstein distance W_p of the two laws (a certificate, not the exact
    distance), and fits D_t = C exp(-beta t).  Returns (beta_hat, C_hat).
    """
    y1 = np.atleast_1d(np.asarray(y1, dtype=float))
    y2 = np.atleast_1d(np.asarray(y2, dtype=float))
    if np.array_equal(y1, y2):
        raise PreconditionError("y1 and y2 must differ")
    if not (1.0 <= p < system.alpha2):
        raise ParameterError(f"p must lie in [1, alpha2), got {p}")
    time_grid = np.asarray(time_grid, dtype=float)
    if time_grid.ndim != 1 or time_grid.shape[0] < 4:
        raise PreconditionError("time_grid must contain at least 4 increasing points")
    if np.any(np.diff(time_grid) <= 0) or time_grid[0] <= 0:
        raise PreconditionError("time_grid must be strictly increasing and positive")
    seed = master_seed(rng)
    snapped = np.round(time_grid / dt) * dt  # the times actually sampled
    mean_p, se_p = _coupled_frozen_moments(
        system, x, (y1, y2), p, time_grid, dt, replicas, seed,
        power_fn=lambda d, q: d**q,
    )
    d_t = mean_p ** (1.0 / p)
    with np.errstate(divide="ignore", invalid="ignore"):
        se_d = np.where(mean_p > 0, d_t * se_p / (p * mean_p), 0.0)
    keep = d_t > 0
    if int(keep.sum()) < 3:
        raise InsufficientSignalError("coupled paths met before the third grid point")
    beta, c_hat, _ = _weighted_exp_fit(snapped[keep], d_t[keep], se_d[keep])
    return beta, c_hat


def corrector_eval(
    system: SlowFastSystem,
    x,
    y,
    g: Callable,
    T_max: Optional[float],
    dt: float,
    replicas: int,
    rng,
    decay_fit: Optional[tuple] = None,
    decay_grid=None,
) -> CorrectorValue:
    """Evaluate the corrector u(x, y) = integral of [E g(Y_s^{x,y}) - g_bar] ds.

    The integral is truncated at ``T_max`` (default 10 / beta_hat from the
    decay fit) and evaluated by the trapezoid rule on per-replica
    integrands; the estimated invariant average is always subtracted.  The
    reported residual bound is (C_hat / beta_hat) exp(-beta_hat T_max).
    """
    seed = master_seed(rng)
    if decay_fit is None:
        grid = np.asarray(decay_grid if decay_grid is not None else np.linspace(0.25, 2.0, 8))
        beta_hat, c_hat, _ = ergodic_decay_rate(
            system, x, g, y, grid, max(replicas, 512), seed + 17, dt=dt
        )
    else:
        beta_hat, c_hat = decay_fit
    if T_max is None:
        T_max = 10.0 / beta_hat
    if T_max <= 0 or dt <= 0:
        raise ParameterError("T_max and dt must be positive")

    est = invariant_average(
        system, x, g,
        burn_in=max(5.0 / beta_hat, 2.0), horizon=max(25.0 / beta_hat, 10.0),
        dt=dt, replicas=max(2 * replicas, 512), rng=seed + 31,
    )
    gbar, gbar_se = est.value, est.stderr

    n_steps = int(np.ceil(T_max / dt - 1e-12))
    spec2 = StableSpec(system.alpha2, system.d2)
    integrals = []
    for index, start, stop in block_ranges(replicas, BLOCK_SIZE):
        gen = block_generator(seed, index, stream=5)
        r = stop - start
        xf = np.broadcast_to(_as_batch(x, system.d1), (r, system.d1)).copy()
        yy = np.broadcast_to(_as_batch(y, system.d2), (r, system.d2)).copy()
        clips = [0]
        acc = 0.5 * (np.asarray(g(yy), dtype=float).reshape(r) - gbar)
        for k in range(n_steps):
            h = min(dt, T_max - k * dt)
            dl2 = _increments(spec2, h, gen, r)
            yy = (
                yy
                + _drift(system.f, (xf, yy), yy.shape, system.drift_cap, clips) * h
                + _matvec(system.delta2, (xf, yy), dl2, system.d2)
            )
            w = 0.5 if k == n_steps - 1 else 1.0
            acc = acc + w * (np.asarray(g(yy), dtype=float).reshape(r) - gbar)
        integrals.append(acc * dt)
    integrals = np.concatenate(integrals)
    value = float(integrals.mean())
    stderr = float(
        np.sqrt(integrals.var(ddof=1) / integrals.shape[0] + (T_max * gbar_se) ** 2)
    )
    residual = float(abs(c_hat / beta_hat) * np.exp(-beta_hat * T_max))
    return CorrectorValue(value, float(T_max), residual, stderr)


def check_centering(system: SlowFastSystem, x, g: Callable, ergodic_config: ErgodicConfig):
    """Residual of the centering condition: the invariant average of g.

    Returns (residual, stderr); a function satisfying the condition has
    residual compatible with zero at three standard errors.
    """
    est = invariant_average(
        system,
        x,
        g,
        ergodic_config.burn_in,
        ergodic_config.horizon,
        ergodic_config.dt,
        ergodic_config.replicas,
        ergodic_config.seed,
    )
    return est.value, est.stderr
