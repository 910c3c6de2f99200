"""Coefficient model and Euler-type integrators.

The slow-fast system

    dX = b(t, X, Y) dt + delta1(t, X, Y) dL1,
    dY = (1/eps) f(X, Y) dt + eps^{-1/alpha2} delta2(X, Y) dL2,

its frozen fast equation (x held fixed) and the averaged slow equation are
all integrated with explicit Euler steps: coefficients frozen at the left
endpoint, jump increments drawn exactly per step.

Coefficient callbacks receive state arrays carrying a leading replica axis,
``x`` of shape (R, d1) and ``y`` of shape (R, d2), with scalar ``t``; they
must be pure, reentrant, and broadcast over that axis.  Drift callbacks
return shape (R, d) (or anything broadcastable to it); noise-coefficient
callbacks return (R, d, d) or a broadcastable matrix/scalar.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, DivergenceError, ParameterError
from .rng import as_generator
from .sphere_geometry import JumpMatrix
from .stable_noise import StableSpec, _increments

DRIFT_CAP = 1e6  # magnitude clamp; one-sided dissipativity allows transient spikes


@dataclass
class SlowFastSystem:
    """Coefficients and regularity metadata of one slow-fast system.

    ``v`` is the Holder exponent of (b, delta1) in (t, x); ``L0``,
    ``c_loc`` and ``C_dissip`` witness the partial dissipativity of f:
    <f(x,y1) - f(x,y2), y1 - y2> <= c_loc |y1-y2|^2 for |y1-y2| <= L0 and
    <= -C_dissip |y1-y2|^2 beyond L0.
    """

    b: Callable
    delta1: Callable
    f: Callable
    delta2: Callable
    alpha1: float
    alpha2: float
    d1: int = 1
    d2: int = 1
    v: float = 1.0
    L0: float = 1.0
    c_loc: float = 1.0
    C_dissip: float = 1.0
    delta1_time_only: bool = True
    drift_cap: float = DRIFT_CAP
    name: str = "custom"
    b_bar: Optional[Callable] = None        # analytic averaged drift, when known
    delta1_bar: Optional[Callable] = None   # analytic averaged noise coefficient

    def __post_init__(self):
        for label, alpha in (("alpha1", self.alpha1), ("alpha2", self.alpha2)):
            if not (1.0 < alpha < 2.0):
                raise ParameterError(f"{label} must lie in (1, 2), got {alpha}")
        if self.d1 < 1 or self.d2 < 1:
            raise ParameterError("d1 and d2 must be >= 1")
        lo = max(self.alpha1 - self.alpha2, 0.0)
        if not (lo < self.v <= self.alpha1):
            raise ParameterError(
                f"v must lie in (({self.alpha1}-{self.alpha2})^+, {self.alpha1}], got {self.v}"
            )
        if self.L0 <= 0 or self.c_loc <= 0 or self.C_dissip <= 0:
            raise ParameterError("L0, c_loc, C_dissip must be positive")

    def check_dissipativity(self, rng, n_samples: int = 200, span: float = 10.0) -> bool:
        """Spot-check <f(x,y1)-f(x,y2), y1-y2> <= -C |y1-y2|^2 for |y1-y2| > L0."""
        rng = as_generator(rng)
        x = rng.uniform(-span, span, size=(n_samples, self.d1))
        y1 = rng.uniform(-span, span, size=(n_samples, self.d2))
        direction = rng.standard_normal((n_samples, self.d2))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        gap = rng.uniform(self.L0 * 1.01, self.L0 + span, size=(n_samples, 1))
        y2 = y1 + gap * direction
        df = np.asarray(self.f(x, y1)) - np.asarray(self.f(x, y2))
        lhs = np.sum(df * (y1 - y2), axis=1)
        return bool(np.all(lhs <= -self.C_dissip * gap[:, 0] ** 2 + 1e-9))

    def check_ellipticity(self, rng, n_samples: int = 50, span: float = 5.0) -> bool:
        """Spot-check that delta2 values are invertible with bounded SVs."""
        rng = as_generator(rng)
        for _ in range(n_samples):
            x = rng.uniform(-span, span, size=(1, self.d1))
            y = rng.uniform(-span, span, size=(1, self.d2))
            m = np.broadcast_to(
                np.asarray(self.delta2(x, y), dtype=float), (1, self.d2, self.d2)
            )[0]
            JumpMatrix(m)  # raises if singular
        return True


@dataclass
class PathSample:
    """One simulated trajectory (or the slow/fast half of one)."""

    times: np.ndarray
    x_path: Optional[np.ndarray]  # (n_times, d1) or None
    y_path: Optional[np.ndarray]  # (n_times, d2) or None
    seed: Optional[int] = None
    n_drift_clips: int = 0

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.shape[0] < 1:
            raise ParameterError("times must be a nonempty 1-d array")
        if t[0] != 0.0:
            raise ParameterError("times must start at 0")
        if np.any(np.diff(t) <= 0):
            raise ParameterError("times must be strictly increasing")
        for p in (self.x_path, self.y_path):
            if p is not None and p.shape[0] != t.shape[0]:
                raise ParameterError("path length inconsistent with times")
        self.times = t


def _as_batch(v, d: int) -> np.ndarray:
    """Coerce an initial state to shape (R, d)."""
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim == 1:
        if v.shape[0] != d:
            raise ParameterError(f"state has dimension {v.shape[0]}, expected {d}")
        return v[None, :].copy()
    if v.ndim == 2 and v.shape[1] == d:
        return v.copy()
    raise ParameterError(f"cannot interpret state of shape {v.shape} as (R, {d})")


def _drift(cb, args, shape, cap, clips):
    out = np.asarray(cb(*args), dtype=float)
    if out.shape != shape:
        out = np.broadcast_to(out, shape)
    if not (np.max(np.abs(out), initial=0.0) > cap):  # False also on NaN-free fast path
        return out
    out = out.copy()
    over = np.abs(out) > cap
    clips[0] += int(np.count_nonzero(over))
    out[over] = np.sign(out[over]) * cap
    return out


def _matvec(cb, args, dl, d):
    coeff = np.asarray(cb(*args), dtype=float)
    if coeff.ndim == 0:
        return coeff * dl
    if coeff.ndim == 2 and coeff.shape == (d, d):
        return dl @ coeff.T
    if coeff.ndim == 3:
        if d == 1:
            return coeff.reshape(-1, 1) * dl  # (R, 1) or (1, 1) broadcasts cleanly
        coeff = np.broadcast_to(coeff, (dl.shape[0], d, d))
        return np.einsum("rij,rj->ri", coeff, dl)
    raise ParameterError(
        "noise-coefficient callbacks must return a scalar, a (d, d) matrix, "
        f"or an (R, d, d) stack; got shape {coeff.shape}"
    )


def _check_finite(arrs, step):
    bad = 0
    for a in arrs:
        bad += int(np.count_nonzero(~np.all(np.isfinite(a), axis=-1)))
    if bad:
        raise DivergenceError(step, bad)


def step_slow_fast(system: SlowFastSystem, state, dt: float, epsilon: float, rng):
    """One explicit Euler step of the slow-fast pair.

    ``state`` is (t, x, y) with x, y either single vectors or (R, d) blocks.
    Returns (t + dt, x', y').  The L1 increment is drawn before the L2
    increment (fixed consumption order for reproducibility).
    """
    if dt <= 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if not (0.0 < epsilon <= 1.0):
        raise ParameterError(f"epsilon must lie in (0, 1], got {epsilon}")
    rng = as_generator(rng)
    t, x, y = state
    single = np.asarray(x, dtype=float).ndim <= 1
    x = _as_batch(x, system.d1)
    y = _as_batch(y, system.d2)
    r = x.shape[0]
    spec1 = StableSpec(system.alpha1, system.d1)
    spec2 = StableSpec(system.alpha2, system.d2)
    dl1 = _increments(spec1, dt, rng, r)
    dl2 = _increments(spec2, dt, rng, r)
    clips = [0]
    xn = x + _drift(system.b, (t, x, y), x.shape, system.drift_cap, clips) * dt
    xn += _matvec(system.delta1, (t, x, y), dl1, system.d1)
    yn = y + _drift(system.f, (x, y), y.shape, system.drift_cap, clips) * (dt / epsilon)
    yn += epsilon ** (-1.0 / system.alpha2) * _matvec(system.delta2, (x, y), dl2, system.d2)
    _check_finite((xn, yn), 1)
    if single:
        return t + dt, xn[0], yn[0]
    return t + dt, xn, yn


def _time_grid(T: float, dt: float):
    n_steps = int(np.ceil(T / dt - 1e-12)) if T > 0 else 0
    times = np.empty(n_steps + 1)
    times[:] = dt * np.arange(n_steps + 1)
    if n_steps:
        times[-1] = min(times[-1], T)
    return n_steps, times


def simulate_slow_fast(
    system: SlowFastSystem,
    x0,
    y0,
    T: float,
    dt: float,
    epsilon: float,
    rng,
    n_paths: Optional[int] = None,
    l1_increments: Optional[np.ndarray] = None,
    allow_large_dt: bool = False,
) -> PathSample:
    """Integrate the slow-fast pair on [0, T].

    ``dt <= epsilon`` is enforced (the fast drift is O(1/eps)); pass
    ``allow_large_dt=True`` to override.  When ``l1_increments`` of shape
    (n_steps, R, d1) is supplied the slow noise is consumed from it instead
    of being drawn, which lets callers drive the averaged equation with the
    identical stream.  With ``n_paths=None`` a single path is returned with
    arrays of shape (n_times, d); otherwise (n_times, n_paths, d).
    """
    if T < 0:
        raise ParameterError(f"T must be >= 0, got {T}")
    if dt <= 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if not (0.0 < epsilon <= 1.0):
        raise ParameterError(f"epsilon must lie in (0, 1], got {epsilon}")
    if dt > epsilon and not allow_large_dt:
        raise ConfigurationError(
            f"dt={dt} exceeds epsilon={epsilon}; explicit stepping of the fast "
            "drift needs dt <= epsilon (override with allow_large_dt=True)"
        )
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = as_generator(rng)
    single = n_paths is None
    r = 1 if single else int(n_paths)
    x = np.broadcast_to(_as_batch(x0, system.d1), (r, system.d1)).copy()
    y = np.broadcast_to(_as_batch(y0, system.d2), (r, system.d2)).copy()

    n_steps, times = _time_grid(T, dt)
    xs = np.empty((n_steps + 1, r, system.d1))
    ys = np.empty((n_steps + 1, r, system.d2))
    xs[0], ys[0] = x, y
    spec1 = StableSpec(system.alpha1, system.d1)
    spec2 = StableSpec(system.alpha2, system.d2)
    eps_noise = epsilon ** (-1.0 / system.alpha2)
    clips = [0]
    for k in range(n_steps):
        h = times[k + 1] - times[k]
        t = times[k]
        if l1_increments is None:
            dl1 = _increments(spec1, h, rng, r)
        else:
            dl1 = l1_increments[k]
        dl2 = _increments(spec2, h, rng, r)
        xn = x + _drift(system.b, (t, x, y), x.shape, system.drift_cap, clips) * h
        xn += _matvec(system.delta1, (t, x, y), dl1, system.d1)
        yn = y + _drift(system.f, (x, y), y.shape, system.drift_cap, clips) * (h / epsilon)
        yn += eps_noise * _matvec(system.delta2, (x, y), dl2, system.d2)
        _check_finite((xn, yn), k + 1)
        x, y = xn, yn
        xs[k + 1], ys[k + 1] = x, y
    if single:
        xs, ys = xs[:, 0, :], ys[:, 0, :]
    return PathSample(times, xs, ys, seed=seed, n_drift_clips=clips[0])


def simulate_frozen(
    x,
    y0,
    T: float,
    dt: float,
    system: SlowFastSystem,
    rng,
    n_paths: Optional[int] = None,
) -> PathSample:
    """Integrate the frozen equation dY = f(x, Y) dt + delta2(x, Y) dL2."""
    if T < 0:
        raise ParameterError(f"T must be >= 0, got {T}")
    if dt <= 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = as_generator(rng)
    single = n_paths is None
    r = 1 if single else int(n_paths)
    xf = np.broadcast_to(_as_batch(x, system.d1), (r, system.d1)).copy()
    y = np.broadcast_to(_as_batch(y0, system.d2), (r, system.d2)).copy()
    n_steps, times = _time_grid(T, dt)
    ys = np.empty((n_steps + 1, r, system.d2))
    ys[0] = y
    spec2 = StableSpec(system.alpha2, system.d2)
    clips = [0]
    for k in range(n_steps):
        h = times[k + 1] - times[k]
        dl2 = _increments(spec2, h, rng, r)
        yn = y + _drift(system.f, (xf, y), y.shape, system.drift_cap, clips) * h
        yn += _matvec(system.delta2, (xf, y), dl2, system.d2)
        _check_finite((yn,), k + 1)
        y = yn
        ys[k + 1] = y
    if single:
        ys = ys[:, 0, :]
    return PathSample(times, None, ys, seed=seed, n_drift_clips=clips[0])


def simulate_averaged(
    x0,
    T: float,
    dt: float,
    b_bar: Callable,
    delta1_bar: Callable,
    alpha1: float,
    rng=None,
    increments: Optional[np.ndarray] = None,
    n_paths: Optional[int] = None,
) -> PathSample:
    """Integrate the averaged slow equation dX = b_bar dt + delta1_bar dL1.

    Either ``rng`` (fresh noise) or ``increments`` of shape
    (n_steps, R, d1) must be given; supplying the increments recorded from a
    slow-fast run drives both equations with the same L1 stream.
    """
    if T < 0:
        raise ParameterError(f"T must be >= 0, got {T}")
    if dt <= 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if increments is None and rng is None:
        raise ParameterError("either rng or increments must be provided")
    x0b = np.atleast_1d(np.asarray(x0, dtype=float))
    d1 = x0b.shape[-1]
    seed = rng if isinstance(rng, (int, np.integer)) else None
    single = n_paths is None
    r = 1 if single else int(n_paths)
    x = np.broadcast_to(_as_batch(x0, d1), (r, d1)).copy()
    n_steps, times = _time_grid(T, dt)
    if increments is not None and increments.shape[0] < n_steps:
        raise ParameterError(
            f"increment stream supplies {increments.shape[0]} steps, need {n_steps}"
        )
    gen = as_generator(rng) if increments is None else None
    spec1 = StableSpec(alpha1, d1)
    xs = np.empty((n_steps + 1, r, d1))
    xs[0] = x
    clips = [0]
    for k in range(n_steps):
        h = times[k + 1] - times[k]
        t = times[k]
        if increments is None:
            dl1 = _increments(spec1, h, gen, r)
        else:
            dl1 = increments[k]
        xn = x + _drift(b_bar, (t, x), x.shape, DRIFT_CAP, clips) * h
        xn += _matvec(delta1_bar, (t, x), dl1, d1)
        _check_finite((xn,), k + 1)
        x = xn
        xs[k + 1] = x
    if single:
        xs = xs[:, 0, :]
    return PathSample(times, xs, None, seed=seed, n_drift_clips=clips[0])


def stable_dt(epsilon: float, lip_f: Optional[float] = None) -> float:
    """Default stability guard dt = epsilon * min(0.1, 1/(2 Lip(f)))."""
    bound = 0.1
    if lip_f is not None and lip_f > 0:
        bound = min(bound, 1.0 / (2.0 * lip_f))
    return epsilon * bound
