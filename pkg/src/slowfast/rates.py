"""Epsilon-sweep experiments for strong and weak convergence orders.

Strong sweeps drive the slow-fast pair and the averaged equation with the
identical L1 increment stream (legitimate for time-only delta1: the
difference process then carries no stochastic integral), measure the
replica mean of sup_t |X_eps - X_bar|^p, and fit a weighted log-log slope.
Weak sweeps compare E phi(X_T) under the two dynamics.

Per-path orders: errors are stored as p-th roots of the p-th moments, so a
fitted slope is comparable to the theoretical per-path order for every p.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, FitError, ParameterError, PreconditionError
from .rng import BLOCK_SIZE, block_generator, block_ranges, master_seed
from .sde_core import SlowFastSystem, _as_batch, _drift, _matvec
from .stable_noise import StableSpec, _increments


def theoretical_strong_order(p: float, v: float, alpha1: float, alpha2: float) -> float:
    """Per-path strong order in epsilon of the slow-component error.

    The p-th moment of sup |X_eps - X_bar| decays at the epsilon exponent
    min over the two branches

        p * min(v/alpha2, 1 - max(1, alpha1 - v)/alpha2)   and
        p * (1 - (1 - min(1, v))/alpha2);

    dividing by p gives the per-path order returned here.  For v >= 1 it
    collapses to the optimal order 1 - 1/alpha2.
    """
    _check_alphas(alpha1, alpha2)
    if not (1.0 <= p < min(alpha1, alpha2)):
        raise ParameterError(f"p must lie in [1, alpha1^alpha2), got {p}")
    _check_v(v, alpha1, alpha2)
    e1 = min(v / alpha2, 1.0 - max(1.0, alpha1 - v) / alpha2)
    e2 = 1.0 - (1.0 - min(1.0, v)) / alpha2
    return min(e1, e2)


def theoretical_weak_order(v: float, alpha1: float, alpha2: float) -> float:
    """Weak order in epsilon: min(v/alpha2, 1 - (alpha1 - v)/alpha2)."""
    _check_alphas(alpha1, alpha2)
    _check_v(v, alpha1, alpha2)
    return min(v / alpha2, 1.0 - (alpha1 - v) / alpha2)


def _check_alphas(alpha1, alpha2):
    for label, alpha in (("alpha1", alpha1), ("alpha2", alpha2)):
        if not (1.0 < alpha < 2.0):
            raise ParameterError(f"{label} must lie in (1, 2), got {alpha}")


def _check_v(v, alpha1, alpha2):
    lo = max(alpha1 - alpha2, 0.0)
    if not (lo < v <= alpha1):
        raise ParameterError(f"v must lie in (({alpha1}-{alpha2})^+, {alpha1}], got {v}")


@dataclass
class RateTable:
    """Errors against epsilon with fitted and theoretical slopes."""

    rows: list  # of (epsilon, error, stderr)
    fitted_slope: float
    slope_stderr: float
    theoretical_slope: float
    n_replicas: int = 0
    dt_bias_gap: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        eps = np.array([r[0] for r in self.rows])
        errs = np.array([r[1] for r in self.rows])
        if np.any(np.diff(eps) >= 0):
            raise ParameterError("epsilons must be strictly decreasing")
        if np.any(errs <= 0):
            raise ParameterError("errors must be positive")


def fit_loglog(rows: Sequence) -> tuple:
    """Weighted least-squares slope of log(error) against log(epsilon).

    Rows are (epsilon, error, stderr); log-space standard deviations come
    from the delta method (stderr/error) and enter as weights 1/sigma^2.
    Returns (slope, slope_stderr).
    """
    if len(rows) < 3:
        raise FitError(f"need at least 3 rows, got {len(rows)}")
    eps = np.array([r[0] for r in rows], dtype=float)
    err = np.array([r[1] for r in rows], dtype=float)
    se = np.array([r[2] for r in rows], dtype=float)
    if np.any(err <= 0) or np.any(eps <= 0):
        raise FitError("epsilons and errors must be positive")
    if np.unique(eps).shape[0] < 2:
        raise FitError("degenerate design: all epsilons equal")
    sigma = np.where(err > 0, se / err, 0.0)
    unit_weights = bool(np.all(sigma == 0))
    if unit_weights:
        w = np.ones_like(err)
    else:
        floor = max(float(np.min(sigma[sigma > 0])) * 1e-3, 1e-12)
        w = 1.0 / np.maximum(sigma, floor) ** 2
    X = np.stack([np.ones_like(eps), np.log(eps)], axis=1)
    y = np.log(err)
    WX = X * w[:, None]
    cov = np.linalg.inv(X.T @ WX)
    coef = cov @ (WX.T @ y)
    resid = y - X @ coef
    dof = max(len(rows) - 2, 1)
    chi2 = float(np.sum(w * resid**2)) / dof
    # with real stderr weights the covariance is already scaled; inflate it
    # for overdispersion only.  With unit weights the residuals carry the
    # only noise estimate.
    scale = chi2 if unit_weights else max(chi2, 1.0)
    slope_se = float(np.sqrt(cov[1, 1] * scale))
    return float(coef[1]), slope_se


def _default_dt_rule(eps: float) -> float:
    return eps / 20.0


class _NullPool:
    def __enter__(self):
        return None

    def __exit__(self, *exc):
        return False


def _pool(workers: int):
    if workers and workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        return ProcessPoolExecutor(max_workers=int(workers))
    return _NullPool()


def _validate_grid(epsilon_grid):
    eps = np.asarray(epsilon_grid, dtype=float)
    if eps.ndim != 1 or eps.shape[0] < 4:
        raise PreconditionError("epsilon_grid needs at least 4 points")
    if np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise PreconditionError("epsilon_grid must be positive and strictly decreasing")
    return eps


class _TimeOnlyDelta1Bar:
    """delta1 depends on t only, so its average is itself (picklable)."""

    def __init__(self, system):
        self.system = system

    def __call__(self, t, x):
        s = self.system
        return np.asarray(s.delta1(t, np.zeros((1, s.d1)), np.zeros((1, s.d2))))


def _resolve_averaged(system, b_bar, delta1_bar):
    if b_bar is None:
        b_bar = system.b_bar
    if delta1_bar is None:
        delta1_bar = system.delta1_bar
    if delta1_bar is None and system.delta1_time_only:
        delta1_bar = _TimeOnlyDelta1Bar(system)
    if b_bar is None or delta1_bar is None:
        raise ConfigurationError(
            "no averaged coefficients available: supply b_bar/delta1_bar or use a "
            "registry system that provides them (or build them via "
            "ergodics.averaged_drift/averaged_noise)"
        )
    return b_bar, delta1_bar


def _paired_paths_block(system, x0, y0, T, dt, epsilon, b_bar, delta1_bar, gen, r):
    """Slow-fast and averaged paths on the same L1 stream for one block.

    Returns (sup_block, xe_T, xb_T): the per-replica sup over the time grid
    of |X_eps - X_bar| and both terminal slow states, shape (r, ...).
    """
    d1, d2 = system.d1, system.d2
    x = np.broadcast_to(_as_batch(x0, d1), (r, d1)).copy()
    y = np.broadcast_to(_as_batch(y0, d2), (r, d2)).copy()
    xb = x.copy()
    spec1 = StableSpec(system.alpha1, d1)
    spec2 = StableSpec(system.alpha2, d2)
    n_steps = int(np.ceil(T / dt - 1e-12))
    eps_noise = epsilon ** (-1.0 / system.alpha2)
    clips = [0]
    sup = np.linalg.norm(x - xb, axis=1)
    for k in range(n_steps):
        h = min(dt, T - k * dt)
        t = k * dt
        dl1 = _increments(spec1, h, gen, r)
        dl2 = _increments(spec2, h, gen, r)
        xn = x + _drift(system.b, (t, x, y), x.shape, system.drift_cap, clips) * h
        xn += _matvec(system.delta1, (t, x, y), dl1, d1)
        yn = y + _drift(system.f, (x, y), y.shape, system.drift_cap, clips) * (h / epsilon)
        yn += eps_noise * _matvec(system.delta2, (x, y), dl2, d2)
        xbn = xb + _drift(b_bar, (t, xb), xb.shape, system.drift_cap, clips) * h
        xbn += _matvec(delta1_bar, (t, xb), dl1, d1)
        x, y, xb = xn, yn, xbn
        sup = np.maximum(sup, np.linalg.norm(x - xb, axis=1))
    return sup, x, xb


def _strong_block(payload):
    """Worker entry: per-replica sups of one block (parallel-safe)."""
    (system, x0, y0, T, p, epsilon, dt, seed, index, start, stop, b_bar, delta1_bar) = payload
    gen = block_generator(seed, index, stream=_eps_stream(epsilon))
    sup, _, _ = _paired_paths_block(
        system, x0, y0, T, dt, epsilon, b_bar, delta1_bar, gen, stop - start
    )
    return sup


def _map_blocks(fn, payloads, executor):
    if executor is None:
        return [fn(p) for p in payloads]
    return list(executor.map(fn, payloads))


def _strong_error_at(
    system, x0, y0, T, p, epsilon, dt, replicas, seed, b_bar, delta1_bar, executor=None
):
    payloads = [
        (system, x0, y0, T, p, epsilon, dt, seed, index, start, stop, b_bar, delta1_bar)
        for index, start, stop in block_ranges(replicas, BLOCK_SIZE)
    ]
    sups = np.concatenate(_map_blocks(_strong_block, payloads, executor))
    m = float(np.mean(sups**p))
    se_m = float(np.std(sups**p, ddof=1) / np.sqrt(sups.shape[0]))
    err = m ** (1.0 / p)
    se = se_m * err / (p * m) if m > 0 else 0.0
    # exactly-coinciding paths (b = b_bar) give zero error; clamp so the
    # log-log fit stays defined and reports slope 0
    return max(err, 1e-300), se


def _eps_stream(epsilon: float) -> int:
    digest = hashlib.sha256(repr(float(epsilon)).encode()).digest()
    return int.from_bytes(digest[:4], "big") % (2**31 - 1) + 1


def _weak_block(payload):
    """Worker entry: per-replica phi values of one block (parallel-safe)."""
    (system, phi, x0, y0, T, epsilon, dt, seed, index, start, stop,
     b_bar, delta1_bar, common_noise) = payload
    gen = block_generator(seed, index, stream=_eps_stream(epsilon))
    r = stop - start
    if common_noise:
        _, xe, xb = _paired_paths_block(
            system, x0, y0, T, dt, float(epsilon), b_bar, delta1_bar, gen, r
        )
    else:
        from .sde_core import simulate_averaged, simulate_slow_fast

        path = simulate_slow_fast(system, x0, y0, T, dt, float(epsilon), gen, n_paths=r)
        xe = path.x_path[-1]
        bar = simulate_averaged(
            x0, T, dt, b_bar, delta1_bar, system.alpha1, rng=gen, n_paths=r
        )
        xb = bar.x_path[-1]
    pe = np.asarray(phi(xe), dtype=float).reshape(r)
    pb = np.asarray(phi(xb), dtype=float).reshape(r)
    return pe, pb


def weak_error_cell(
    system, phi, x0, y0, T, epsilon, dt, replicas, seed, b_bar, delta1_bar,
    common_noise=True, executor=None,
):
    """One epsilon cell of the weak sweep: (error, stderr, paired-abs error)."""
    payloads = [
        (system, phi, x0, y0, T, epsilon, dt, seed, index, start, stop,
         b_bar, delta1_bar, common_noise)
        for index, start, stop in block_ranges(replicas, BLOCK_SIZE)
    ]
    blocks = _map_blocks(_weak_block, payloads, executor)
    phis_e = [pe for pe, _ in blocks]
    phis_b = [pb for _, pb in blocks]
    diffs = np.concatenate(phis_e) - np.concatenate(phis_b)
    err = float(abs(np.mean(diffs)))
    se = float(np.std(diffs, ddof=1) / np.sqrt(diffs.shape[0]))
    if not common_noise:
        pe = np.concatenate(phis_e)
        pb = np.concatenate(phis_b)
        se = float(np.sqrt(pe.var(ddof=1) / pe.shape[0] + pb.var(ddof=1) / pb.shape[0]))
    # phi constant gives an exactly-zero cell; clamp keeps the fit defined
    err = max(err, 1e-300)
    return err, se, float(np.mean(np.abs(diffs)))


def strong_error_sweep(
    system: SlowFastSystem,
    x0,
    y0,
    T: float,
    p: float,
    epsilon_grid,
    dt_rule: Optional[Callable] = None,
    replicas: int = 2000,
    rng=0,
    b_bar: Optional[Callable] = None,
    delta1_bar: Optional[Callable] = None,
    dt_bias_check: bool = True,
    workers: int = 1,
) -> RateTable:
    """Measure E[sup_t |X_eps - X_bar|^p]^(1/p) over an epsilon grid.

    Requires delta1 to depend on t only (the standing assumption for strong
    rates); both equations consume the identical L1 stream.  With
    ``dt_bias_check`` the smallest epsilon is re-run at dt/2 and the error
    gap recorded, verifying the discretisation bias sits below Monte Carlo
    noise.  ``workers`` > 1 distributes replica blocks over a process pool;
    results are identical for every worker count.
    """
    if not system.delta1_time_only:
        raise ConfigurationError(
            "strong_error_sweep requires delta1 = delta1(t): a state-dependent "
            "slow noise coefficient leaves a stochastic integral in the "
            "difference process that cannot be dealt with Lipschitz condition"
        )
    eps_grid = _validate_grid(epsilon_grid)
    if not (1.0 <= p < min(system.alpha1, system.alpha2)):
        raise ParameterError(f"p must lie in [1, alpha1^alpha2), got {p}")
    dt_rule = dt_rule or _default_dt_rule
    b_bar, delta1_bar = _resolve_averaged(system, b_bar, delta1_bar)
    seed = master_seed(rng)

    rows = []
    with _pool(workers) as executor:
        for epsilon in eps_grid:
            dt = dt_rule(float(epsilon))
            err, se = _strong_error_at(
                system, x0, y0, T, p, float(epsilon), dt, replicas, seed,
                b_bar, delta1_bar, executor,
            )
            rows.append((float(epsilon), err, se))
        slope, slope_se = fit_loglog(rows)
        gap = None
        extra = {}
        if dt_bias_check:
            eps_min = float(eps_grid[-1])
            err_half, se_half = _strong_error_at(
                system, x0, y0, T, p, eps_min, dt_rule(eps_min) / 2.0,
                replicas, seed + 101, b_bar, delta1_bar, executor,
            )
            gap = abs(err_half - rows[-1][1])
            # the rerun uses fresh noise, so the bias test compares the gap
            # with the two estimates' combined fluctuation at two sigma
            extra["dt_bias_threshold"] = 2.0 * float(np.hypot(se_half, rows[-1][2]))
    return RateTable(
        rows,
        slope,
        slope_se,
        theoretical_strong_order(p, system.v, system.alpha1, system.alpha2),
        n_replicas=replicas,
        dt_bias_gap=gap,
        extra=extra,
    )


def weak_error_sweep(
    system: SlowFastSystem,
    phi: Callable,
    x0,
    y0,
    T: float,
    epsilon_grid,
    dt_rule: Optional[Callable] = None,
    replicas: int = 2000,
    rng=0,
    b_bar: Optional[Callable] = None,
    delta1_bar: Optional[Callable] = None,
    common_noise: bool = True,
    workers: int = 1,
) -> RateTable:
    """Measure |E phi(X_T^eps) - E phi(X_bar_T)| over an epsilon grid.

    ``phi`` must be bounded with bounded derivatives.  The two expectations
    use independent noise unless ``common_noise`` pairs the replicas on a
    shared L1 stream for variance reduction (the default; the estimator
    stays unbiased either way).  The paired replica mean of
    |phi(X^eps_T) - phi(X_bar_T)| is recorded alongside as a strong-error
    proxy in ``extra['abs_errors']``.
    """
    eps_grid = _validate_grid(epsilon_grid)
    dt_rule = dt_rule or _default_dt_rule
    b_bar, delta1_bar = _resolve_averaged(system, b_bar, delta1_bar)
    seed = master_seed(rng)

    rows = []
    abs_rows = []
    with _pool(workers) as executor:
        for epsilon in eps_grid:
            dt = dt_rule(float(epsilon))
            err, se, abs_err = weak_error_cell(
                system, phi, x0, y0, T, float(epsilon), dt, replicas, seed,
                b_bar, delta1_bar, common_noise, executor,
            )
            rows.append((float(epsilon), err, se))
            abs_rows.append(abs_err)
    slope, slope_se = fit_loglog(rows)
    return RateTable(
        rows,
        slope,
        slope_se,
        theoretical_weak_order(system.v, system.alpha1, system.alpha2),
        n_replicas=replicas,
        extra={"abs_errors": abs_rows},
    )


def rate_table_to_csv(table: RateTable, path, meta: Optional[dict] = None):
    """Write a RateTable as CSV with '#' metadata lines and a header row."""
    lines = []
    meta = dict(meta or {})
    for key in sorted(meta):
        lines.append(f"# {key}={meta[key]}")
    lines.append("epsilon,error,stderr,n_replicas")
    for eps, err, se in table.rows:
        lines.append(f"{eps!r},{err!r},{se!r},{table.n_replicas}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def rate_table_summary(table: RateTable, system_digest: str, seed: int) -> dict:
    """JSON-ready summary of a sweep."""
    out = {
        "schema_version": 1,
        "fitted_slope": table.fitted_slope,
        "slope_stderr": table.slope_stderr,
        "theoretical_slope": table.theoretical_slope,
        "system_digest": system_digest,
        "seed": int(seed),
        "n_replicas": int(table.n_replicas),
    }
    if table.dt_bias_gap is not None:
        out["dt_bias_gap"] = table.dt_bias_gap
    return out


def config_digest(config: dict) -> str:
    """Stable digest of a JSON-serialisable configuration."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]
