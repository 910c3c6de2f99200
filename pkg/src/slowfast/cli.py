"""Config-driven experiment runner.

Subcommands: simulate, frozen, ergodic, corrector, rates-strong,
rates-weak, geometry-check, coupling-check.  Each run writes results.csv
and summary.json into the output directory; every output file embeds the
config digest and master seed in '#'-prefixed header lines.  Exit codes:
0 success, 1 validation error, 2 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np
from scipy import stats

from . import coupling, ergodics, rates, sphere_geometry
from .errors import (
    ConfigurationError,
    DivergenceError,
    FitError,
    InsufficientSignalError,
    NumericError,
    ParameterError,
    PreconditionError,
)
from .sde_core import simulate_frozen, simulate_slow_fast
from .systems import build_observable, build_system

SCHEMA_VERSION = 1
SUBCOMMANDS = (
    "simulate",
    "frozen",
    "ergodic",
    "corrector",
    "rates-strong",
    "rates-weak",
    "geometry-check",
    "coupling-check",
)


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # do not sys.exit from library code
        raise _ArgumentError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="slowfast", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="worker pool size (default: available parallelism)")
        p.add_argument("--replicas", type=int, default=None, help="replica override")
        p.add_argument("--quiet", action="store_true")
        if name == "geometry-check":
            p.add_argument("--dim", type=int, default=2)
            p.add_argument("--trials", type=int, default=200)
            p.add_argument("--pushforward-samples", type=int, default=0)
            p.add_argument("--bins", type=int, default=360)
        if name == "coupling-check":
            p.add_argument("--trials", type=int, default=10_000)
            p.add_argument("--c1", type=float, default=None)
            p.add_argument("--L0", type=float, default=1.0)
    return parser


def _load_config(args) -> dict:
    if args.config is None:
        if args.command in ("geometry-check", "coupling-check"):
            return {"schema_version": SCHEMA_VERSION}
        raise ConfigurationError(f"{args.command} requires --config")
    if not os.path.exists(args.config):
        raise ConfigurationError(f"config file not found: {args.config}")
    with open(args.config, "r", encoding="utf-8") as fh:
        try:
            config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    version = config.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigurationError(
            f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})"
        )
    return config


def _resolve_seed(args, config) -> int:
    if args.seed is not None:
        return int(args.seed)
    if "seed" in config:
        return int(config["seed"])
    raise ConfigurationError("a seed is required (--seed or config['seed'])")


def _meta_lines(digest: str, seed: int):
    return {"config_digest": digest, "seed": seed, "schema_version": SCHEMA_VERSION}


def _write_csv(path, meta: dict, header: str, rows):
    lines = [f"# {k}={meta[k]}" for k in sorted(meta)]
    lines.append(header)
    lines.extend(rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_summary(path, payload: dict):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fmt(v) -> str:
    return repr(float(v))


def _path_csv_rows(path_sample):
    header_cols = ["t"]
    arrays = [path_sample.times]
    if path_sample.x_path is not None:
        for j in range(path_sample.x_path.shape[-1]):
            header_cols.append(f"x{j}")
            arrays.append(path_sample.x_path[:, j])
    if path_sample.y_path is not None:
        for j in range(path_sample.y_path.shape[-1]):
            header_cols.append(f"y{j}")
            arrays.append(path_sample.y_path[:, j])
    rows = [",".join(_fmt(a[i]) for a in arrays) for i in range(len(path_sample.times))]
    return ",".join(header_cols), rows


def _cmd_simulate(args, config, seed, out, digest):
    system = build_system(config["system"])
    path = simulate_slow_fast(
        system,
        np.asarray(config["x0"], dtype=float),
        np.asarray(config["y0"], dtype=float),
        float(config["T"]),
        float(config["dt"]),
        float(config["epsilon"]),
        seed,
    )
    header, rows = _path_csv_rows(path)
    _write_csv(os.path.join(out, "results.csv"), _meta_lines(digest, seed), header, rows)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": "simulate",
        "seed": seed,
        "config_digest": digest,
        "n_steps": len(path.times) - 1,
        "x_final": [float(v) for v in path.x_path[-1]],
        "y_final": [float(v) for v in path.y_path[-1]],
        "n_drift_clips": path.n_drift_clips,
    }
    _write_summary(os.path.join(out, "summary.json"), summary)
    return f"simulate: {len(path.times) - 1} steps, x_T={path.x_path[-1]}"


def _cmd_frozen(args, config, seed, out, digest):
    system = build_system(config["system"])
    path = simulate_frozen(
        np.asarray(config["x"], dtype=float),
        np.asarray(config["y0"], dtype=float),
        float(config["T"]),
        float(config["dt"]),
        system,
        seed,
    )
    header, rows = _path_csv_rows(path)
    _write_csv(os.path.join(out, "results.csv"), _meta_lines(digest, seed), header, rows)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": "frozen",
        "seed": seed,
        "config_digest": digest,
        "n_steps": len(path.times) - 1,
        "y_final": [float(v) for v in path.y_path[-1]],
    }
    _write_summary(os.path.join(out, "summary.json"), summary)
    return f"frozen: {len(path.times) - 1} steps, y_T={path.y_path[-1]}"


def _cmd_ergodic(args, config, seed, out, digest):
    system = build_system(config["system"])
    g = build_observable(config["observable"])
    replicas = int(args.replicas or config.get("replicas", 200))
    est = ergodics.invariant_average(
        system,
        np.asarray(config["x"], dtype=float),
        g,
        float(config.get("burn_in", 10.0)),
        float(config.get("horizon", 50.0)),
        float(config.get("dt", 0.01)),
        replicas,
        seed,
    )
    decay_cfg = config.get("decay", {})
    g_decay = build_observable(decay_cfg.get("observable", config["observable"]))
    beta, c_hat, r2, points = ergodics.ergodic_decay_rate(
        system,
        np.asarray(config["x"], dtype=float),
        g_decay,
        np.asarray(decay_cfg.get("y0", 3.0), dtype=float),
        np.asarray(decay_cfg.get("time_grid", np.linspace(0.25, 2.0, 8).tolist())),
        int(decay_cfg.get("replicas", 20_000)),
        seed + 1,
        dt=float(decay_cfg.get("dt", 0.005)),
        full_output=True,
    )
    meta = _meta_lines(digest, seed)
    rows = [
        f"invariant_average,{_fmt(est.value)},{_fmt(est.stderr)}",
        f"decay_beta,{_fmt(beta)},0.0",
        f"decay_C,{_fmt(c_hat)},0.0",
        f"decay_r2,{_fmt(r2)},0.0",
    ]
    _write_csv(os.path.join(out, "results.csv"), meta, "quantity,value,stderr", rows)
    decay_rows = [
        f"{_fmt(t)},{_fmt(gap)},{_fmt(se)},{int(used)}" for t, gap, se, used in points
    ]
    _write_csv(os.path.join(out, "decay.csv"), meta, "t,gap,stderr,used", decay_rows)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": "ergodic",
        "seed": seed,
        "config_digest": digest,
        "invariant_average": est.value,
        "stderr": est.stderr,
        "replicas": est.replicas,
        "burn_in": est.burn_in,
        "horizon": est.horizon,
        "beta_hat": beta,
        "C_hat": c_hat,
        "fit_r2": r2,
    }
    _write_summary(os.path.join(out, "summary.json"), summary)
    return f"ergodic: value={est.value:.5f} (se {est.stderr:.5f}), beta={beta:.3f}"


def _cmd_corrector(args, config, seed, out, digest):
    system = build_system(config["system"])
    g = build_observable(config["observable"])
    replicas = int(args.replicas or config.get("replicas", 2000))
    val = ergodics.corrector_eval(
        system,
        np.asarray(config["x"], dtype=float),
        np.asarray(config["y"], dtype=float),
        g,
        config.get("T_max"),
        float(config.get("dt", 0.01)),
        replicas,
        seed,
    )
    meta = _meta_lines(digest, seed)
    rows = [
        f"corrector_value,{_fmt(val.value)},{_fmt(val.stderr)}",
        f"truncation_T,{_fmt(val.truncation_T)},0.0",
        f"residual_bound,{_fmt(val.residual_bound)},0.0",
    ]
    _write_csv(os.path.join(out, "results.csv"), meta, "quantity,value,stderr", rows)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": "corrector",
        "seed": seed,
        "config_digest": digest,
        "value": val.value,
        "stderr": val.stderr,
        "truncation_T": val.truncation_T,
        "residual_bound": val.residual_bound,
    }
    _write_summary(os.path.join(out, "summary.json"), summary)
    return f"corrector: u={val.value:.5f} (se {val.stderr:.5f})"


class _DtRule:
    """Picklable dt rule dt = epsilon^power / factor."""

    def __init__(self, factor, power=1.0):
        self.factor = float(factor)
        self.power = float(power)

    def __call__(self, eps):
        return eps**self.power / self.factor


def _cmd_rates(kind, args, config, seed, out, digest):
    system = build_system(config["system"])  # validates early
    replicas = int(args.replicas or config.get("replicas", 2000))
    workers = args.workers if args.workers is not None else os.cpu_count()
    dt_rule = _DtRule(config.get("dt_factor", 20.0), config.get("dt_power", 1.0))
    common = dict(
        x0=np.asarray(config["x0"], dtype=float),
        y0=np.asarray(config["y0"], dtype=float),
        T=float(config["T"]),
        epsilon_grid=config["epsilon_grid"],
        dt_rule=dt_rule,
        replicas=replicas,
        rng=seed,
        workers=workers,
    )
    if kind == "strong":
        table = rates.strong_error_sweep(
            system,
            p=float(config.get("p", 1.0)),
            dt_bias_check=bool(config.get("dt_bias_check", False)),
            **common,
        )
    else:
        table = rates.weak_error_sweep(
            system,
            build_observable(config["phi"]),
            common_noise=bool(config.get("common_noise", True)),
            **common,
        )
    rows = table.rows
    slope, slope_se = table.fitted_slope, table.slope_stderr
    theo = table.theoretical_slope

    meta = _meta_lines(digest, seed)
    csv_rows = [f"{_fmt(e)},{_fmt(err)},{_fmt(se)},{replicas}" for e, err, se in rows]
    _write_csv(
        os.path.join(out, "results.csv"), meta, "epsilon,error,stderr,n_replicas", csv_rows
    )
    system_digest = rates.config_digest({"system": config["system"]})
    summary = rates.rate_table_summary(table, system_digest, seed)
    summary["command"] = f"rates-{kind}"
    summary["config_digest"] = digest
    if kind == "weak":
        summary["paired_abs_errors"] = table.extra["abs_errors"]
    _write_summary(os.path.join(out, "summary.json"), summary)
    return (
        f"rates-{kind}: fitted slope {slope:.4f} +/- {slope_se:.4f} "
        f"(theoretical {theo:.4f})"
    )


def _random_elliptic_matrix(dim, rng):
    q1, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    q2, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    sv = rng.uniform(0.3, 3.0, size=dim)  # condition number <= 10
    return q1 @ np.diag(sv) @ q2


def _cmd_geometry(args, config, seed, out, digest):
    rng = np.random.default_rng(seed)
    dim = int(config.get("dim", args.dim))
    trials = int(config.get("trials", args.trials))
    rows = []
    max_rel = 0.0
    all_bounds = True
    for trial in range(trials):
        A = sphere_geometry.JumpMatrix(_random_elliptic_matrix(dim, rng))
        w = rng.standard_normal(dim)
        omega = sphere_geometry.SpherePoint(w / np.linalg.norm(w))
        jac = sphere_geometry.jacobian_det(A, omega)
        fd = sphere_geometry.finite_difference_jacobian_det(A, omega)
        rel = abs(abs(fd) - abs(jac)) / abs(jac)
        lo, hi = (A.c_l / A.c_u) ** dim, (A.c_u / A.c_l) ** dim
        ok = lo - 1e-12 <= abs(jac) <= hi + 1e-12
        max_rel = max(max_rel, rel)
        all_bounds = all_bounds and ok
        rows.append(
            f"{trial},{_fmt(jac)},{_fmt(fd)},{_fmt(rel)},{_fmt(A.c_l)},{_fmt(A.c_u)},{int(ok)}"
        )
    meta = _meta_lines(digest, seed)
    _write_csv(
        os.path.join(out, "results.csv"),
        meta,
        "trial,jac_analytic,jac_fd,rel_err,c_l,c_u,in_bounds",
        rows,
    )
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": "geometry-check",
        "seed": seed,
        "config_digest": digest,
        "dim": dim,
        "trials": trials,
        "max_rel_err": max_rel,
        "all_in_bounds": all_bounds,
        "passed": bool(all_bounds and max_rel < 1e-6),
    }

    n_push = int(config.get("pushforward_samples", args.pushforward_samples))
    if n_push > 0:
        bins = int(config.get("bins", args.bins))
        A = sphere_geometry.JumpMatrix(np.array([[2.0, 0.5], [0.0, 1.0]]))
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n_push)
        z = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        w = z @ A.entries.T
        ang = np.mod(np.arctan2(w[:, 1], w[:, 0]), 2.0 * np.pi)
        counts, edges = np.histogram(ang, bins=bins, range=(0.0, 2.0 * np.pi))
        probs = _bin_probabilities(A, edges)
        chi2 = float(np.sum((counts - n_push * probs) ** 2 / (n_push * probs)))
        threshold = float(stats.chi2.ppf(0.99, bins - 1))
        centers = 0.5 * (edges[:-1] + edges[1:])
        push_rows = [
            f"{_fmt(c)},{int(o)},{_fmt(p)}" for c, o, p in zip(centers, counts, probs)
        ]
        _write_csv(
            os.path.join(out, "sphere.csv"), meta, "theta,count,expected_prob", push_rows
        )
        summary["pushforward_chi2"] = chi2
        summary["pushforward_threshold"] = threshold
        summary["pushforward_samples"] = n_push
        summary["passed"] = bool(summary["passed"] and chi2 < threshold)
    _write_summary(os.path.join(out, "summary.json"), summary)
    return f"geometry-check: max rel err {max_rel:.2e}, bounds ok={all_bounds}"


def _bin_probabilities(A, edges, n_quad: int = 9):
    """Integrate the pushforward angular density over histogram bins."""
    probs = np.empty(len(edges) - 1)
    for i in range(len(edges) - 1):
        t = np.linspace(edges[i], edges[i + 1], n_quad)
        rho = sphere_geometry.pushforward_angular_density(A, t)
        probs[i] = np.trapezoid(rho, t)
    return probs / probs.sum()


def _cmd_coupling(args, config, seed, out, digest):
    from .systems import make_ou

    rng = np.random.default_rng(seed)
    trials = int(config.get("trials", args.trials))
    L0 = float(config.get("L0", args.L0))
    system = make_ou(a=1.0, sigma=1.0)
    system.L0 = L0
    c1 = config.get("c1", args.c1)
    if c1 is None:
        c1 = coupling.paper_c1(c_local=0.5, M=1.0, L0=L0, alpha=system.alpha2, d=1)
    params = coupling.PsiParams(c1=float(c1), c2=20.0 * float(c1), L0=L0)

    checks = []
    # reflection identities over random triples in d in {1, 2, 3, 5}
    worst = 0.0
    dims = (1, 2, 3, 5)
    per_dim = max(trials // len(dims), 1)
    for d in dims:
        y1 = rng.standard_normal((per_dim, d))
        y2 = rng.standard_normal((per_dim, d))
        z = rng.standard_normal((per_dim, d))
        for k in range(per_dim):
            phi_z = coupling.reflection_map(y1[k], y2[k], z[k])
            e = y1[k] - y2[k]
            worst = max(
                worst,
                float(np.max(np.abs(coupling.reflection_map(y1[k], y2[k], phi_z) - z[k]))),
                abs(np.linalg.norm(phi_z) - np.linalg.norm(z[k])),
                abs(float(np.dot(z[k] + phi_z, e))),
            )
    checks.append(("reflection_identities", worst, 1e-12, worst <= 1e-12))

    twoL = 2.0 * params.L0
    dev = max(
        abs(coupling.psi(params, twoL - 1e-15) - coupling.psi(params, twoL)),
        abs(params.c1 * np.exp(-params.c1 * twoL) - params.A * params.c2),
        abs(-params.c1**2 * np.exp(-params.c1 * twoL)
            - (params.A * params.c2**2 + 2 * params.B)),
    )
    checks.append(("psi_junction", float(dev), 1e-12, dev <= 1e-12))

    r_grid = np.linspace(twoL, twoL + 5.0, 10_000)
    gmin = float(np.min(coupling.g_tail(params, r_grid)))
    checks.append(("g_positivity_min", gmin, 0.0, gmin > 0.0))

    margin = np.inf
    for p in (1.0, 2.0):
        cp = coupling.comparison_constant(params, p, r_max=twoL + 5.0)
        grid = np.geomspace(1e-8, twoL + 5.0, 10_000)
        gap = float(np.min(cp * coupling.psi(params, grid) - grid**p))
        margin = min(margin, gap)
    checks.append(("comparison_margin_min", margin, 0.0, margin >= -1e-9))

    a = min(1.0 / params.c1, 0.49)
    ys = np.linspace(-2.0, 2.0, 5)
    beta_min = np.inf
    for y1v in ys:
        for y2v in ys[:4]:
            if y1v == y2v:
                continue
            val = coupling.lyapunov_rhs(system, float(y1v), float(y2v), params, a)
            beta_min = min(beta_min, -val / coupling.psi(params, abs(y1v - y2v)))
    checks.append(("lyapunov_beta_min", float(beta_min), 0.0, beta_min > 0.0))

    meta = _meta_lines(digest, seed)
    checks = [(n, float(v), float(th), bool(ok)) for n, v, th, ok in checks]
    rows = [f"{n},{_fmt(v)},{_fmt(th)},{int(ok)}" for n, v, th, ok in checks]
    _write_csv(os.path.join(out, "results.csv"), meta, "check,value,threshold,passed", rows)
    passed = all(ok for _, _, _, ok in checks)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": "coupling-check",
        "seed": seed,
        "config_digest": digest,
        "c1": float(c1),
        "c2": 20.0 * float(c1),
        "L0": L0,
        "checks": {n: {"value": v, "passed": ok} for n, v, _, ok in checks},
        "passed": bool(passed),
    }
    _write_summary(os.path.join(out, "summary.json"), summary)
    return f"coupling-check: all passed={passed} (beta_min={beta_min:.4f})"


_HANDLERS = {
    "simulate": _cmd_simulate,
    "frozen": _cmd_frozen,
    "ergodic": _cmd_ergodic,
    "corrector": _cmd_corrector,
    "geometry-check": _cmd_geometry,
    "coupling-check": _cmd_coupling,
}


def run(argv) -> int:
    """Parse arguments, dispatch, and return the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        config = _load_config(args)
        if args.command in ("geometry-check", "coupling-check") and "seed" not in config:
            config = dict(config)
            config.setdefault("seed", 0)
        seed = _resolve_seed(args, config)
        out = args.out
        os.makedirs(out, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise ConfigurationError(f"output directory not writable: {out}")
        digest = rates.config_digest(config)
        if args.command.startswith("rates-"):
            line = _cmd_rates(args.command.split("-", 1)[1], args, config, seed, out, digest)
        else:
            line = _HANDLERS[args.command](args, config, seed, out, digest)
    except (_ArgumentError, ConfigurationError, ParameterError, PreconditionError,
            FitError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DivergenceError, NumericError, InsufficientSignalError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    if not args.quiet:
        print(line)
    return 0


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
