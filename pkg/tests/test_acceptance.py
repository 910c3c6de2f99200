"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the per-criterion
report.  Budgets and tolerances are fixed here; the whole suite targets a
laptop-scale runtime (about ten minutes, dominated by the two rate sweeps).
"""

import json

import numpy as np
import pytest
from scipy import integrate, stats

from slowfast.cli import run as cli_run
from slowfast.coupling import (
    PsiParams,
    comparison_constant,
    g_tail,
    lyapunov_rhs,
    paper_c1,
    psi,
    psi_d1,
    psi_d2,
    reflection_map,
)
from slowfast.ergodics import (
    corrector_eval,
    ergodic_decay_rate,
    invariant_average,
    wasserstein_contraction,
)
from slowfast.rates import strong_error_sweep, weak_error_sweep
from slowfast.sphere_geometry import (
    JumpMatrix,
    SpherePoint,
    finite_difference_jacobian_det,
    jacobian_det,
    pushforward_angular_density,
)
from slowfast.stable_noise import StableSpec, sample_isotropic_stable, sample_stable_1d
from slowfast.systems import make_cubic, make_d1, make_d2, make_ou, ou_cos_average

SEED = 20240809


def report(number, name, passed, detail):
    flag = "PASS" if passed else "FAIL"
    print(f"[{flag}] criterion {number}: {name} ({detail})")
    assert passed, f"criterion {number} failed: {detail}"


def cos_obs(y):
    return np.cos(y[:, 0])


def tanh_obs(y):
    return np.tanh(y[:, 0])


def test_criterion_01_sphere_geometry_exactness():
    rng = np.random.default_rng(SEED)
    worst_rel = 0.0
    bounds_ok = 0
    trials = 200
    for trial in range(trials):
        dim = 2 if trial % 2 == 0 else 3
        q1, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        q2, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        sv = rng.uniform(0.3, 3.0, size=dim)  # condition number <= 10
        a = JumpMatrix(q1 @ np.diag(sv) @ q2)
        w = rng.standard_normal(dim)
        om = SpherePoint(w / np.linalg.norm(w))
        jac = jacobian_det(a, om)
        fd = finite_difference_jacobian_det(a, om)
        worst_rel = max(worst_rel, abs(abs(fd) - abs(jac)) / abs(jac))
        lo, hi = (a.c_l / a.c_u) ** dim, (a.c_u / a.c_l) ** dim
        bounds_ok += int(lo - 1e-12 <= abs(jac) <= hi + 1e-12)
    report(
        1,
        "sphere geometry exactness",
        worst_rel < 1e-6 and bounds_ok == trials,
        f"max rel err {worst_rel:.2e}; bounds hold in {bounds_ok}/{trials}",
    )


def test_criterion_02_pushforward_density():
    rng = np.random.default_rng(SEED + 1)
    a = JumpMatrix(np.array([[2.0, 0.5], [0.0, 1.0]]))
    n, bins = 10_000_000, 360
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    z = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    w = z @ a.entries.T
    ang = np.mod(np.arctan2(w[:, 1], w[:, 0]), 2.0 * np.pi)
    counts, edges = np.histogram(ang, bins=bins, range=(0.0, 2.0 * np.pi))
    probs = np.empty(bins)
    for i in range(bins):
        t = np.linspace(edges[i], edges[i + 1], 9)
        probs[i] = np.trapezoid(pushforward_angular_density(a, t), t)
    probs /= probs.sum()
    chi2 = float(np.sum((counts - n * probs) ** 2 / (n * probs)))
    threshold = float(stats.chi2.ppf(0.99, bins - 1))
    report(
        2,
        "pushforward angular density",
        chi2 < threshold,
        f"chi2 {chi2:.1f} < {threshold:.1f} at 10^7 samples, 360 bins",
    )


def test_criterion_03_stable_samplers():
    rng = np.random.default_rng(SEED + 2)
    grid = [
        (1.2, 0.5, 1), (1.2, 1.0, 1), (1.2, 2.0, 1),
        (1.5, 0.5, 1), (1.5, 1.0, 1), (1.5, 2.0, 1),
        (1.8, 0.5, 1), (1.8, 1.0, 1), (1.8, 2.0, 1),
        (1.5, 1.0, 2), (1.5, 1.0, 3), (1.8, 1.0, 2),
    ]
    worst_z = 0.0
    for alpha, xi_mag, dim in grid:
        x = sample_isotropic_stable(StableSpec(alpha, dim), 1.0, rng, size=1_000_000)
        xi = np.zeros(dim)
        xi[0] = xi_mag
        c = np.cos(x @ xi)
        z = abs(c.mean() - np.exp(-xi_mag**alpha)) / (c.std(ddof=1) / 1000.0)
        worst_z = max(worst_z, z)
    gauss = sample_stable_1d(StableSpec(2.0), 1.0, rng, size=1_000_000)
    p_ks = stats.kstest(gauss / np.sqrt(2.0), "norm").pvalue
    report(
        3,
        "stable samplers",
        worst_z < 3.0 and p_ks > 0.01,
        f"worst char-function z {worst_z:.2f} over 12 grid points; "
        f"alpha=2 normality p {p_ks:.3f}",
    )


def test_criterion_04_frozen_ergodicity_oracle():
    ou = make_ou(a=1.0, sigma=1.0, alpha2=1.5)
    est = invariant_average(
        ou, 0.0, cos_obs, burn_in=10.0, horizon=50.0, dt=0.01, replicas=200, rng=SEED + 5
    )
    target = ou_cos_average()
    gap = abs(est.value - target)
    inv_ok = gap < 3.0 * est.stderr

    gbar = invariant_average(
        ou, 0.0, tanh_obs, burn_in=10.0, horizon=50.0, dt=0.005, replicas=2048,
        rng=SEED + 4,
    )
    beta, _, r2 = ergodic_decay_rate(
        ou, 0.0, tanh_obs, 3.0, np.linspace(1.0, 3.0, 8), 20_000, SEED + 5,
        dt=0.005, gbar=(gbar.value, gbar.stderr),
    )
    decay_ok = 0.8 <= beta <= 1.2
    report(
        4,
        "frozen-equation ergodicity oracle",
        inv_ok and decay_ok,
        f"invariant avg {est.value:.5f} vs {target:.5f} (|gap| {gap:.4f} < 3se "
        f"{3 * est.stderr:.4f}); decay beta {beta:.3f} in [0.8, 1.2], r2 {r2:.3f}",
    )


def test_criterion_05_coupling_suite():
    rng = np.random.default_rng(SEED + 6)
    # reflection identities, 10^4 triples over d in {1, 2, 3, 5}
    worst = 0.0
    for dim in (1, 2, 3, 5):
        for _ in range(2500):
            y1 = rng.standard_normal(dim)
            y2 = rng.standard_normal(dim)
            z = rng.standard_normal(dim)
            phi_z = reflection_map(y1, y2, z)
            e = y1 - y2
            worst = max(
                worst,
                float(np.max(np.abs(reflection_map(y1, y2, phi_z) - z))),
                abs(np.linalg.norm(phi_z) - np.linalg.norm(z)),
                abs(float(np.dot(z + phi_z, e))) / max(np.linalg.norm(e), 1e-12),
            )
    refl_ok = worst < 1e-12

    L0 = 1.0
    system = make_ou(a=1.0, sigma=1.0)
    system.L0 = L0
    c1 = paper_c1(c_local=0.5, M=1.0, L0=L0, alpha=system.alpha2, d=1)
    params = PsiParams(c1=c1, c2=20.0 * c1, L0=L0)
    twoL = 2.0 * L0
    junction_dev = max(
        abs(psi(params, twoL) - (1.0 - np.exp(-2.0 * c1 * L0))),
        abs(params.c1 * np.exp(-params.c1 * twoL) - params.A * params.c2),
        abs(-params.c1**2 * np.exp(-params.c1 * twoL)
            - (params.A * params.c2**2 + 2.0 * params.B)),
        abs(psi_d1(params, twoL - 1e-13) - psi_d1(params, twoL + 1e-13)),
        abs(psi_d2(params, twoL - 1e-13) - psi_d2(params, twoL + 1e-13)),
    )
    junction_ok = junction_dev < 1e-12

    tail_grid = np.linspace(twoL, twoL + 5.0, 10_000)
    g_ok = bool(np.min(g_tail(params, tail_grid)) > 0.0)

    comp_ok = True
    for p_exp in (1.0, 2.0):
        c_p = comparison_constant(params, p_exp, r_max=twoL + 5.0, n_grid=10_000)
        grid = np.geomspace(1e-8, twoL + 5.0, 10_000)
        comp_ok = comp_ok and bool(np.all(c_p * psi(params, grid) - grid**p_exp >= -1e-9))

    a_refl = min(1.0 / c1, 0.49)
    beta_min = np.inf
    pairs = 0
    for y1 in np.linspace(-2.0, 2.0, 5):
        for y2 in np.linspace(-1.5, 1.7, 4):
            if y1 == y2:
                continue
            val = lyapunov_rhs(system, float(y1), float(y2), params, a_refl)
            beta_min = min(beta_min, -val / psi(params, abs(y1 - y2)))
            pairs += 1
    lyap_ok = beta_min > 0.0 and pairs == 20
    report(
        5,
        "coupling suite",
        refl_ok and junction_ok and g_ok and comp_ok and lyap_ok,
        f"reflection dev {worst:.1e}; junction dev {junction_dev:.1e}; "
        f"g>0 {g_ok}; comparison {comp_ok}; lyapunov beta_min {beta_min:.2e} "
        f"on {pairs} pairs",
    )


def test_criterion_06_strong_order():
    table = strong_error_sweep(
        make_d1(),
        x0=0.5,
        y0=0.0,
        T=1.0,
        p=1.0,
        epsilon_grid=[2.0 ** (-k) for k in range(2, 8)],
        replicas=2000,
        rng=SEED,
        workers=2,
    )
    target = 1.0 - 1.0 / 1.5
    gap = abs(table.fitted_slope - target)
    bias_ok = table.dt_bias_gap < table.extra["dt_bias_threshold"]
    report(
        6,
        "strong order",
        gap <= 0.15 and table.theoretical_slope == pytest.approx(target) and bias_ok,
        f"fitted slope {table.fitted_slope:.4f} +/- {table.slope_stderr:.4f} vs 1/3 "
        f"(|gap| {gap:.3f} <= 0.15); dt-halving gap {table.dt_bias_gap:.1e} < "
        f"noise bound {table.extra['dt_bias_threshold']:.1e}",
    )


def test_criterion_07_weak_order():
    table = weak_error_sweep(
        make_d2(),
        np.tanh,
        x0=0.5,
        y0=3.0,
        T=1.0,
        epsilon_grid=[2.0 ** (-k) for k in range(2, 8)],
        dt_rule=lambda e: e * e / 5.0,  # keeps every discretisation bias O(eps)
        replicas=16384,
        rng=SEED,
        workers=2,
    )
    gap = abs(table.fitted_slope - 1.0)
    dominated = all(
        err <= ab + 3.0 * se
        for (_, err, se), ab in zip(table.rows, table.extra["abs_errors"])
    )
    report(
        7,
        "weak order",
        gap <= 0.2 and dominated and table.theoretical_slope == pytest.approx(1.0),
        f"fitted slope {table.fitted_slope:.4f} +/- {table.slope_stderr:.4f} vs 1 "
        f"(|gap| {gap:.3f} <= 0.2); weak <= paired strong proxy at every eps: {dominated}",
    )


def test_criterion_08_corrector_oracle():
    def cond_cos(y, s):
        return np.cos(y * np.exp(-s)) * np.exp(-(1.0 - np.exp(-1.5 * s)) / 1.5)

    gbar_exact = ou_cos_average()
    oracle, quad_err = integrate.quad(
        lambda s: cond_cos(0.0, s) - gbar_exact, 0.0, 60.0, limit=200
    )
    assert quad_err < 1e-8

    ou = make_ou()
    val = corrector_eval(
        ou, 0.0, 0.0, cos_obs, T_max=10.0, dt=0.005, replicas=4096, rng=20240833,
        decay_fit=(1.0, 1.0),
    )
    match_ok = abs(val.value - oracle) < 3.0 * val.stderr

    def oracle_u(y):
        v, _ = integrate.quad(lambda s: cond_cos(y, s) - gbar_exact, 0.0, 60.0, limit=200)
        return v

    ys = np.linspace(-3.0, 3.0, 25)
    h = 1e-4
    grads = [(oracle_u(y + h) - oracle_u(y - h)) / (2.0 * h) for y in ys]
    grad_ok = np.max(np.abs(grads)) < 1.5
    report(
        8,
        "corrector oracle",
        match_ok and grad_ok,
        f"u(0) {val.value:.4f} vs quadrature {oracle:.4f} "
        f"(|gap| {abs(val.value - oracle):.4f} < 3se {3 * val.stderr:.4f}); "
        f"max |du/dy| {np.max(np.abs(grads)):.3f} bounded on [-3, 3]",
    )


def test_criterion_09_wasserstein_contraction():
    # linear drift: synchronous coupling cancels the noise exactly
    dt = 1e-4
    grid = np.linspace(0.5, 2.0, 8)
    beta_lin, c_lin = wasserstein_contraction(
        make_ou(a=1.0), 0.0, 1.0, -1.0, 1.0, grid, 64, SEED + 8, dt=dt
    )
    euler_rate = -np.log(1.0 - dt) / dt
    linear_ok = abs(beta_lin - euler_rate) < 1e-6 and abs(c_lin - 2.0) < 1e-6
    exact_ok = abs(beta_lin - 1.0) < 1e-3  # e^{-at}|y1-y2| up to O(dt)

    beta_cubic, _ = wasserstein_contraction(
        make_cubic(), 0.0, 1.0, -1.0, 1.0, np.linspace(0.2, 1.2, 6), 2048, SEED + 9,
        dt=0.002,
    )
    cubic_ok = beta_cubic >= 0.9
    report(
        9,
        "Wasserstein contraction",
        linear_ok and exact_ok and cubic_ok,
        f"linear beta {beta_lin:.6f} (= exact Euler rate, within 1e-3 of a=1), "
        f"C {c_lin:.6f}; cubic beta {beta_cubic:.3f} >= 0.9",
    )


def _write(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


def test_criterion_10_determinism(tmp_path):
    # criterion 4 through the CLI, twice
    ergodic_cfg = _write(
        tmp_path / "c4.json",
        {
            "schema_version": 1,
            "seed": SEED + 5,
            "system": "OU",
            "x": 0.0,
            "observable": "cos",
            "burn_in": 10.0,
            "horizon": 50.0,
            "dt": 0.01,
            "replicas": 200,
            "decay": {
                "observable": "tanh",
                "y0": 3.0,
                "time_grid": np.linspace(1.0, 3.0, 8).tolist(),
                "replicas": 20000,
                "dt": 0.005,
            },
        },
    )
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / f"c4_{tag}"
        assert cli_run(["ergodic", "--config", ergodic_cfg, "--out", str(out), "--quiet"]) == 0
        outs.append((out / "results.csv").read_bytes())
    ergodic_same = outs[0] == outs[1]

    # criterion 6 through the CLI, twice, with different worker counts
    rates_cfg = _write(
        tmp_path / "c6.json",
        {
            "schema_version": 1,
            "seed": SEED,
            "system": "D1",
            "x0": 0.5,
            "y0": 0.0,
            "T": 1.0,
            "p": 1.0,
            "epsilon_grid": [2.0 ** (-k) for k in range(2, 8)],
            "replicas": 2000,
        },
    )
    outs = []
    for tag, workers in (("a", "1"), ("b", "2")):
        out = tmp_path / f"c6_{tag}"
        assert (
            cli_run(
                ["rates-strong", "--config", rates_cfg, "--out", str(out),
                 "--workers", workers, "--quiet"]
            )
            == 0
        )
        outs.append((out / "results.csv").read_bytes())
    rates_same = outs[0] == outs[1]
    report(
        10,
        "determinism",
        ergodic_same and rates_same,
        f"criterion-4 CSVs byte-identical: {ergodic_same}; "
        f"criterion-6 CSVs byte-identical across worker counts: {rates_same}",
    )
