import numpy as np
import pytest

from slowfast.errors import ConfigurationError, FitError, ParameterError, PreconditionError
from slowfast.rates import (
    RateTable,
    config_digest,
    fit_loglog,
    rate_table_to_csv,
    strong_error_sweep,
    theoretical_strong_order,
    theoretical_weak_order,
    weak_error_sweep,
)
from slowfast.sde_core import SlowFastSystem
from slowfast.systems import make_d1, make_d2

EPS_GRID = [0.25, 0.125, 0.0625, 0.03125]


class TestTheoreticalOrders:
    def test_collapse_for_v_at_least_one(self):
        # for v >= 1 the strong order is 1 - 1/alpha2 (the optimal order)
        for v in np.linspace(1.0, 1.5, 6):
            assert theoretical_strong_order(1.0, v, 1.5, 1.5) == pytest.approx(1.0 - 1.0 / 1.5)

    def test_direct_substitution(self):
        assert theoretical_strong_order(1.0, 1.0, 1.5, 1.5) == pytest.approx(1.0 / 3.0)

    def test_p_cancels(self):
        assert theoretical_strong_order(1.2, 1.0, 1.5, 1.5) == pytest.approx(
            theoretical_strong_order(1.0, 1.0, 1.5, 1.5)
        )

    def test_v_out_of_range(self):
        with pytest.raises(ParameterError):
            theoretical_strong_order(1.0, 0.2, 1.8, 1.3)  # v <= (a1-a2)^+
        with pytest.raises(ParameterError):
            theoretical_weak_order(1.9, 1.8, 1.3)  # v > alpha1

    def test_p_range(self):
        with pytest.raises(ParameterError):
            theoretical_strong_order(1.6, 1.0, 1.5, 1.5)

    def test_weak_order_values(self):
        assert theoretical_weak_order(1.5, 1.5, 1.5) == pytest.approx(1.0)
        assert theoretical_weak_order(1.0, 1.5, 1.5) == pytest.approx(2.0 / 3.0)

    def test_weak_order_vanishes_at_lower_v_boundary(self):
        alpha1, alpha2 = 1.8, 1.3
        lo = alpha1 - alpha2
        vals = [theoretical_weak_order(lo + d, alpha1, alpha2) for d in (0.2, 0.1, 0.02)]
        assert vals[0] > vals[1] > vals[2] > 0.0
        assert vals[2] < 0.02 / alpha2 + 1e-12

    def test_weak_dominates_strong(self):
        for alpha1 in (1.3, 1.5, 1.8):
            for alpha2 in (1.3, 1.5, 1.8):
                lo = max(alpha1 - alpha2, 0.0)
                for v in np.linspace(lo + 0.05, alpha1, 8):
                    assert (
                        theoretical_weak_order(v, alpha1, alpha2)
                        >= theoretical_strong_order(1.0, v, alpha1, alpha2) - 1e-12
                    )


class TestFitLoglog:
    def test_exact_power(self):
        rows = [(e, e**0.5, 0.0) for e in (0.5, 0.25, 0.125, 0.0625)]
        slope, se = fit_loglog(rows)
        assert slope == pytest.approx(0.5, abs=1e-12)
        assert se < 1e-12

    def test_outlier_downweighted(self):
        rows = [(e, e**0.5, 1e-6 * e**0.5) for e in (0.5, 0.25, 0.125, 0.0625)]
        rows.append((0.03125, 10.0 * 0.03125**0.5, 50.0 * 0.03125**0.5))
        slope, _ = fit_loglog(rows)
        assert abs(slope - 0.5) < 0.01

    def test_too_few_rows(self):
        with pytest.raises(FitError):
            fit_loglog([(0.5, 1.0, 0.1), (0.25, 0.5, 0.1)])

    def test_degenerate_design(self):
        with pytest.raises(FitError):
            fit_loglog([(0.5, 1.0, 0.1)] * 3)


class TestStrongSweep:
    def test_y_independent_drift_gives_zero_slope(self):
        # b = b_bar exactly: paths coincide, errors are clamped zeros
        def b(t, x, y):
            return -x

        def b_bar(t, x):
            return -x

        system = SlowFastSystem(
            b=b, delta1=lambda t, x, y: 1.0, f=lambda x, y: -y,
            delta2=lambda x, y: 1.0, alpha1=1.5, alpha2=1.5, b_bar=b_bar,
        )
        table = strong_error_sweep(
            system, 0.5, 0.0, 0.5, 1.0, EPS_GRID, replicas=32, rng=0, dt_bias_check=False
        )
        assert all(r[1] <= 1e-250 for r in table.rows)
        assert table.fitted_slope == pytest.approx(0.0, abs=1e-9)

    def test_state_dependent_delta1_rejected(self):
        with pytest.raises(ConfigurationError, match="Lipschitz condition"):
            strong_error_sweep(make_d2(), 0.5, 0.0, 1.0, 1.0, EPS_GRID, replicas=32, rng=0)

    def test_short_grid_rejected(self):
        with pytest.raises(PreconditionError):
            strong_error_sweep(make_d1(), 0.5, 0.0, 1.0, 1.0, [0.25, 0.125], replicas=32, rng=0)

    def test_monotone_errors_and_reproducible(self):
        table = strong_error_sweep(
            make_d1(), 0.5, 0.0, 0.5, 1.0, EPS_GRID, replicas=512, rng=77, dt_bias_check=False
        )
        errs = [r[1] for r in table.rows]
        assert all(a > b for a, b in zip(errs, errs[1:]))  # Spearman = 1
        again = strong_error_sweep(
            make_d1(), 0.5, 0.0, 0.5, 1.0, EPS_GRID, replicas=512, rng=77, dt_bias_check=False
        )
        assert table.rows == again.rows
        assert table.fitted_slope == again.fitted_slope

    def test_workers_do_not_change_results(self):
        kw = dict(replicas=300, rng=5, dt_bias_check=False)
        a = strong_error_sweep(make_d1(), 0.5, 0.0, 0.3, 1.0, EPS_GRID, **kw)
        b = strong_error_sweep(make_d1(), 0.5, 0.0, 0.3, 1.0, EPS_GRID, workers=2, **kw)
        assert a.rows == b.rows


class TestWeakSweep:
    def test_constant_phi_gives_zero_error(self):
        table = weak_error_sweep(
            make_d2(), lambda x: np.full(x.shape[0], 0.7), 0.5, 0.0, 0.3,
            EPS_GRID, replicas=32, rng=0,
        )
        assert all(r[1] <= 1e-250 for r in table.rows)

    def test_paired_abs_errors_recorded(self):
        table = weak_error_sweep(
            make_d2(), np.tanh, 0.5, 0.0, 0.3, EPS_GRID, replicas=128, rng=1
        )
        assert len(table.extra["abs_errors"]) == len(table.rows)
        for (_, err, _), ab in zip(table.rows, table.extra["abs_errors"]):
            assert err <= ab + 1e-12  # |E diff| <= E|diff|

    def test_weak_slope_dominates_strong_slope_on_d1(self):
        # |E phi(X) - E phi(X_bar)| <= Lip(phi) E|X - X_bar| makes the weak
        # error decay at least as fast; empirically the fitted slopes obey
        # weak >= strong - 0.1
        grid = [0.25, 0.125, 0.0625, 0.03125]
        strong = strong_error_sweep(
            make_d1(), 0.5, 3.0, 1.0, 1.0, grid, replicas=1024, rng=9,
            dt_bias_check=False,
        )
        weak = weak_error_sweep(
            make_d1(), np.tanh, 0.5, 3.0, 1.0, grid,
            dt_rule=lambda e: e * e / 5.0, replicas=4096, rng=9,
        )
        assert weak.fitted_slope >= strong.fitted_slope - 0.1


class TestRateTable:
    def test_invariants(self):
        with pytest.raises(ParameterError):
            RateTable([(0.1, 1.0, 0.0), (0.2, 1.0, 0.0), (0.3, 1.0, 0.0)], 0.0, 0.0, 0.0)
        with pytest.raises(ParameterError):
            RateTable([(0.2, 1.0, 0.0), (0.1, -1.0, 0.0), (0.05, 1.0, 0.0)], 0.0, 0.0, 0.0)

    def test_csv_round_trip(self, tmp_path):
        table = RateTable(
            [(0.25, 0.1, 0.01), (0.125, 0.07, 0.008), (0.0625, 0.05, 0.006)],
            0.5, 0.05, 1.0 / 3.0, n_replicas=64,
        )
        path = tmp_path / "results.csv"
        rate_table_to_csv(table, path, meta={"seed": 3})
        lines = path.read_text().splitlines()
        assert lines[0] == "# seed=3"
        assert lines[1] == "epsilon,error,stderr,n_replicas"
        eps, err, se, n = lines[2].split(",")
        assert float(eps) == 0.25 and float(err) == 0.1 and int(n) == 64

    def test_config_digest_stable(self):
        a = config_digest({"b": 1, "a": [1.0, 2.0]})
        b = config_digest({"a": [1.0, 2.0], "b": 1})
        assert a == b and len(a) == 16
