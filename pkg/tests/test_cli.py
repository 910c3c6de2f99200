import json
import os

import numpy as np
import pytest

from slowfast.cli import run


def write_config(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def read_meta(path):
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, value = line[1:].strip().split("=", 1)
            meta[key] = value
    return meta


class TestValidation:
    def test_missing_config(self, tmp_path):
        assert run(["simulate", "--out", str(tmp_path)]) == 1

    def test_config_file_not_found(self, tmp_path):
        assert run(["simulate", "--config", str(tmp_path / "nope.json")]) == 1

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert run(["simulate", "--config", str(path)]) == 1

    def test_wrong_schema_version(self, tmp_path):
        cfg = write_config(tmp_path, "c.json", {"schema_version": 99})
        assert run(["simulate", "--config", cfg]) == 1

    def test_unknown_flag(self):
        assert run(["simulate", "--does-not-exist", "x"]) == 1

    def test_unknown_subcommand(self):
        assert run(["frobnicate"]) == 1

    def test_seed_required(self, tmp_path):
        cfg = write_config(
            tmp_path, "c.json",
            {"schema_version": 1, "system": "OU", "x0": 0.0, "y0": 0.0,
             "T": 0.1, "dt": 0.01, "epsilon": 0.5},
        )
        assert run(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 1


class TestSimulateCommands:
    def test_simulate_writes_artifacts(self, tmp_path):
        cfg = write_config(
            tmp_path, "c.json",
            {"schema_version": 1, "seed": 3, "system": "D1", "x0": 0.5,
             "y0": 0.0, "T": 0.1, "dt": 0.005, "epsilon": 0.1},
        )
        out = tmp_path / "out"
        assert run(["simulate", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        meta = read_meta(out / "results.csv")
        assert meta["seed"] == "3" and "config_digest" in meta
        summary = json.loads((out / "summary.json").read_text())
        assert summary["n_steps"] == 20
        header = [
            line for line in (out / "results.csv").read_text().splitlines()
            if not line.startswith("#")
        ][0]
        assert header == "t,x0,y0"

    def test_frozen_writes_artifacts(self, tmp_path):
        cfg = write_config(
            tmp_path, "c.json",
            {"schema_version": 1, "seed": 4, "system": "OU", "x": 0.0,
             "y0": 1.0, "T": 0.1, "dt": 0.005},
        )
        out = tmp_path / "out"
        assert run(["frozen", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        assert (out / "summary.json").exists()

    @pytest.mark.filterwarnings("ignore:overflow encountered")
    def test_divergence_exit_code(self, tmp_path):
        cfg = write_config(
            tmp_path, "c.json",
            {
                "schema_version": 1, "seed": 5,
                "system": {
                    "b": {"terms": [{"coef": 0.0}]},
                    "delta1": {"terms": [{"coef": 1.0}]},
                    "f": {"terms": [{"coef": -1.0, "powers": {"y": 1}}]},
                    "delta2": {"terms": [{"coef": 1e155, "powers": {"y": 2}}]},
                    "alpha1": 1.5, "alpha2": 1.5,
                },
                "x0": 0.0, "y0": 1.0, "T": 1.0, "dt": 0.005, "epsilon": 0.5,
            },
        )
        assert run(["simulate", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 2


class TestErgodicCommand:
    def test_small_run_and_determinism(self, tmp_path):
        cfg = write_config(
            tmp_path, "c.json",
            {
                "schema_version": 1, "seed": 6, "system": "OU", "x": 0.0,
                "observable": "cos", "burn_in": 2.0, "horizon": 8.0,
                "dt": 0.02, "replicas": 64,
                "decay": {"y0": 2.5, "time_grid": [0.25, 0.5, 0.75, 1.0, 1.5, 2.0],
                          "replicas": 1024, "dt": 0.01},
            },
        )
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run(["ergodic", "--config", cfg, "--out", str(out1), "--quiet"]) == 0
        assert run(["ergodic", "--config", cfg, "--out", str(out2), "--quiet"]) == 0
        assert (out1 / "results.csv").read_bytes() == (out2 / "results.csv").read_bytes()
        assert (out1 / "decay.csv").exists()
        summary = json.loads((out1 / "summary.json").read_text())
        # smoke-budget fit; the calibrated window is exercised in acceptance
        assert 0.3 < summary["beta_hat"] < 3.0


class TestRatesCommands:
    def test_strong_small_and_worker_invariance(self, tmp_path):
        cfg = write_config(
            tmp_path, "c.json",
            {
                "schema_version": 1, "seed": 7, "system": "D1", "x0": 0.5,
                "y0": 0.0, "T": 0.3, "p": 1.0,
                "epsilon_grid": [0.25, 0.125, 0.0625, 0.03125],
                "replicas": 200,
            },
        )
        out1, out2 = tmp_path / "w1", tmp_path / "w2"
        assert run(["rates-strong", "--config", cfg, "--out", str(out1),
                    "--workers", "1", "--quiet"]) == 0
        assert run(["rates-strong", "--config", cfg, "--out", str(out2),
                    "--workers", "2", "--quiet"]) == 0
        assert (out1 / "results.csv").read_bytes() == (out2 / "results.csv").read_bytes()
        summary = json.loads((out1 / "summary.json").read_text())
        assert set(summary) >= {"fitted_slope", "slope_stderr", "theoretical_slope",
                                "system_digest", "seed"}

    def test_weak_on_state_dependent_delta1(self, tmp_path):
        cfg = write_config(
            tmp_path, "c.json",
            {
                "schema_version": 1, "seed": 8, "system": "D2", "x0": 0.5,
                "y0": 0.0, "T": 0.2, "phi": "tanh",
                "epsilon_grid": [0.25, 0.125, 0.0625, 0.03125],
                "replicas": 128,
            },
        )
        out = tmp_path / "out"
        assert run(["rates-weak", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["theoretical_slope"] == pytest.approx(1.0)
        assert len(summary["paired_abs_errors"]) == 4

    def test_strong_rejects_d2(self, tmp_path):
        cfg = write_config(
            tmp_path, "c.json",
            {
                "schema_version": 1, "seed": 9, "system": "D2", "x0": 0.5,
                "y0": 0.0, "T": 0.2, "p": 1.0,
                "epsilon_grid": [0.25, 0.125, 0.0625, 0.03125],
                "replicas": 64,
            },
        )
        assert run(["rates-strong", "--config", cfg, "--out", str(tmp_path)]) == 1


class TestCheckCommands:
    def test_geometry_check(self, tmp_path):
        out = tmp_path / "g"
        assert run(["geometry-check", "--dim", "3", "--trials", "50",
                    "--seed", "1", "--out", str(out), "--quiet"]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["passed"] and summary["max_rel_err"] < 1e-6

    def test_geometry_check_with_pushforward(self, tmp_path):
        out = tmp_path / "g2"
        assert run(["geometry-check", "--dim", "2", "--trials", "20", "--seed", "2",
                    "--pushforward-samples", "200000", "--bins", "90",
                    "--out", str(out), "--quiet"]) == 0
        assert (out / "sphere.csv").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["pushforward_chi2"] < summary["pushforward_threshold"]

    def test_coupling_check(self, tmp_path):
        out = tmp_path / "c"
        assert run(["coupling-check", "--trials", "2000", "--seed", "3",
                    "--out", str(out), "--quiet"]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["passed"]
        assert summary["checks"]["lyapunov_beta_min"]["value"] > 0.0
