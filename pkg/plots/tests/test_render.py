import json

import pytest

from slowfast_plots import FigureJob, SchemaError, read_table, render
from slowfast_plots.cli import run

RATES_CSV = """# config_digest=abc123
# seed=7
epsilon,error,stderr,n_replicas
0.25,0.19101,0.00202,2000
0.125,0.15723,0.00149,2000
0.0625,0.12507,0.00115,2000
0.03125,0.09379,0.00081,2000
"""

SUMMARY = {
    "schema_version": 1,
    "fitted_slope": 0.3898765432,
    "slope_stderr": 0.0166,
    "theoretical_slope": 0.3333333333333333,
    "system_digest": "deadbeef",
    "seed": 7,
}

DECAY_CSV = """# seed=7
t,gap,stderr,used
0.25,0.9,0.01,1
0.5,0.7,0.01,1
1.0,0.42,0.008,1
1.5,0.25,0.007,1
2.0,0.16,0.006,1
"""

DECAY_SUMMARY = {"schema_version": 1, "beta_hat": 0.97123456, "C_hat": 1.15}

SPHERE_CSV = """# seed=7
theta,count,expected_prob
0.5,120,0.011
1.5,260,0.026
2.5,300,0.030
3.5,260,0.026
4.5,120,0.012
5.5,100,0.010
"""


@pytest.fixture
def artifacts(tmp_path):
    (tmp_path / "results.csv").write_text(RATES_CSV)
    (tmp_path / "summary.json").write_text(json.dumps(SUMMARY))
    (tmp_path / "decay.csv").write_text(DECAY_CSV)
    (tmp_path / "decay_summary.json").write_text(json.dumps(DECAY_SUMMARY))
    (tmp_path / "sphere.csv").write_text(SPHERE_CSV)
    return tmp_path


class TestReadTable:
    def test_metadata_and_columns(self, artifacts):
        meta, cols = read_table(artifacts / "results.csv")
        assert meta["seed"] == "7"
        assert set(cols) == {"epsilon", "error", "stderr", "n_replicas"}
        assert cols["epsilon"][0] == 0.25

    def test_empty_csv_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("# seed=1\n")
        with pytest.raises(SchemaError):
            read_table(path)


class TestRatesFigure:
    def test_annotated_slope_matches_summary(self, artifacts):
        job = FigureJob(
            str(artifacts / "results.csv"), "rates", str(artifacts / "fig.png"),
            str(artifacts / "summary.json"),
        )
        result = render(job)
        assert abs(result.annotations["annotated_slope"] - SUMMARY["fitted_slope"]) < 1e-6
        assert (artifacts / "fig.png").exists()

    def test_byte_stable(self, artifacts):
        blobs = []
        for name in ("a.png", "b.png"):
            job = FigureJob(
                str(artifacts / "results.csv"), "rates", str(artifacts / name),
                str(artifacts / "summary.json"),
            )
            render(job)
            blobs.append((artifacts / name).read_bytes())
        assert blobs[0] == blobs[1]

    def test_missing_column_named(self, artifacts):
        bad = artifacts / "bad.csv"
        bad.write_text("epsilon,err\n0.25,0.1\n")
        job = FigureJob(str(bad), "rates", str(artifacts / "x.png"),
                        str(artifacts / "summary.json"))
        with pytest.raises(SchemaError, match="error"):
            render(job)

    def test_summary_required(self, artifacts):
        job = FigureJob(str(artifacts / "results.csv"), "rates", str(artifacts / "x.png"))
        with pytest.raises(SchemaError):
            render(job)

    def test_unsupported_schema_version(self, artifacts):
        (artifacts / "old.json").write_text(json.dumps({"schema_version": 0}))
        job = FigureJob(str(artifacts / "results.csv"), "rates",
                        str(artifacts / "x.png"), str(artifacts / "old.json"))
        with pytest.raises(SchemaError, match="schema_version"):
            render(job)


class TestDecayFigure:
    def test_renders_with_beta_annotation(self, artifacts):
        job = FigureJob(str(artifacts / "decay.csv"), "decay",
                        str(artifacts / "d.png"), str(artifacts / "decay_summary.json"))
        result = render(job)
        assert abs(result.annotations["annotated_beta"] - DECAY_SUMMARY["beta_hat"]) < 1e-6


class TestSphereFigure:
    def test_renders(self, artifacts):
        job = FigureJob(str(artifacts / "sphere.csv"), "sphere", str(artifacts / "s.png"))
        result = render(job)
        assert result.annotations["n_samples"] == 1160.0

    def test_unknown_kind_rejected(self, artifacts):
        with pytest.raises(SchemaError):
            FigureJob(str(artifacts / "sphere.csv"), "pie", "x.png")


class TestCli:
    def test_render_roundtrip(self, artifacts):
        code = run([
            "render", "--kind", "rates", "--in", str(artifacts / "results.csv"),
            "--summary", str(artifacts / "summary.json"),
            "--out", str(artifacts / "cli.png"),
        ])
        assert code == 0 and (artifacts / "cli.png").exists()

    def test_missing_input_fails(self, artifacts):
        code = run([
            "render", "--kind", "rates", "--in", str(artifacts / "nope.csv"),
            "--summary", str(artifacts / "summary.json"),
            "--out", str(artifacts / "cli.png"),
        ])
        assert code == 1

    def test_bad_flag_fails(self):
        assert run(["render", "--what"]) == 1
