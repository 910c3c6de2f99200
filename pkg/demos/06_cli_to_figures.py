"""End-to-end pipeline: CLI experiments to publication figures.

The experiment runner writes results.csv + summary.json (plus decay.csv for
ergodic runs); the separate plotting tool consumes only those files.  This
script drives both through their command-line entry points.
"""

import pathlib
import subprocess
import sys
import tempfile
import textwrap

workdir = pathlib.Path(tempfile.mkdtemp(prefix="slowfast-demo-"))
print(f"working in {workdir}")

rates_cfg = workdir / "rates.json"
rates_cfg.write_text(textwrap.dedent("""\
    {"schema_version": 1, "seed": 42, "system": "D1",
     "x0": 0.5, "y0": 0.0, "T": 0.5, "p": 1.0,
     "epsilon_grid": [0.25, 0.125, 0.0625, 0.03125, 0.015625],
     "replicas": 400}
"""))
ergodic_cfg = workdir / "ergodic.json"
ergodic_cfg.write_text(textwrap.dedent("""\
    {"schema_version": 1, "seed": 42, "system": "OU", "x": 0.0,
     "observable": "cos", "burn_in": 5.0, "horizon": 30.0, "dt": 0.01,
     "replicas": 200,
     "decay": {"observable": "tanh", "y0": 3.0, "replicas": 4096, "dt": 0.005,
               "time_grid": [1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 3.0]}}
"""))

steps = [
    ["slowfast", "rates-strong", "--config", str(rates_cfg), "--out", str(workdir / "rates")],
    ["slowfast", "ergodic", "--config", str(ergodic_cfg), "--out", str(workdir / "ergodic")],
    ["plots", "render", "--kind", "rates",
     "--in", str(workdir / "rates" / "results.csv"),
     "--summary", str(workdir / "rates" / "summary.json"),
     "--out", str(workdir / "rates.png")],
    ["plots", "render", "--kind", "decay",
     "--in", str(workdir / "ergodic" / "decay.csv"),
     "--summary", str(workdir / "ergodic" / "summary.json"),
     "--out", str(workdir / "decay.png")],
]
for cmd in steps:
    print("$", " ".join(cmd))
    if subprocess.run(cmd).returncode != 0:
        sys.exit(1)
print(f"\nfigures written under {workdir}")
