"""Figure rendering from experiment CSV/JSON artifacts.

Figures are pure views of the primary outputs: every statistic shown
(fitted slopes, decay rates) is read from summary.json, never recomputed,
and renders are byte-stable functions of their input files.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

SUPPORTED_SCHEMA = 1
KINDS = ("rates", "decay", "sphere")


class SchemaError(ValueError):
    """Input file does not match the expected column/field schema."""


@dataclass(frozen=True)
class FigureJob:
    """One figure to render."""

    csv_path: str
    kind: str
    out_path: str
    summary_path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")


@dataclass(frozen=True)
class RenderResult:
    out_path: str
    annotations: dict = field(default_factory=dict)


def read_table(path):
    """Parse a '#'-metadata CSV into (meta dict, column dict of float arrays)."""
    meta = {}
    header = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                continue
            rows.append([float(v) for v in line.split(",")])
    if header is None or not rows:
        raise SchemaError(f"{path}: no data rows found")
    data = np.asarray(rows, dtype=float)
    return meta, {name: data[:, j] for j, name in enumerate(header)}


def _require(columns, names, path):
    for name in names:
        if name not in columns:
            raise SchemaError(f"{path}: missing column {name!r}")


def _load_summary(path):
    if path is None:
        raise SchemaError("this figure kind requires --summary")
    with open(path, "r", encoding="utf-8") as fh:
        summary = json.load(fh)
    version = summary.get("schema_version")
    if version != SUPPORTED_SCHEMA:
        raise SchemaError(f"{path}: unsupported schema_version {version!r}")
    return summary


def _save(fig, out_path):
    os.makedirs(os.path.dirname(os.path.abspath(out_path)), exist_ok=True)
    # suppress the writer's Software tag so identical inputs give identical bytes
    fig.savefig(out_path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def _render_rates(job: FigureJob) -> RenderResult:
    _, cols = read_table(job.csv_path)
    _require(cols, ("epsilon", "error", "stderr"), job.csv_path)
    summary = _load_summary(job.summary_path)
    for key in ("fitted_slope", "theoretical_slope"):
        if key not in summary:
            raise SchemaError(f"{job.summary_path}: missing field {key!r}")
    eps, err, se = cols["epsilon"], cols["error"], cols["stderr"]
    fitted = float(summary["fitted_slope"])
    theo = float(summary["theoretical_slope"])

    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    ax.errorbar(eps, err, yerr=se, fmt="o", ms=4, capsize=3, color="#1f4e79",
                label="measured error")
    # anchor both reference lines at the geometric centre of the data
    x_ref = np.array([eps.min(), eps.max()])
    anchor_x = np.exp(np.mean(np.log(eps)))
    anchor_y = np.exp(np.mean(np.log(err)))
    ax.plot(x_ref, anchor_y * (x_ref / anchor_x) ** fitted, "-", color="#c0504d",
            label=f"fitted slope {fitted:.3f}")
    ax.plot(x_ref, anchor_y * (x_ref / anchor_x) ** theo, "--", color="#4f6228",
            label=f"reference slope {theo:.3f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(r"$\varepsilon$")
    ax.set_ylabel("error")
    annotation = f"fitted slope = {fitted:.8f}"
    ax.set_title(annotation, fontsize=10)
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, job.out_path)
    return RenderResult(job.out_path, {"annotated_slope": float(f"{fitted:.8f}")})


def _render_decay(job: FigureJob) -> RenderResult:
    _, cols = read_table(job.csv_path)
    _require(cols, ("t", "gap", "stderr"), job.csv_path)
    summary = _load_summary(job.summary_path)
    if "beta_hat" not in summary:
        raise SchemaError(f"{job.summary_path}: missing field 'beta_hat'")
    t, gap, se = cols["t"], cols["gap"], cols["stderr"]
    beta = float(summary["beta_hat"])
    c_hat = float(summary.get("C_hat", gap[0] * np.exp(beta * t[0])))

    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    ax.errorbar(t, gap, yerr=se, fmt="o", ms=4, capsize=3, color="#1f4e79",
                label=r"$|P_t g - \bar g|$")
    tt = np.linspace(t.min(), t.max(), 200)
    ax.plot(tt, c_hat * np.exp(-beta * tt), "-", color="#c0504d",
            label=f"fit $C e^{{-\\beta t}}$, $\\beta$ = {beta:.3f}")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("gap to invariant average")
    annotation = f"beta = {beta:.8f}"
    ax.set_title(annotation, fontsize=10)
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, job.out_path)
    return RenderResult(job.out_path, {"annotated_beta": float(f"{beta:.8f}")})


def _render_sphere(job: FigureJob) -> RenderResult:
    _, cols = read_table(job.csv_path)
    _require(cols, ("theta", "count", "expected_prob"), job.csv_path)
    theta, counts, probs = cols["theta"], cols["count"], cols["expected_prob"]
    n = counts.sum()
    width = theta[1] - theta[0] if len(theta) > 1 else 2.0 * np.pi

    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    ax.step(theta, counts / (n * width), where="mid", color="#1f4e79", lw=0.8,
            label="empirical angular density")
    ax.plot(theta, probs / width, "-", color="#c0504d", lw=1.2,
            label="pushforward density")
    ax.set_xlabel(r"$\theta$")
    ax.set_ylabel("density")
    ax.set_title("image of the uniform sphere law under the jump matrix", fontsize=10)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    _save(fig, job.out_path)
    return RenderResult(job.out_path, {"n_samples": float(n)})


def render(job: FigureJob) -> RenderResult:
    """Render one figure; returns the output path and its annotations."""
    if job.kind == "rates":
        return _render_rates(job)
    if job.kind == "decay":
        return _render_decay(job)
    return _render_sphere(job)
