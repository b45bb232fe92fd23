"""Figure rendering for report directories.

Every report-producing command drops PNG figures next to its CSV tables unless
asked not to.  All rendering uses the Agg backend, so it works headless.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_growth_profile(rows, path) -> None:
    """Resistance-from-root growth curves, one line per instance."""
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = list(dict.fromkeys(r["label"] for r in rows))
    for label in labels:
        rs = [r["r"] for r in rows if r["label"] == label]
        vs = [r["value"] for r in rows if r["label"] == label]
        ax.plot(rs, vs, marker="o", label=label)
    ax.set_xscale("log")
    ax.set_xlabel("radius r")
    ax.set_ylabel("R(root, complement of r-ball)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_cauchy_gaps(rows, path) -> None:
    """Moment-functional Cauchy gaps along the sequence, with 3-sigma noise."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for kind, marker in (("consecutive", "o"), ("to_largest", "s")):
        sel = [r for r in rows if r["kind"] == kind]
        if not sel:
            continue
        xs = [r["from_n"] for r in sel]
        ax.errorbar(xs, [r["gap"] for r in sel],
                    yerr=[r["noise3"] for r in sel],
                    marker=marker, label=kind, capsize=3)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("instance size n")
    ax.set_ylabel("max moment gap")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_ghp_rows(rows, path) -> None:
    """GHP surrogate distance to the largest instance, per restriction radius."""
    fig, ax = plt.subplots(figsize=(6, 4))
    radii = sorted({r["r"] for r in rows})
    for rad in radii:
        sel = [r for r in rows if r["r"] == rad]
        ax.plot([r["n"] for r in sel], [r["surrogate_to_largest"] for r in sel],
                marker="o", label=f"r={rad:g}")
    ax.set_xscale("log")
    ax.set_xlabel("instance size n")
    ax.set_ylabel("GHP surrogate to largest")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_fusing(rows, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [r["n"] for r in rows]
    ax.plot(xs, [r["ghp_before"] for r in rows], marker="o", label="before fusing")
    ax.plot(xs, [r["ghp_after"] for r in rows], marker="s", label="after fusing")
    ax.set_xscale("log")
    ax.set_xlabel("instance size n")
    ax.set_ylabel("GHP surrogate to largest")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_report_figures(report, out_dir) -> None:
    out = Path(out_dir)
    if report.growth_rows:
        plot_growth_profile(report.growth_rows, out / "growth.png")
    if report.cauchy_rows:
        plot_cauchy_gaps(report.cauchy_rows, out / "cauchy.png")
    if report.ghp_rows:
        plot_ghp_rows(report.ghp_rows, out / "ghp.png")
    if report.fusing_rows:
        plot_fusing(report.fusing_rows, out / "fusing.png")
