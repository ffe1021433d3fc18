"""Figures for a finished run. matplotlib is only imported here."""

from __future__ import annotations

from pathlib import Path

import numpy as np

PARAMS = {
    "font.family": "serif",
    "mathtext.fontset": "stix",
    "font.size": 9,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "figure.dpi": 150,
}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update(PARAMS)
    return plt


def render_run_figures(out: Path, records, residual, ceiling, report) -> list[Path]:
    plt = _pyplot()
    t = np.array([r.t for r in records])
    kinetic = np.array([r.kinetic for r in records])
    files = []

    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.plot(t, kinetic, label=r"$\|u\|_{L^2}^2$")
    ax.plot(t, [r.dissipation for r in records], label=r"$\|u\|_{\dot H^{\alpha/2}}^2$")
    ax.plot(t, [r.injection for r in records], label=r"$\langle f,u\rangle$")
    ax.plot(t, ceiling, "k--", label="Gronwall ceiling")
    # the ceiling sits orders of magnitude above the flow; zeros at t = 0 are masked
    ax.set_yscale("log", nonpositive="mask")
    ax.set_xlabel("$t$")
    ax.legend(frameon=False)
    fig.tight_layout()
    files.append(out / "energy_budget.png")
    fig.savefig(files[-1])
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.plot(t, residual)
    ax.axhline(0.0, color="k", lw=0.6)
    ax.set_xlabel("$t$")
    ax.set_ylabel("energy residual $R(t)$")
    fig.tight_layout()
    files.append(out / "energy_residual.png")
    fig.savefig(files[-1])
    plt.close(fig)

    entries = report.entries
    if entries:
        # relative margin (rhs - lhs) / max(|lhs|, |rhs|) keeps mixed scales readable
        rel = [e.margin / max(abs(e.lhs), abs(e.rhs), 1e-300) for e in entries]
        fig, ax = plt.subplots(figsize=(5.5, 0.28 * len(entries) + 1.0))
        colors = ["tab:green" if e.satisfied else "tab:red" for e in entries]
        ax.barh(range(len(entries)), rel, color=colors)
        ax.set_yticks(range(len(entries)), [e.name for e in entries], fontsize=7)
        ax.axvline(0.0, color="k", lw=0.6)
        ax.set_xlabel("relative margin")
        ax.invert_yaxis()
        fig.tight_layout()
        files.append(out / "bound_margins.png")
        fig.savefig(files[-1])
        plt.close(fig)
    return files
