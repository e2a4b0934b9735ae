"""SVG figure emission for the batch experiments.

Figures plot exactly the rows written to the sibling CSV files (no hidden
smoothing); output is deterministic for a fixed seed (hash salt pinned, no
embedded timestamps).
"""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .csvio import read_csv  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "rotorecho"
_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def _new_axes(xlabel: str, ylabel: str):
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    return fig, ax


def _finish(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return Path(path)


def plot_series(path, config, curves) -> Path:
    fig, ax = _new_axes("time (kicks)", "F(t)")
    base = Path(path).parent
    for c in curves:
        _, rows = read_csv(base / c["csv"])
        ax.semilogy([r[0] for r in rows], [r[3] for r in rows], lw=0.7,
                    label=f"hbar_eff={c['hbar']:.4g}")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(f"decoherence function, K={config.K}, eps={config.epsilon_nm}")
    return _finish(fig, path)


def plot_scan(path, param_name, rows, fit_mean=None, fit_std=None) -> Path:
    fig, ax = _new_axes(param_name, "long-time echo statistics")
    x = [r[0] for r in rows]
    ax.loglog(x, [r[1] for r in rows], "o", color="tab:red", label="mean F")
    ax.loglog(x, [r[2] for r in rows], "s", color="tab:blue", mfc="none", label="std F")
    for fit, color, label in ((fit_mean, "tab:red", "mean fit"),
                              (fit_std, "tab:blue", "std fit")):
        if fit is not None:
            ax.loglog(x, [10 ** (fit.intercept + fit.slope * math.log10(v)) for v in x],
                      "-", color=color, lw=1,
                      label=f"{label}: slope {fit.slope:.2f}+-{fit.slope_stderr:.2f}")
    ax.legend(loc="best", fontsize=8)
    return _finish(fig, path)


def plot_equilibrate(path, scan_rows, fit, summaries, out_dir) -> Path:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.5, 4.2))
    for summary in (summaries[0], summaries[-1]) if len(summaries) > 1 else summaries:
        _, rows = read_csv(Path(out_dir) / summary["csv"])
        ax1.semilogy([r[0] for r in rows], [r[2] for r in rows], lw=0.7,
                     label=f"hbar_eff={summary['hbar']:.4g}")
    ax1.set_xlabel("time (kicks)")
    ax1.set_ylabel("D_HS(rho(t), rho_eq)")
    ax1.grid(True, which="both", alpha=0.3)
    ax1.legend(loc="best", fontsize=8)
    x = [r[0] for r in scan_rows]
    y = [r[1] for r in scan_rows]
    ax2.loglog(x, y, "o", color="tab:purple", label="time-averaged D_HS")
    ax2.loglog(x, [10 ** (fit.intercept + fit.slope * math.log10(v)) for v in x],
               "-", color="tab:purple", lw=1,
               label=f"slope {fit.slope:.2f}+-{fit.slope_stderr:.2f}")
    ax2.set_xlabel("hbar_eff")
    ax2.set_ylabel("<D_HS>")
    ax2.grid(True, which="both", alpha=0.3)
    ax2.legend(loc="best", fontsize=8)
    return _finish(fig, path)


def plot_bipartite(path, rows, threshold_f) -> Path:
    fig, ax = _new_axes("time (kicks)", "F_01 and negativity")
    ax.plot([r[0] for r in rows], [r[1] for r in rows], lw=0.7, color="tab:blue",
            label="F_01(t)")
    ax.plot([r[0] for r in rows], [r[2] for r in rows], lw=0.7, color="tab:red",
            label="negativity")
    ax.axhline(threshold_f, color="k", ls="--", lw=0.8,
               label=f"sudden-death F* = {threshold_f:.5f}")
    ax.legend(loc="best", fontsize=8)
    return _finish(fig, path)


def plot_rmt(path, rows) -> Path:
    fig, ax = _new_axes("moment", "value")
    labels = [r[0] for r in rows]
    measured = [r[1] for r in rows]
    expected = [r[2] for r in rows]
    err = [3 * r[3] for r in rows]
    xpos = range(len(rows))
    ax.errorbar(xpos, measured, yerr=err, fmt="o", color="tab:red",
                label="measured (3 s.e.)")
    ax.plot(xpos, expected, "_", ms=20, color="k", label="CUE prediction")
    ax.set_xticks(list(xpos), labels)
    ax.set_yscale("log")
    ax.legend(loc="best", fontsize=8)
    return _finish(fig, path)
