"""Figure rendering for the report paths.

Every report subcommand drops PNG plots next to its delimited output so
a run can be eyeballed without scripting.  The Agg backend keeps this
headless.
"""

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_FLOOR = 1e-18


def _save(fig, outdir, name):
    fig.savefig(os.path.join(outdir, name), dpi=120, bbox_inches="tight")
    plt.close(fig)
    return name


def _semilogy_abs(ax, t, y, label=None):
    ax.semilogy(t, np.maximum(np.abs(y), _FLOOR), label=label)


def trace_figures(trace, outdir):
    names = []
    diag = trace.diagnostics
    t = diag["t"]

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for key in ("kinetic", "elastic", "magnetic"):
        ax.plot(t, diag[key], label=key)
    ax.plot(t, diag["kinetic"] + diag["elastic"] + diag["magnetic"],
            "k--", label="total")
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.legend(loc="best")
    ax.set_title("energy components")
    names.append(_save(fig, outdir, "energy_components.png"))

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    _semilogy_abs(ax, t, diag["energy_residual"])
    ax.set_xlabel("t")
    ax.set_ylabel("|residual|")
    ax.set_title("energy equality residual")
    names.append(_save(fig, outdir, "energy_residual.png"))

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    _semilogy_abs(ax, t, diag["max_norm_deviation"])
    ax.set_xlabel("t")
    ax.set_ylabel("max nodal | |d| - |d0| |")
    ax.set_title("director norm conservation")
    names.append(_save(fig, outdir, "norm_deviation.png"))
    return names


def energy_figures(report, outdir):
    names = []
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(report.times, report.total, label="total energy")
    ax.plot(report.times, report.coercivity_lower, label="coercivity lower bound")
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.legend(loc="best")
    ax.set_title("energy vs coercivity bound")
    names.append(_save(fig, outdir, "energy_total.png"))

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(report.times, report.coercivity_margin)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("margin")
    ax.set_title("coercivity margin")
    names.append(_save(fig, outdir, "coercivity_margin.png"))
    return names


def certificate_figures(report, outdir):
    names = []
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(report.times, report.lhs, label="lhs")
    ax.plot(report.times, report.rhs, label="rhs")
    ax.set_xlabel("t")
    ax.set_ylabel("value")
    ax.legend(loc="best")
    ax.set_title("certificate sides (%s pairing)" % report.pairing)
    names.append(_save(fig, outdir, "certificate_sides.png"))

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(report.times, report.slack)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("slack")
    ax.set_title("certificate slack")
    names.append(_save(fig, outdir, "certificate_slack.png"))
    return names


def control_figures(result, outdir):
    names = []
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    it = np.arange(len(result.J_history))
    ax.semilogy(it, np.maximum(result.J_history, _FLOOR), marker="o", ms=3)
    ax.set_xlabel("accepted iteration")
    ax.set_ylabel("J")
    ax.set_title("reduced cost history")
    names.append(_save(fig, outdir, "control_history.png"))
    return names
