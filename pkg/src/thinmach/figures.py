"""Figure rendering for the report paths.

Every CLI report command drops PNG figures next to its delimited output.
The CSV stays the authoritative record; the figures are the quick-look
summaries (log-log convergence of the relative energy, its time histories,
dissipation, and the dispersive-scaling table).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "convergence_figure",
    "history_figure",
    "dispersive_figure",
    "conservation_figure",
]


def _finish(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def convergence_figure(rows, path, tau=None):
    """Relative energy against the Mach number, one curve per eta.

    rows: sequence of ConvergenceRow.  Uses the final snapshot time unless
    tau is given.
    """
    rows = list(rows)
    if tau is None:
        tau = max(r.tau for r in rows)
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    etas = sorted({r.eta for r in rows})
    for eta in etas:
        pts = sorted(
            [(r.epsilon, r.E_naive_B) for r in rows if r.eta == eta and abs(r.tau - tau) < 1e-9]
        )
        if not pts:
            continue
        eps = np.array([p[0] for p in pts])
        val = np.array([p[1] for p in pts])
        ax.loglog(eps, np.maximum(val, 1e-300), "o-", base=2, label=f"eta = {eta:g}")
    ax.set_xlabel("Mach number")
    ax.set_ylabel(f"relative energy on B at t = {tau:g}")
    ax.grid(True, which="both", alpha=0.3)
    if etas:
        ax.legend(fontsize=8)
    return _finish(fig, path)


def history_figure(rows, path, eta=None):
    """Time histories of the naive/corrected energies and the dissipation."""
    rows = list(rows)
    if eta is None:
        eta = min(r.eta for r in rows)
    sub = [r for r in rows if r.eta == eta]
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6))
    for eps in sorted({r.epsilon for r in sub}, reverse=True):
        pts = sorted([(r.tau, r.E_naive_B, r.E_corrected, r.dissipation) for r in sub
                      if r.epsilon == eps])
        t = [p[0] for p in pts]
        axes[0].plot(t, [p[1] for p in pts], "o-", label=f"eps = {eps:g}")
        axes[1].plot(t, [p[3] for p in pts], "s--", label=f"eps = {eps:g}")
    axes[0].set_xlabel("t")
    axes[0].set_ylabel("relative energy on B")
    axes[1].set_xlabel("t")
    axes[1].set_ylabel("dissipation defect")
    for ax in axes:
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
    fig.suptitle(f"eta = {eta:g}", fontsize=10)
    return _finish(fig, path)


def dispersive_figure(table, path, q):
    """Measured space-time norms against the calibrated eps^(1/q) envelope.

    table: list of (epsilon, value) pairs, largest epsilon first.
    """
    eps = np.array([t[0] for t in table])
    val = np.array([t[1] for t in table])
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    if np.all(val == 0.0):
        ax.plot(eps, val, "o-", label="measured (zero data)")
    else:
        ax.loglog(eps, val, "o-", base=2, label="measured")
        C = val[0] / eps[0] ** (1.0 / q)
        ax.loglog(eps, C * eps ** (1.0 / q), "k--", base=2,
                  label=f"C eps^(1/{q:g}), C fit at eps max")
    ax.set_xlabel("Mach number")
    ax.set_ylabel("dispersive space-time norm")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    return _finish(fig, path)


def conservation_figure(log, path):
    """Mass drift and scaled total energy along a single run."""
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6))
    drift = np.abs(log.mass - log.mass[0]) / max(abs(log.mass[0]), 1e-300)
    axes[0].semilogy(log.times, np.maximum(drift, 1e-18))
    axes[0].set_xlabel("t")
    axes[0].set_ylabel("relative mass drift")
    axes[1].plot(log.times, log.energy)
    axes[1].set_xlabel("t")
    axes[1].set_ylabel("total scaled energy")
    for ax in axes:
        ax.grid(True, alpha=0.3)
    return _finish(fig, path)
