"""Figure rendering for sweep reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render_sweep_figure(rows, path: str, title: str) -> str:
    """Semilog plot of measured cost against the theoretical decay bound."""
    ns = [r.n for r in rows]
    measured = [r.measured for r in rows]
    bounds = [r.bound for r in rows]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.semilogy(ns, measured, "o-", label="measured cost")
    ax.semilogy(ns, bounds, "s--", label="decay bound")
    ax.set_xlabel("level n")
    ax.set_ylabel("cost")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
