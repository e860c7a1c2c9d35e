"""Figure rendering for the CLI report paths.

Figures are written straight to files (Agg backend); the delimited data
they visualize is always emitted alongside, so plots are a convenience,
never the only record.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .runtime import TrajectoryLog


def save_set_figure(path: str, sid: str, rci_vertices: np.ndarray,
                    constraint_vertices: np.ndarray | None = None) -> None:
    """Filled invariant-set polygon, optionally inside its constraint set."""
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    if constraint_vertices is not None and constraint_vertices.shape[0] > 2:
        closed = np.vstack([constraint_vertices, constraint_vertices[:1]])
        ax.plot(closed[:, 0], closed[:, 1], "k--", lw=1.0, label="constraint")
    if rci_vertices.shape[0] > 2:
        ax.fill(rci_vertices[:, 0], rci_vertices[:, 1], alpha=0.55,
                color="tab:blue", label="invariant set")
        closed = np.vstack([rci_vertices, rci_vertices[:1]])
        ax.plot(closed[:, 0], closed[:, 1], color="tab:blue", lw=1.2)
    else:
        ax.plot(rci_vertices[:, 0], rci_vertices[:, 1], "o-",
                color="tab:blue", label="invariant set")
    ax.set_title(sid)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_trajectory_figure(path: str, log: TrajectoryLog, sid: str,
                           tube_radii: np.ndarray | None = None) -> None:
    """Per-state time series; with a nominal, also the tube band around it."""
    steps = len(log.states)
    dim = log.states[0][sid].shape[0]
    ts = np.arange(steps)
    xs = np.array([log.states[t][sid] for t in range(steps)])
    fig, axes = plt.subplots(dim, 1, figsize=(6.0, 2.2 * dim), squeeze=False)
    for i in range(dim):
        ax = axes[i][0]
        if log.nominal is not None:
            nom = np.array([log.nominal.states[t][sid][i] for t in range(steps)])
            ax.plot(ts, nom, "k--", lw=1.0, label="nominal")
            if tube_radii is not None:
                ax.fill_between(ts, nom - tube_radii[i], nom + tube_radii[i],
                                color="tab:orange", alpha=0.25, label="tube")
        ax.plot(ts, xs[:, i], color="tab:blue", lw=1.2, label="trajectory")
        ax.set_ylabel(f"x{i}")
        if i == 0:
            ax.set_title(sid)
            ax.legend(loc="upper right", fontsize=8)
    axes[-1][0].set_xlabel("step")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_bench_figure(path: str, rows: list[dict]) -> None:
    """Total synthesis time against aggregate state dimension."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    groups: dict[tuple, list[tuple[float, float]]] = {}
    for row in rows:
        key = (row["lambda"], row["radius"])
        groups.setdefault(key, []).append((row["states"], row["total_seconds"]))
    for (lam, radius), pts in sorted(groups.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-",
                label=f"lambda={lam}, R={radius}")
    ax.set_xlabel("aggregate state dimension")
    ax.set_ylabel("total synthesis time [s]")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
