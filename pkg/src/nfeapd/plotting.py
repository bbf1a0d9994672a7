"""Static figures rendered to files with the Agg backend."""

from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.colors import ListedColormap
from matplotlib.figure import Figure
from matplotlib.tri import Triangulation

TWO_COLOR = ListedColormap(["#3b4cc0", "#d62728"])


def _figure(w=5.0, h=4.0):
    fig = Figure(figsize=(w, h), dpi=120)
    FigureCanvasAgg(fig)
    return fig


def _tri(mesh, U=None, scale=0.0):
    x = mesh.nodes if U is None else mesh.nodes + scale * np.asarray(U)
    return Triangulation(x[:, 0], x[:, 1], mesh.elements)


def _save(fig, path):
    fig.savefig(path, bbox_inches="tight")
    return path


def plot_damage(mesh, Z, path, U=None, scale=0.0, title=None):
    """Two-color damage map: red where ``Z >= 1``."""
    flag = (np.asarray(Z) >= 1.0).astype(float)
    fig = _figure()
    ax = fig.add_subplot()
    ax.tripcolor(_tri(mesh, U, scale), facecolors=flag[mesh.elements].max(axis=1),
                 cmap=TWO_COLOR, vmin=0, vmax=1)
    ax.set_aspect("equal")
    ax.set_title(title or "damage Z >= 1")
    return _save(fig, path)


def plot_element_field(mesh, values, path, label="", U=None, scale=0.0):
    fig = _figure()
    ax = fig.add_subplot()
    pc = ax.tripcolor(_tri(mesh, U, scale), facecolors=np.asarray(values), cmap="viridis")
    fig.colorbar(pc, ax=ax, label=label)
    ax.set_aspect("equal")
    return _save(fig, path)


def plot_rates(t, rates, path):
    """Convergence rate against time, one line per mesh pair."""
    fig = _figure(5.0, 3.2)
    ax = fig.add_subplot()
    for (a, b), alpha in rates.items():
        ax.plot(t, alpha, marker="o", ms=3, label=f"m = {a}, {b}")
    ax.axhline(2.0, color="0.5", lw=0.8, ls="--")
    ax.set_xlabel("t")
    ax.set_ylabel("rate")
    ax.legend()
    return _save(fig, path)


def plot_crack_speed(traces, path):
    """Normalized crack speed against normalized time for each labelled
    trace."""
    fig = _figure(5.0, 3.2)
    ax = fig.add_subplot()
    for label, tr in traces.items():
        ok = np.isfinite(tr.t_bar)
        ax.plot(tr.t_bar[ok], tr.v_over_cR[ok], marker="o", ms=3, label=label)
    ax.axhline(1.0, color="0.5", lw=0.8, ls="--")
    ax.set_xlabel("normalized time")
    ax.set_ylabel("v / c_R")
    ax.legend()
    return _save(fig, path)


def plot_overlap(mesh, a, b, path, labels=("a", "b")):
    """Damaged node sets of two runs on one mesh, drawn half transparent."""
    fig = _figure()
    ax = fig.add_subplot()
    x = mesh.nodes
    ax.triplot(_tri(mesh), color="0.85", lw=0.2)
    for mask, color, label in ((a, "#1f77b4", labels[0]), (b, "#d62728", labels[1])):
        mask = np.asarray(mask, bool)
        ax.scatter(x[mask, 0], x[mask, 1], s=4, c=color, alpha=0.5, label=label, lw=0)
    ax.set_aspect("equal")
    ax.legend(loc="upper right")
    return _save(fig, path)
