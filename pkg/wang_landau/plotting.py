from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.ticker import FuncFormatter

from .analysis import frequency_trace, z_trajectory
from .traces import RunTrace

plt.rcParams["svg.hashsalt"] = "wang-landau"

_BIN_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _color(index: int) -> str:
    return _BIN_COLORS[index % len(_BIN_COLORS)]


def _save(fig: plt.Figure, save_path: Path, what: str) -> None:
    save_path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(save_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    print(f"Saved {what} to {save_path}")


def plot_frequencies(
    traces: Sequence[RunTrace],
    phi: Sequence[float],
    save_path: Path,
    title: str | None = None,
) -> None:
    """Running proportion of visits per bin for every replica, dotted lines at the desired values."""
    fig, ax = plt.subplots(figsize=(10, 5))
    for replica, trace in enumerate(traces):
        frequencies = frequency_trace(trace)
        for i in range(trace.d):
            ax.plot(
                frequencies.times,
                frequencies.frequencies[:, i],
                color=_color(i),
                linewidth=0.9,
                alpha=0.6 if len(traces) > 1 else 1.0,
                label=f"bin {i + 1}" if replica == 0 else None,
            )
    for i, value in enumerate(phi):
        ax.axhline(value, color=_color(i), linestyle=":", linewidth=1.4)
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel("Iteration t")
    ax.set_ylabel("Proportion of visits")
    ax.xaxis.set_major_formatter(FuncFormatter(lambda value, _: f"{int(value):,d}"))
    ax.grid(which="major", linestyle=":", linewidth=0.7, color="#666666")
    ax.set_title(title or "Running visit frequencies")
    ax.legend(loc="upper right")
    _save(fig, save_path, "frequency plot")


def plot_z_trajectory(traces: Sequence[RunTrace], save_path: Path, i: int = 1, j: int = 2) -> None:
    fig, ax = plt.subplots(figsize=(10, 4))
    for replica, trace in enumerate(traces):
        ax.plot(trace.times, z_trajectory(trace, i, j), linewidth=0.8, label=trace.label or f"replica {replica}")
    ax.set_xlabel("Iteration t")
    ax.set_ylabel(f"log theta({i}) - log theta({j})")
    ax.grid(which="major", linestyle=":", linewidth=0.7, color="#666666")
    ax.set_title("Penalty ratio trajectory")
    if len(traces) <= 8:
        ax.legend(loc="best")
    _save(fig, save_path, "Z trajectory plot")


def plot_bin_visits(traces: Sequence[RunTrace], phi: Sequence[float], save_path: Path) -> None:
    """Final visit proportions per replica as grouped bars, with the desired values as markers."""
    d = traces[0].d
    width = 0.8 / max(len(traces), 1)
    positions = np.arange(1, d + 1)
    fig, ax = plt.subplots(figsize=(8, 4))
    for replica, trace in enumerate(traces):
        offset = (replica - (len(traces) - 1) / 2.0) * width
        ax.bar(positions + offset, trace.final_frequencies(), width=width, color="#9ecae1", edgecolor="#3182bd")
    ax.scatter(positions, phi, color="black", marker="_", s=400, zorder=3, label="desired")
    ax.set_xticks(positions)
    ax.set_xticklabels([f"bin {i}" for i in positions])
    ax.set_ylim(0.0, 1.0)
    ax.set_ylabel("Final proportion of visits")
    ax.legend(loc="upper right")
    _save(fig, save_path, "bin visit plot")


def plot_sample_histogram(
    traces: Sequence[RunTrace],
    bin_edges: Sequence[float],
    save_path: Path,
    bins: int = 100,
) -> None:
    """Density histogram of the recorded chain states pooled over replicas, partition edges dotted."""
    samples = np.concatenate([trace.positions[np.isfinite(trace.positions)] for trace in traces])
    edges = [float(edge) for edge in bin_edges]
    fig, ax = plt.subplots(figsize=(10, 4))
    ax.hist(samples, bins=bins, range=(edges[0], edges[-1]), density=True, color="#9ecae1", edgecolor="#3182bd")
    for edge in edges:
        ax.axvline(edge, color="black", linestyle=":", linewidth=1.2)
    ax.set_xlim(edges[0], edges[-1])
    ax.set_xlabel("x")
    ax.set_ylabel("Density")
    ax.set_title(f"Recorded states ({samples.size:,d} draws)")
    _save(fig, save_path, "sample histogram")
