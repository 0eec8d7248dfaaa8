"""Figure rendering for the CLI report paths.

Figures are written straight from Figure objects (no pyplot state) with a
fixed SVG hash salt and no date metadata, so rerunning a seeded command
reproduces the file byte for byte.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
from matplotlib.figure import Figure

from .toyxfer import ResultRow, aggregate_results

_SVG_RC = {"svg.hashsalt": "detcurate", "svg.fonttype": "path"}


def _save(fig: Figure, path: str | Path) -> None:
    path = Path(path)
    metadata = {"Date": None} if path.suffix == ".svg" else None
    with matplotlib.rc_context(_SVG_RC):
        fig.savefig(path, format=path.suffix.lstrip("."), metadata=metadata)


def plot_toy_curves(rows: list[ResultRow], path: str | Path) -> None:
    """Mean test mAP against the generated-image count, one line per
    real-image count, solid for filtered pretraining and dashed for
    unfiltered."""
    cells = aggregate_results(rows)
    fig = Figure(figsize=(7, 4.5))
    ax = fig.subplots()
    series: dict[tuple[int, bool], list[tuple[int, float]]] = {}
    for cell in cells:
        series.setdefault((cell["n_real"], cell["filtered"]), []).append(
            (cell["n_generated"], cell["mean_map"])
        )
    colors = matplotlib.colormaps["tab10"]
    real_counts = sorted({k[0] for k in series})
    for (n_real, filtered), points in sorted(series.items()):
        points.sort()
        ax.plot(
            [p[0] for p in points],
            [p[1] for p in points],
            linestyle="-" if filtered else "--",
            marker="o" if filtered else "s",
            markerfacecolor="white" if not filtered else None,
            color=colors(real_counts.index(n_real) % 10),
            label=f"{n_real} real" + (" (filtered)" if filtered else " (unfiltered)"),
        )
    ax.set_xlabel("generated images used for pretraining")
    ax.set_ylabel("test mAP")
    ax.set_ylim(0.0, 1.0)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8, ncol=2)
    fig.tight_layout()
    _save(fig, path)


def plot_fid_trace(trace: list[float], initial: float, path: str | Path) -> None:
    """Distance after each leave-one-out decision, prefixed by its start."""
    fig = Figure(figsize=(6, 3.5))
    ax = fig.subplots()
    values = [initial, *trace]
    ax.step(range(len(values)), values, where="post")
    ax.set_xlabel("decision")
    ax.set_ylabel("squared Frechet distance")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, path)
