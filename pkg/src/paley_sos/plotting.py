"""Log-log SVG rendering of sweep CSVs; no computation beyond the power-law fit."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .fitting import fit_power_law  # noqa: E402
from .sweep import read_csv  # noqa: E402


def emit_plot(csv_paths, out_svg, title: str | None = None) -> Path:
    """Scatter each quantity against p on log-log axes with its fitted line.

    Artists carry gids: "points-<quantity>" for the markers and "fit-<quantity>" for the line.
    """
    series: dict[str, list] = defaultdict(list)
    for path in csv_paths:
        records = read_csv(path)
        if not records:
            raise ValueError(f"{path}: no rows")
        for r in records:
            if r.status == "ok":
                series[r.quantity].append((r.p, r.value))
    if not series:
        raise ValueError("no ok rows to plot")

    plt.rcParams["svg.hashsalt"] = "paley-sos"
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for k, (quantity, pts) in enumerate(sorted(series.items())):
        pts.sort()
        ps = np.array([p for p, _ in pts], dtype=float)
        vals = np.array([v for _, v in pts])
        colour = f"C{k}"
        (points,) = ax.plot(ps, vals, "o", color=colour, label=quantity)
        points.set_gid(f"points-{quantity}")
        if len(np.unique(ps)) >= 3 and np.all(vals > 0):
            fit = fit_power_law(ps, vals)
            grid = np.geomspace(ps.min(), ps.max(), 50)
            (line,) = ax.plot(grid, fit.predict(grid), "-", color=colour, lw=1,
                              label=f"{fit.a:.3g} p^{fit.b:.3f}")
            line.set_gid(f"fit-{quantity}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("p")
    ax.set_ylabel("value")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = Path(out_svg)
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out
