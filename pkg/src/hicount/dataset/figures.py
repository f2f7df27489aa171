"""Report figures: normalized-count curves and per-method cost bars."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def render_report_figures(results: dict, outdir) -> list[Path]:
    """Render evaluation results to standalone PNG files.

    ``results["methods"]`` maps a method name to a summary with optional
    keys ``ratios`` ({true_count: reported/true}), ``mean_ops`` and
    ``path_memory_bytes``. Missing keys simply leave a method out of the
    corresponding figure; empty results yield empty axes.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    methods = results.get("methods", {})
    written = []

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, summary in methods.items():
        ratios = summary.get("ratios") or {}
        if ratios:
            xs = sorted(int(k) for k in ratios)
            ax.plot(xs, [ratios[str(x)] if str(x) in ratios else ratios[x] for x in xs],
                    marker="o", label=name)
    ax.axhline(1.0, color="gray", lw=0.8, ls="--")
    ax.set_xlabel("true objects per image")
    ax.set_ylabel("reported / true count")
    ax.set_title("Normalized reported count")
    if methods:
        ax.legend()
    path = outdir / "normalized_count.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    names = list(methods)
    ops = [methods[n].get("mean_ops", 0) for n in names]
    mem = [methods[n].get("path_memory_bytes", 0) for n in names]
    axes[0].bar(names, ops, color="tab:blue")
    axes[0].set_title("mean operations per query")
    axes[1].bar(names, mem, color="tab:orange")
    axes[1].set_title("model bytes on the query path")
    for ax_ in axes:
        ax_.tick_params(axis="x", rotation=20)
    path = outdir / "cost_bars.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)
    return written
