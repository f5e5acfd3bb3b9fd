"""Static bar charts for evaluation reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .reports import MetricsReport  # noqa: E402


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    # fixed metadata keeps the file identical across runs
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_report(report: MetricsReport, path: str | Path) -> Path | None:
    """Render the report's aggregates as a bar chart. Returns None if there is nothing to draw."""
    path = Path(path)
    agg = report.aggregates
    if not agg:
        return None
    if report.kind == "anonymity":
        methods = [m for m in agg if agg[m]["mean_distance"] is not None]
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.bar(methods, [agg[m]["mean_distance"] for m in methods], color="0.4")
        ax.axhline(report.metadata.get("threshold", 0.3), color="r", lw=1, ls="--")
        ax.set_ylabel("mean cosine distance")
        ax.tick_params(axis="x", rotation=30)
        return _save(fig, path)
    if report.kind == "emotion":
        methods = list(agg)
        labels = report.metadata["labels"]
        width = 0.8 / len(methods)
        x = np.arange(len(labels))
        fig, ax = plt.subplots(figsize=(max(6, len(labels)), 3.5))
        for i, m in enumerate(methods):
            vals = [agg[m][e]["mean"] or 0.0 for e in labels]
            ax.bar(x + i * width, vals, width, label=m)
        ax.set_xticks(x + 0.4 - width / 2, labels)
        ax.set_ylabel("mean probability distance")
        ax.legend()
        return _save(fig, path)
    if report.kind == "traits":
        fig, axes = plt.subplots(len(agg), 1, figsize=(10, 3.5 * len(agg)), squeeze=False)
        for ax, m in zip(axes[:, 0], agg):
            traits = [t for t in agg[m] if agg[m][t]["rate"] is not None]
            traits.sort(key=lambda t: -agg[m][t]["rate"])
            ax.bar(traits, [agg[m][t]["rate"] for t in traits], color="0.4")
            ax.set_title(m)
            ax.set_ylim(0, 1)
            ax.tick_params(axis="x", rotation=90)
        return _save(fig, path)
    if report.kind == "f1":
        methods = list(agg)
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.bar(methods, [agg[m]["weighted avg"]["f1"] for m in methods], color="0.4")
        ax.set_ylabel("weighted F1")
        ax.set_ylim(0, 1)
        return _save(fig, path)
    return None
