"""Figures and CSV tables for precision reports."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from pacfi.analyzer.corpus import HISTOGRAM_BINS  # noqa: E402

VIEWS = {"allowed": "allowed targets per call site", "diversity": "call sites sharing the context"}
BIN_LABELS = [label for _, _, label in HISTOGRAM_BINS]


def precision_csv(reports: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "view", "bin", "sites", "share", "max", "contexts"])
    for rep in reports:
        for view in VIEWS:
            v = rep[view]
            for label in BIN_LABELS:
                count = v["histogram"][label]
                share = count / v["sites"] if v["sites"] else 0.0
                w.writerow([rep["level"], view, label, count, f"{share:.6f}", v["max"], rep["contexts"]])
    return buf.getvalue()


def plot_histograms(reports: list[dict], view: str, path: str | Path) -> Path:
    """Grouped bars: share of call sites per bin, one group per refinement level."""
    path = Path(path)
    x = np.arange(len(BIN_LABELS))
    width = 0.8 / max(1, len(reports))
    fig, ax = plt.subplots(figsize=(7, 3.6))
    for k, rep in enumerate(reports):
        v = rep[view]
        shares = [v["histogram"][b] / v["sites"] if v["sites"] else 0.0 for b in BIN_LABELS]
        ax.bar(x + (k - (len(reports) - 1) / 2) * width, shares, width, label=rep["level"])
    ax.set_xticks(x)
    ax.set_xticklabels(BIN_LABELS)
    ax.set_ylim(0, 1)
    ax.set_ylabel("share of call sites")
    ax.set_xlabel(VIEWS[view])
    ax.legend(frameon=False, fontsize="small")
    ax.spines[["top", "right"]].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_le5_trend(reports: list[dict], path: str | Path) -> Path:
    path = Path(path)
    levels = [r["level"] for r in reports]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(levels, [r["allowed"]["le5_share"] for r in reports], marker="o", label="allowed <= 5")
    ax.plot(levels, [r["diversity"]["le5_share"] for r in reports], marker="s", label="sharing <= 5")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("share of call sites")
    ax.legend(frameon=False, fontsize="small")
    ax.spines[["top", "right"]].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def write_report(reports: list[dict], out_dir: str | Path) -> list[Path]:
    """CSV plus one figure per view and a trend plot, all in ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = out / "precision.csv"
    table.write_text(precision_csv(reports), encoding="utf-8")
    files = [table]
    for view in VIEWS:
        files.append(plot_histograms(reports, view, out / f"{view}_histogram.png"))
    files.append(plot_le5_trend(reports, out / "le5_trend.png"))
    return files
