"""Static figure emitters (PNG via the Agg backend)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from avsum.evalkit.report import DatasetReport, DeltaF1  # noqa: E402


def plot_delta_curves(curves: dict[str, DeltaF1], path: str | os.PathLike) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, d in curves.items():
        ax.plot(np.arange(1, len(d.curve) + 1), d.curve, marker=".", label=name)
    ax.axhline(0.0, color="grey", lw=0.8)
    ax.set_xlabel("Top-L videos (by face frames in summary)")
    ax.set_ylabel("cumulative normalised F1 gain")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_kld_bars(kld: np.ndarray, labels: list[str], path: str | os.PathLike) -> None:
    fig, ax = plt.subplots(figsize=(8, 3.5))
    colors = ["tab:grey"] * 2 + ["tab:blue"] * ((len(kld) - 2) // 2) + ["tab:orange"] * ((len(kld) - 2) // 2)
    ax.bar(np.arange(len(kld)), kld, color=colors)
    ax.set_xticks(np.arange(len(kld)), labels, rotation=90, fontsize=7)
    ax.set_ylabel("KL divergence (nats)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_scatter(report: DatasetReport, baseline: DatasetReport, path: str | os.PathLike,
                 metric: str = "f1", top_l: int = 15) -> None:
    base = baseline.by_id()
    top = {v.video_id for v in report.ranked()[:top_l]}
    fig, ax = plt.subplots(figsize=(4, 4))
    for v in report.videos:
        x, y = getattr(base[v.video_id], metric), getattr(v, metric)
        ax.scatter(x, y, c="tab:blue" if v.video_id in top else "tab:grey", s=14)
    ax.plot([0, 1], [0, 1], color="black", lw=0.8)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_xlabel(f"{baseline.model or 'baseline'} {metric}")
    ax.set_ylabel(f"{report.model or 'model'} {metric}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
