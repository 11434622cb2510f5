"""Report figures written next to the JSON artifacts (matplotlib, Agg backend)."""

from __future__ import annotations

from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .analysis import AnalysisReport  # noqa: E402
from .evaluation import ComparisonReport  # noqa: E402

_LATENCY = [("avg_rt_ms", "avg"), ("p50_ms", "P50"), ("p90_ms", "P90"), ("p99_ms", "P99")]


def plot_comparison(report: ComparisonReport, path: str | Path) -> Path:
    """Throughput and latency side by side, original vs optimized, changes annotated."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, (ax_t, ax_l) = plt.subplots(1, 2, figsize=(9, 3.6), gridspec_kw={"width_ratios": [1, 2.4]})

    values = [report.original.throughput_rps, report.optimized.throughput_rps]
    bars = ax_t.bar(["original", "optimized"], values, color=["#9a9a9a", "#2b6cb0"], width=0.6)
    ax_t.set_ylabel("requests / s")
    ax_t.set_title(f"throughput ({report.display['throughput_rps']})", fontsize=10)
    ax_t.bar_label(bars, fmt="%.1f", fontsize=8)

    width = 0.38
    xs = list(range(len(_LATENCY)))
    orig = [getattr(report.original, k) for k, _ in _LATENCY]
    opt = [getattr(report.optimized, k) for k, _ in _LATENCY]
    ax_l.bar([x - width / 2 for x in xs], orig, width, label="original", color="#9a9a9a")
    ax_l.bar([x + width / 2 for x in xs], opt, width, label="optimized", color="#2b6cb0")
    ax_l.set_xticks(xs, [f"{name}\n{report.display[k]}" for k, name in _LATENCY])
    ax_l.set_ylabel("ms")
    ax_l.set_title("response time", fontsize=10)
    ax_l.legend(frameon=False, fontsize=8)

    for ax in (ax_t, ax_l):
        ax.spines[["top", "right"]].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_findings(report: AnalysisReport, path: str | Path, limit: int = 15) -> Path:
    """Horizontal bars of impact score per ranked finding, colored by rule."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    colors = {"R1": "#2b6cb0", "R2": "#c05621", "R3": "#2f855a", "R4": "#6b46c1"}
    shown = report.findings[:limit]
    fig, ax = plt.subplots(figsize=(7.5, 0.45 * max(len(shown), 1) + 1.2))
    if not shown:
        ax.text(0.5, 0.5, "no findings", ha="center", va="center", transform=ax.transAxes)
        ax.set_axis_off()
    else:
        labels: List[str] = []
        for f in shown:
            owner = f.owner_class.rsplit(".", 1)[-1]
            labels.append(f"#{f.rank} {f.rule_id} {owner}")
        ys = list(range(len(shown)))[::-1]
        ax.barh(ys, [f.impact_score for f in shown], color=[colors.get(f.rule_id, "#777") for f in shown])
        ax.set_yticks(ys, labels, fontsize=8)
        ax.set_xlabel("impact score")
        ax.spines[["top", "right"]].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
