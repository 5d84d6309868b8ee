"""Static figures for conformance reports, rendered to files."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .conformance import ConformanceReport  # noqa: E402

FIT_COLOR = "#2b8a3e"
MISS_COLOR = "#c92a2a"
MAX_VARIANTS = 25


def _short(trace, width=48):
    text = ", ".join(trace) if trace else "<empty>"
    return text if len(text) <= width else text[: width - 1] + "…"


def plot_conformance(report: ConformanceReport, path, title: str | None = None) -> None:
    """Metric bars on the left, the most frequent variants coloured by fit on the right."""
    variants = sorted(report.per_trace, key=lambda t: (-t.count, t.trace))[:MAX_VARIANTS]
    height = max(3.0, 0.28 * len(variants) + 1.2)
    fig, (ax_m, ax_v) = plt.subplots(1, 2, figsize=(11, height),
                                     gridspec_kw={"width_ratios": [1, 2.4]})

    names = ["fitness", "precision", "f-score"]
    values = [report.fitness, report.precision, report.f_score]
    bars = ax_m.bar(names, values, color=["#1c7ed6", "#f08c00", "#5f3dc4"])
    for bar, v in zip(bars, values):
        ax_m.text(bar.get_x() + bar.get_width() / 2, v + 0.02, f"{v:.3f}",
                  ha="center", va="bottom", fontsize=9)
    ax_m.set_ylim(0, 1.12)
    ax_m.set_ylabel("score")
    ax_m.spines[["top", "right"]].set_visible(False)

    ys = range(len(variants))
    ax_v.barh(list(ys), [t.count for t in variants],
              color=[FIT_COLOR if t.fits else MISS_COLOR for t in variants])
    ax_v.set_yticks(list(ys), [_short(t.trace) for t in variants], fontsize=7)
    ax_v.invert_yaxis()
    ax_v.set_xlabel("trace count")
    ax_v.set_title("variants (green fits, red does not)", fontsize=9)
    ax_v.spines[["top", "right"]].set_visible(False)

    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
