"""Chart rendering for exam reports.

Writes one figure set per solution (durations, type and level histograms,
overlap heatmap) plus a bank-wide question-usage chart, as PNG files next
to the delimited report output.  Rendering is purely descriptive and never
feeds back into solving.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .exam import ExamModel, ExamReport


def render_report(rep: ExamReport, model: ExamModel, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files: list[Path] = []
    for idx, stats in enumerate(rep.sets):
        examinees = list(range(1, len(stats.durations) + 1))

        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.bar(examinees, stats.durations, color="#4878a8")
        ax.set_xlabel("examinee")
        ax.set_ylabel("total duration (min)")
        ax.set_title(f"exam durations (solution {idx})")
        files.append(_save(fig, out_dir / f"durations_s{idx:03d}.png"))

        files.append(_hist_figure(
            stats.type_hist, "question type", f"type mix (solution {idx})",
            out_dir / f"types_s{idx:03d}.png"))
        files.append(_hist_figure(
            stats.level_hist, "complexity level", f"level mix (solution {idx})",
            out_dir / f"levels_s{idx:03d}.png"))

        fig, ax = plt.subplots(figsize=(4.5, 4))
        im = ax.imshow(stats.overlap, cmap="viridis", origin="upper")
        ax.set_xticks(range(len(examinees)), [str(e) for e in examinees])
        ax.set_yticks(range(len(examinees)), [str(e) for e in examinees])
        ax.set_xlabel("examinee")
        ax.set_ylabel("examinee")
        ax.set_title(f"shared questions per exam pair (solution {idx})")
        fig.colorbar(im, ax=ax, shrink=0.8)
        files.append(_save(fig, out_dir / f"overlap_s{idx:03d}.png"))

    fig, ax = plt.subplots(figsize=(7, 3.5))
    ids = list(range(1, len(rep.usage) + 1))
    ax.bar(ids, rep.usage, width=0.9, color="#6a9a58")
    ax.set_xlabel("question id")
    ax.set_ylabel("slots filled")
    ax.set_title("question usage across all exams")
    files.append(_save(fig, out_dir / "usage.png"))
    return files


def _hist_figure(hist, xlabel: str, title: str, path: Path) -> Path:
    k = len(hist)
    bins = len(hist[0]) if k else 0
    fig, ax = plt.subplots(figsize=(6, 3.5))
    width = 0.8 / max(k, 1)
    for i, row in enumerate(hist):
        xs = [b + 1 + (i - (k - 1) / 2) * width for b in range(bins)]
        ax.bar(xs, row, width=width, label=f"examinee {i + 1}")
    ax.set_xticks(range(1, bins + 1))
    ax.set_xlabel(xlabel)
    ax.set_ylabel("questions")
    ax.set_title(title)
    if 1 < k <= 8:
        ax.legend(fontsize="small")
    return _save(fig, path)


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
