"""Bench report rendering: delimited tables plus matplotlib figures."""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def write_csv(rows: list[dict], path) -> None:
    if not rows:
        return
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def split_figure(records, path) -> None:
    """Direct vs MVQ vs view latency per scenario, log scale, breakeven labels."""
    rows = [r for r in records if not r.rejected]
    if not rows:
        return
    labels = [r.scenario for r in rows]
    x = range(len(rows))
    width = 0.27
    fig, ax = plt.subplots(figsize=(max(6.0, 0.8 * len(rows)), 4.0))
    ax.bar([i - width for i in x], [max(r.direct_ms, 1e-3) for r in rows],
           width, label="direct")
    ax.bar(list(x), [max(r.mvq_ms, 1e-3) for r in rows], width, label="view build")
    ax.bar([i + width for i in x], [max(r.view_ms, 1e-3) for r in rows],
           width, label="view query")
    for i, r in enumerate(rows):
        tag = "never" if r.breakeven is None else f"k={r.breakeven}"
        ax.annotate(tag, (i, max(r.direct_ms, r.mvq_ms, 1e-3)),
                    textcoords="offset points", xytext=(0, 4),
                    ha="center", fontsize=7)
    ax.set_yscale("log")
    ax.set_ylabel("latency (ms)")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.legend(fontsize=8)
    ax.set_title("split execution: per-scenario latencies and breakeven")
    fig.tight_layout()
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path, dpi=130)
    plt.close(fig)


def micro_figure(rows: list[dict], path) -> None:
    if not rows:
        return
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    labels = [r["type"] for r in rows]
    ax.bar(labels, [r["rows_per_s"] / 1e6 for r in rows], color="#4878a8")
    for i, r in enumerate(rows):
        ax.annotate(f"{r['latency_ms']:.2f} ms", (i, r["rows_per_s"] / 1e6),
                    textcoords="offset points", xytext=(0, 3),
                    ha="center", fontsize=8)
    ax.set_ylabel("million rows / s")
    ax.set_title("count-under-filter scan rate")
    fig.tight_layout()
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path, dpi=130)
    plt.close(fig)
