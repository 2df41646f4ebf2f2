"""Static PNG plots for training histories and metric reports."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_loss_curves(history: Sequence, path: str | Path) -> Path:
    """Train and validation loss per epoch from EpochStats records."""
    path = Path(path)
    epochs = [h.epoch for h in history]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, [h.train_loss for h in history], label="train", marker="o", ms=3)
    val = [h.val_loss for h in history]
    if any(np.isfinite(v) for v in val):
        ax.plot(epochs, val, label="validation", marker="s", ms=3)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean loss")
    ax.set_title("Training and validation loss")
    ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, path)


def plot_motion_image(image, path: str | Path) -> Path:
    """Render an encoded motion image; the valid region is outlined."""
    path = Path(path)
    pixels = getattr(image, "pixels", image)
    fig, ax = plt.subplots(figsize=(8, 5))
    ax.imshow(np.clip(pixels, 0.0, 1.0), interpolation="nearest", aspect="auto")
    rows = getattr(image, "valid_rows", None)
    cols = getattr(image, "valid_cols", None)
    if rows and cols:
        ax.add_patch(plt.Rectangle((-0.5, -0.5), cols, rows, fill=False,
                                   edgecolor="white", linewidth=0.8, linestyle="--"))
    ax.set_xlabel("time (frames)")
    ax.set_ylabel("interpolated joints")
    ax.set_title("Motion image")
    return _save(fig, path)


def plot_report(report, out_dir: str | Path) -> list[Path]:
    """One PNG per breakdown table present in the report."""
    out_dir = Path(out_dir)
    written: list[Path] = []

    if report.per_label_length:
        lengths = sorted(report.per_label_length)
        acc = [report.per_label_length[k]["accuracy"] for k in lengths]
        n = [report.per_label_length[k]["n"] for k in lengths]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.bar(lengths, acc, color="tab:blue")
        ax.set_xticks(lengths)
        for k, (a, count) in zip(lengths, zip(acc, n)):
            ax.text(k, a + 0.01, f"n={count}", ha="center", fontsize=8)
        ax.set_ylim(0, 1.1)
        ax.set_xlabel("ground-truth label length (words)")
        ax.set_ylabel("detection accuracy")
        ax.set_title("Accuracy by label word length")
        written.append(_save(fig, out_dir / "accuracy_by_label_length.png"))

    if report.word_count_confusion:
        rows = sorted(report.word_count_confusion)
        cols = sorted({c for row in report.word_count_confusion.values() for c in row})
        mat = np.zeros((len(rows), len(cols)))
        for i, r in enumerate(rows):
            for j, c in enumerate(cols):
                mat[i, j] = report.word_count_confusion[r].get(c, 0)
        fig, ax = plt.subplots(figsize=(6, 5))
        im = ax.imshow(mat, cmap="Blues")
        ax.set_xticks(range(len(cols)), [str(c) for c in cols])
        ax.set_yticks(range(len(rows)), [str(r) for r in rows])
        for i in range(len(rows)):
            for j in range(len(cols)):
                if mat[i, j]:
                    ax.text(j, i, int(mat[i, j]), ha="center", va="center", fontsize=8)
        ax.set_xlabel("predicted word count")
        ax.set_ylabel("ground-truth word count")
        ax.set_title("Predicted vs ground-truth word counts")
        fig.colorbar(im, ax=ax, shrink=0.8)
        written.append(_save(fig, out_dir / "word_count_confusion.png"))

    if report.per_count:
        counts = sorted(report.per_count)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.bar(counts, [report.per_count[c]["obo"] for c in counts],
               color="tab:green")
        ax.set_xticks(counts)
        ax.set_ylim(0, 1.1)
        ax.set_xlabel("ground-truth repetition count")
        ax.set_ylabel("off-by-one accuracy")
        ax.set_title("OBO by repetition count")
        written.append(_save(fig, out_dir / "obo_by_count.png"))

        fig, ax = plt.subplots(figsize=(6, 4))
        ax.bar(counts, [report.per_count[c]["mae"] for c in counts],
               color="tab:orange")
        ax.set_xticks(counts)
        ax.set_xlabel("ground-truth repetition count")
        ax.set_ylabel("mean absolute error")
        ax.set_title("Absolute counting error by repetition count")
        written.append(_save(fig, out_dir / "abs_error_by_count.png"))

    return written
