"""Matplotlib renderings for the CLI report paths.

Everything draws on the Agg backend and writes straight to files, so the
CLI works headless. Each function returns the path it wrote.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .labeler import INDICATOR_NAMES, LabeledExample
from .models import EpochRecord

_LABEL_COLORS = ("#4c72b0", "#55a868", "#c44e52", "#8172b2")
_CORNERS = ((0.0, 1.0), (1.0, 1.0), (1.0, 0.0), (0.0, 0.0))


def render_label_map(examples: Sequence[LabeledExample], path: str | Path) -> Path:
    """Scatter of normalized engagement points, colored by hard label."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6.0, 5.5))
    for label in (1, 2, 3, 4):
        xs = [ex.engagement.c_norm for ex in examples if ex.hard_label == label]
        ys = [ex.engagement.d_norm for ex in examples if ex.hard_label == label]
        ax.scatter(xs, ys, s=8, alpha=0.6, color=_LABEL_COLORS[label - 1],
                   label=f"{label}: {INDICATOR_NAMES[label - 1]}")
    for (cx, cy), name in zip(_CORNERS, INDICATOR_NAMES):
        ax.annotate(name, (cx, cy), fontsize=8, ha="center",
                    xytext=(cx, cy + (0.04 if cy < 0.5 else -0.06)), textcoords="data")
    ax.set_xlim(-0.05, 1.05)
    ax.set_ylim(-0.05, 1.05)
    ax.set_xlabel("normalized click count")
    ax.set_ylabel("normalized dwell time")
    ax.set_title(f"engagement map ({len(examples)} articles)")
    ax.legend(loc="center", fontsize=8, framealpha=0.9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_metrics(rows: Sequence, path: str | Path) -> Path:
    """Per-architecture MAE and RAE bars from evaluation report rows."""
    path = Path(path)
    names = [row.architecture for row in rows]
    maes = [row.mae for row in rows]
    raes = [row.rae for row in rows]
    fig, (ax_mae, ax_rae) = plt.subplots(1, 2, figsize=(10.0, 4.2))
    positions = range(len(names))
    ax_mae.bar(positions, maes, color="#4c72b0")
    ax_mae.set_title("test MAE")
    ax_rae.bar(positions, raes, color="#c44e52")
    ax_rae.axhline(100.0, color="black", linewidth=0.8, linestyle="--")
    ax_rae.set_title("test RAE (%), dashed = mean predictor")
    for ax in (ax_mae, ax_rae):
        ax.set_xticks(list(positions))
        ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_training_curves(history: Sequence[EpochRecord], path: str | Path) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    epochs = [r.epoch for r in history]
    ax.plot(epochs, [r.train_loss for r in history], label="train", color="#4c72b0")
    if any(r.val_loss is not None for r in history):
        ax.plot(
            [r.epoch for r in history if r.val_loss is not None],
            [r.val_loss for r in history if r.val_loss is not None],
            label="validation",
            color="#c44e52",
        )
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title("training curves")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_topic_losses(losses: Mapping[str, Sequence[float]], path: str | Path) -> Path:
    """Frobenius loss per multiplicative-update iteration, one line per model."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    for name, history in losses.items():
        ax.plot(range(len(history)), history, label=name)
    ax.set_xlabel("iteration")
    ax.set_ylabel("Frobenius loss")
    ax.set_title("factorization convergence")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
