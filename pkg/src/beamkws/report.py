"""Figure rendering for the report paths (written next to the data files)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .scoring import OperatingPoint, best_point
from .stft import Waveform, magnitude, stft


def render_sweep_figure(points: Sequence[OperatingPoint], path: str | Path) -> None:
    """Plot FRR/FAR/score against threshold and mark the minimizer."""
    thresholds = [p.threshold for p in points]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.step(thresholds, [100 * p.frr for p in points], where="post", label="FRR")
    ax.step(thresholds, [100 * p.far for p in points], where="post", label="FAR")
    ax.step(thresholds, [100 * p.score for p in points], where="post", label="FRR + FAR")
    best = best_point(points)
    ax.plot([best.threshold], [100 * best.score], "kv", markersize=8)
    ax.annotate(
        f"min {100 * best.score:.2f}% @ {best.threshold:.3g}",
        xy=(best.threshold, 100 * best.score),
        xytext=(8, 10),
        textcoords="offset points",
        fontsize=9,
    )
    ax.set_xlabel("threshold")
    ax.set_ylabel("rate (%)")
    ax.set_title("Detection operating points")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_enhancement_figure(
    mixture: Waveform,
    enhanced: Waveform,
    path: str | Path,
    channel: int = 0,
) -> None:
    """Before/after log-magnitude spectrograms of an enhancement run."""
    specs = [
        ("input (channel %d)" % channel, magnitude(stft(mixture), channel)),
        ("enhanced", magnitude(stft(enhanced), 0)),
    ]
    fig, axes = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    for ax, (title, mag) in zip(axes, specs):
        db = 20.0 * np.log10(np.maximum(mag, 1e-10))
        vmax = db.max()
        im = ax.imshow(
            db.T,
            origin="lower",
            aspect="auto",
            vmin=vmax - 80,
            vmax=vmax,
            cmap="magma",
        )
        ax.set_title(title)
        ax.set_ylabel("frequency bin")
        fig.colorbar(im, ax=ax, label="dB")
    axes[-1].set_xlabel("frame")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
