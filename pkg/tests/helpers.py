"""Shared test utilities: calibrated sources and bin selectors."""

from __future__ import annotations

import numpy as np

from beamkws.stft import Waveform

SAMPLE_RATE = 16000
STFT_BIN_HZ = SAMPLE_RATE / 512  # 31.25 Hz for the default 32 ms frame


def multitone_at_bins(duration_s: float, bins=range(16, 241, 8), seed: int = 3) -> Waveform:
    """Tones at exact STFT bin centers; each frame then measures their
    inter-channel phase without any leakage skew."""
    n = int(duration_s * SAMPLE_RATE)
    t = np.arange(n) / SAMPLE_RATE
    rng = np.random.default_rng([seed, 42])
    x = np.zeros(n)
    for k in bins:
        x += np.sin(2 * np.pi * k * STFT_BIN_HZ * t + rng.uniform(0, 2 * np.pi))
    x /= np.sqrt(np.mean(x**2))
    return Waveform(samples=x[None, :], sample_rate=SAMPLE_RATE)


def dominant_bins(energy: np.ndarray, floor_rel: float = 1e-3) -> np.ndarray:
    """Boolean mask of local-maximum bins above the relative energy floor."""
    keep = np.zeros(energy.size, dtype=bool)
    keep[1:-1] = (energy[1:-1] > energy[:-2]) & (energy[1:-1] > energy[2:])
    return keep & (energy > energy.max() * floor_rel)


def mono(samples: np.ndarray, sample_rate: float = SAMPLE_RATE) -> Waveform:
    return Waveform(samples=np.asarray(samples)[None, :], sample_rate=sample_rate)
