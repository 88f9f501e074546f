"""Multichannel waveforms and their complex time-frequency representation.

Analysis/synthesis both use a square-root periodic Hann window; together
with per-sample overlap normalization this reconstructs exactly on every
sample the window covers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError

DEFAULT_FRAME_MS = 32.0
DEFAULT_HOP_MS = 16.0
WINDOW_SQRT_HANN = "sqrt_hann"
WINDOW_HANN = "hann"
WINDOW_KINDS = (WINDOW_SQRT_HANN, WINDOW_HANN)


@dataclass
class Waveform:
    """Time-domain signal, ``samples`` shaped (channels, time)."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[None, :]
        if samples.ndim != 2:
            raise InputError(f"samples must be (channels, time), got shape {samples.shape}")
        if samples.shape[1] == 0:
            raise InputError("waveform is empty")
        if not self.sample_rate > 0:
            raise InputError(f"sample_rate must be positive, got {self.sample_rate}")
        self.samples = samples
        self.sample_rate = float(self.sample_rate)

    @property
    def num_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.num_samples / self.sample_rate

    def channel(self, index: int) -> np.ndarray:
        if not 0 <= index < self.num_channels:
            raise InputError(f"channel {index} out of range for {self.num_channels} channels")
        return self.samples[index]


@dataclass
class Spectrogram:
    """One-sided complex STFT, ``bins`` shaped (channels, frames, freq)."""

    bins: np.ndarray
    sample_rate: float
    frame_len_samples: int
    hop_samples: int
    window_kind: str = WINDOW_SQRT_HANN

    def __post_init__(self) -> None:
        bins = np.asarray(self.bins)
        if not np.iscomplexobj(bins):
            bins = bins.astype(np.complex128)
        if bins.ndim != 3:
            raise InputError(f"bins must be (channels, frames, freq), got shape {bins.shape}")
        if self.frame_len_samples < 2 or self.frame_len_samples % 2 != 0:
            raise InputError(f"frame_len_samples must be even and >= 2, got {self.frame_len_samples}")
        if not 0 < self.hop_samples <= self.frame_len_samples:
            raise InputError(
                f"hop_samples must be in (0, frame_len], got {self.hop_samples} "
                f"vs frame {self.frame_len_samples}"
            )
        expected_freq = self.frame_len_samples // 2 + 1
        if bins.shape[2] != expected_freq:
            raise InputError(
                f"freq dimension {bins.shape[2]} does not match frame length "
                f"{self.frame_len_samples} (expected {expected_freq})"
            )
        self.bins = bins.astype(np.complex128, copy=False)
        self.sample_rate = float(self.sample_rate)
        self.frame_len_samples = int(self.frame_len_samples)
        self.hop_samples = int(self.hop_samples)

    @property
    def num_channels(self) -> int:
        return self.bins.shape[0]

    @property
    def num_frames(self) -> int:
        return self.bins.shape[1]

    @property
    def num_freqs(self) -> int:
        return self.bins.shape[2]

    @property
    def freqs_hz(self) -> np.ndarray:
        return np.fft.rfftfreq(self.frame_len_samples, d=1.0 / self.sample_rate)


def analysis_window(kind: str, frame_len: int) -> np.ndarray:
    """Window samples: periodic Hann or its square root (the default)."""
    if kind not in WINDOW_KINDS:
        raise ConfigError(f"unsupported window kind {kind!r}; expected one of {WINDOW_KINDS}")
    n = np.arange(frame_len)
    hann = 0.5 * (1.0 - np.cos(2.0 * np.pi * n / frame_len))
    return np.sqrt(hann) if kind == WINDOW_SQRT_HANN else hann


def _frame_params(sample_rate: float, frame_ms: float, hop_ms: float) -> tuple[int, int]:
    frame_len = int(round(sample_rate * frame_ms / 1000.0))
    hop = int(round(sample_rate * hop_ms / 1000.0))
    if frame_len < 2 or frame_len % 2 != 0:
        raise InputError(
            f"frame of {frame_ms} ms at {sample_rate} Hz gives {frame_len} samples; "
            "needs an even count >= 2"
        )
    if not 0 < hop <= frame_len:
        raise InputError(f"hop of {hop_ms} ms gives {hop} samples, outside (0, {frame_len}]")
    return frame_len, hop


def stft(
    wav: Waveform,
    frame_ms: float = DEFAULT_FRAME_MS,
    hop_ms: float = DEFAULT_HOP_MS,
    window: str = WINDOW_SQRT_HANN,
) -> Spectrogram:
    """One-sided STFT of every channel.

    The signal must span at least one frame; a trailing partial frame is
    zero-padded rather than dropped, so the frame grid always covers the
    whole signal.
    """
    frame_len, hop = _frame_params(wav.sample_rate, frame_ms, hop_ms)
    length = wav.num_samples
    if length < frame_len:
        raise InputError(f"signal of {length} samples is shorter than one frame ({frame_len})")
    num_frames = 1 + int(np.ceil((length - frame_len) / hop))
    padded_len = frame_len + (num_frames - 1) * hop
    win = analysis_window(window, frame_len)

    padded = np.zeros((wav.num_channels, padded_len))
    padded[:, :length] = wav.samples
    # (C, T, frame_len) view over the padded signal
    frames = np.lib.stride_tricks.sliding_window_view(padded, frame_len, axis=1)[:, ::hop, :]
    bins = np.fft.rfft(frames * win, axis=-1)
    return Spectrogram(
        bins=bins,
        sample_rate=wav.sample_rate,
        frame_len_samples=frame_len,
        hop_samples=hop,
        window_kind=window,
    )


def istft(spec: Spectrogram) -> Waveform:
    """Overlap-add inverse of :func:`stft`.

    Returns the full padded frame-grid length, frame_len + (T-1)*hop;
    callers that know the original signal length trim it. Reconstruction is
    exact (to float rounding) wherever the synthesis windows give nonzero
    coverage, which for sqrt-Hann means every sample except the very first.
    """
    win = analysis_window(spec.window_kind, spec.frame_len_samples)
    frame_len, hop = spec.frame_len_samples, spec.hop_samples
    num_frames = spec.num_frames
    out_len = frame_len + (num_frames - 1) * hop

    coverage = np.zeros(out_len)
    win_sq = win * win
    for t in range(num_frames):
        coverage[t * hop : t * hop + frame_len] += win_sq
    interior = coverage[frame_len : out_len - frame_len]
    if interior.size and interior.max() > 0 and interior.min() < 1e-6 * interior.max():
        raise ConfigError(
            "window/hop combination leaves uncovered samples; cannot reconstruct"
        )

    frames = np.fft.irfft(spec.bins, n=frame_len, axis=-1) * win
    acc = np.zeros((spec.num_channels, out_len))
    for t in range(num_frames):
        acc[:, t * hop : t * hop + frame_len] += frames[:, t, :]
    samples = np.where(coverage > 1e-12, acc / np.maximum(coverage, 1e-12), 0.0)
    return Waveform(samples=samples, sample_rate=spec.sample_rate)


def magnitude(spec: Spectrogram, channel: int) -> np.ndarray:
    """Element-wise magnitude of one channel, shape (frames, freq)."""
    if not 0 <= channel < spec.num_channels:
        raise InputError(f"channel {channel} out of range for {spec.num_channels} channels")
    return np.abs(spec.bins[channel])
