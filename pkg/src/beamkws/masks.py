"""Time-frequency masks: oracle ratio masks and mask-file loading.

The oracle masks stand in for an external mask estimator; estimated masks
can be dropped in through :func:`load_mask` using the shared tensor file
format.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, ValidationError
from .stft import Spectrogram
from .tensorfile import parse_metadata, read_tensor, write_tensor

MASK_KINDS = ("speech", "noise")
IRM_FORMS = ("magnitude", "sqrt_energy")
DEFAULT_EPS = 1e-8


@dataclass
class TFMask:
    """Per-bin mask in [0, 1], shape (frames, freq)."""

    values: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise InputError(f"mask must be 2-D (frames, freq), got shape {values.shape}")
        bad = ~((values >= 0.0) & (values <= 1.0))
        if np.any(bad):
            t, f = map(int, np.argwhere(bad)[0])
            raise ValidationError(
                f"mask value {values[t, f]!r} at (frame {t}, bin {f}) outside [0, 1]"
            )
        if self.kind not in MASK_KINDS:
            raise InputError(f"mask kind must be one of {MASK_KINDS}, got {self.kind!r}")
        self.values = values

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def oracle_irm(
    clean: Spectrogram,
    noise: Spectrogram,
    channel: int = 0,
    form: str = "magnitude",
    eps: float = DEFAULT_EPS,
) -> tuple[TFMask, TFMask]:
    """Ideal ratio masks of speech and noise from reference spectrograms.

    ``form`` picks the ratio: "magnitude" uses |S| / (|S| + |N|),
    "sqrt_energy" uses sqrt(|S|^2 / (|S|^2 + |N|^2)). The regularizer
    ``eps`` is scaled by the peak total magnitude so masks are invariant to
    a common gain on both inputs; it only guards all-silent bins.

    Returns (speech mask, noise mask); with the magnitude form the two sum
    to just under 1 wherever there is any energy.
    """
    if clean.bins.shape != noise.bins.shape:
        raise InputError(
            f"clean and noise shapes differ: {clean.bins.shape} vs {noise.bins.shape}"
        )
    if (clean.frame_len_samples, clean.hop_samples) != (noise.frame_len_samples, noise.hop_samples):
        raise InputError("clean and noise spectrograms use different STFT parameters")
    if not 0 <= channel < clean.num_channels:
        raise InputError(f"channel {channel} out of range for {clean.num_channels} channels")
    if form not in IRM_FORMS:
        raise InputError(f"form must be one of {IRM_FORMS}, got {form!r}")

    s = np.abs(clean.bins[channel])
    n = np.abs(noise.bins[channel])
    if form == "sqrt_energy":
        s = s * s
        n = n * n
    total = s + n
    scale = total.max()
    denom = total + eps * (scale if scale > 0 else 1.0)
    m_speech = s / denom
    m_noise = n / denom
    if form == "sqrt_energy":
        m_speech = np.sqrt(m_speech)
        m_noise = np.sqrt(m_noise)
    return TFMask(values=m_speech, kind="speech"), TFMask(values=m_noise, kind="noise")


def save_mask(mask: TFMask, path: str | Path) -> None:
    """Write a mask as a float32 tensor file with its kind in the metadata."""
    write_tensor(path, mask.values.astype(np.float32), metadata=f"tfmask v1; kind={mask.kind}")


def load_mask(path: str | Path, expected_shape: tuple[int, int] | None = None) -> TFMask:
    """Load a mask file, rejecting (not clamping) out-of-range values."""
    values, metadata = read_tensor(path)
    if values.ndim != 2:
        raise ValidationError(f"{path}: mask tensor must be 2-D, got {values.shape}")
    if expected_shape is not None and tuple(values.shape) != tuple(expected_shape):
        raise InputError(
            f"{path}: mask shape {tuple(values.shape)} does not match expected {tuple(expected_shape)}"
        )
    kind = parse_metadata(metadata).get("kind", "speech")
    try:
        return TFMask(values=values.astype(np.float64), kind=kind)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}")
