"""RIFF WAV reading and writing (PCM 16-bit and IEEE float32, any channel count)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import FormatError, InputError
from .stft import Waveform

_INT_SCALES = {np.dtype(np.int16): 32768.0, np.dtype(np.int32): 2147483648.0}


def read_wav(path: str | Path) -> Waveform:
    """Read a WAV file into a float64 Waveform scaled to roughly [-1, 1].

    Channel order is preserved; integer PCM is divided by its full scale.
    """
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise FormatError(f"{path}: not a readable WAV file: {exc}")
    if data.ndim == 1:
        data = data[:, None]
    if data.dtype in _INT_SCALES:
        samples = data.astype(np.float64) / _INT_SCALES[data.dtype]
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise FormatError(f"{path}: unsupported WAV sample format {data.dtype}")
    # wavfile yields (frames, channels); Waveform wants (channels, frames)
    return Waveform(samples=samples.T, sample_rate=float(rate))


def write_wav(path: str | Path, wav: Waveform, encoding: str = "float32") -> None:
    """Write a Waveform as interleaved WAV, float32 by default."""
    data = wav.samples.T  # (frames, channels)
    if data.shape[1] == 1:
        data = data[:, 0]
    if encoding == "float32":
        payload = data.astype(np.float32)
    elif encoding == "pcm16":
        clipped = np.clip(data, -1.0, 1.0 - 1.0 / 32768.0)
        payload = np.round(clipped * 32768.0).astype(np.int16)
    else:
        raise InputError(f"unsupported encoding {encoding!r} (use 'float32' or 'pcm16')")
    wavfile.write(path, int(round(wav.sample_rate)), payload)
