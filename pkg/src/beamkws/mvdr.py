"""Mask-based MVDR beamforming: covariances, weights, and enhancement.

Covariances are mask-weighted outer-product averages per frequency. The
weight rule is the trace-normalized product form

    w_f = ((R_f^N)^-1 R_f^S / tr((R_f^N)^-1 R_f^S)) u_f

with u_f the one-hot reference-mic selector, solved once per utterance.
Degenerate bins (no mask mass, or vanishing trace) pass the reference
channel through unchanged instead of going silent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .geometry import ArrayGeometry
from .masks import TFMask
from .runtime import run_chunked
from .stft import Spectrogram, Waveform, istft, stft

MASS_FLOOR = 1e-10
TRACE_FLOOR = 1e-12
DEFAULT_DIAGONAL_LOADING = 1e-6


@dataclass
class CovarianceSet:
    """Per-frequency speech/noise covariance matrices and their mask mass.

    speech/noise: (F, C, C) complex Hermitian; mass_*: (F,) sums of the
    mask over frames. Bins whose mask mass fell below the floor hold an
    identity placeholder and are flagged in ``degenerate``.
    """

    speech: np.ndarray
    noise: np.ndarray
    mass_speech: np.ndarray
    mass_noise: np.ndarray
    degenerate: np.ndarray

    @property
    def num_freqs(self) -> int:
        return self.speech.shape[0]

    @property
    def num_channels(self) -> int:
        return self.speech.shape[1]


def _masked_covariance(bins: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mask-weighted covariance per frequency.

    Arguments:
        bins: (C, T, F) complex observations
        mask: (T, F) real weights
    Returns:
        cov: (F, C, C), mass: (F,), degenerate: (F,) bool
    """
    mass = mask.sum(axis=0)  # (F,)
    weighted = bins * mask[None, :, :]  # (C, T, F)
    cov = np.einsum("itf,jtf->fij", weighted, bins.conj())
    degenerate = mass < MASS_FLOOR
    safe_mass = np.where(degenerate, 1.0, mass)
    cov = cov / safe_mass[:, None, None]
    eye = np.eye(bins.shape[0], dtype=np.complex128)
    cov[degenerate] = eye
    # exact Hermitian symmetry, killing accumulation drift
    cov = 0.5 * (cov + np.conj(np.swapaxes(cov, 1, 2)))
    return cov, mass, degenerate


def estimate_covariances(
    spec: Spectrogram,
    speech_mask: TFMask,
    noise_mask: TFMask,
) -> CovarianceSet:
    """Mask-weighted speech and noise covariance matrices per frequency."""
    expected = (spec.num_frames, spec.num_freqs)
    for mask in (speech_mask, noise_mask):
        if mask.shape != expected:
            raise InputError(
                f"{mask.kind} mask shape {mask.shape} does not match spectrogram {expected}"
            )
    r_s, mass_s, degen_s = _masked_covariance(spec.bins, speech_mask.values)
    r_n, mass_n, degen_n = _masked_covariance(spec.bins, noise_mask.values)
    return CovarianceSet(
        speech=r_s,
        noise=r_n,
        mass_speech=mass_s,
        mass_noise=mass_n,
        degenerate=degen_s | degen_n,
    )


@dataclass
class BeamformerWeights:
    """Per-frequency complex weight vectors, shape (F, C).

    ``degenerate`` marks bins where the solve fell back to the one-hot
    reference selector (pass-through).
    """

    weights: np.ndarray
    reference_mic: int
    degenerate: np.ndarray

    @property
    def num_freqs(self) -> int:
        return self.weights.shape[0]

    @property
    def num_channels(self) -> int:
        return self.weights.shape[1]


def solve_weights(
    cov: CovarianceSet,
    diagonal_loading: float = DEFAULT_DIAGONAL_LOADING,
    reference_mic: int = 0,
    threads: int | None = None,
) -> BeamformerWeights:
    """Trace-normalized MVDR weights from a covariance set.

    The noise covariance is regularized to R^N + loading * (tr(R^N)/C) * I
    before the solve; the trace normalizer is computed after regularization.
    Bins flagged degenerate, or whose trace magnitude falls below 1e-12, get
    the one-hot reference selector.
    """
    num_freqs, num_ch = cov.num_freqs, cov.num_channels
    if num_ch < 2:
        raise InputError(f"MVDR needs at least 2 channels, got {num_ch}")
    if not 0 <= reference_mic < num_ch:
        raise InputError(f"reference mic {reference_mic} out of range for {num_ch} channels")
    if diagonal_loading < 0:
        raise InputError(f"diagonal_loading must be >= 0, got {diagonal_loading}")

    eye = np.eye(num_ch, dtype=np.complex128)
    one_hot = np.zeros(num_ch, dtype=np.complex128)
    one_hot[reference_mic] = 1.0

    weights = np.tile(one_hot, (num_freqs, 1))
    fallback = cov.degenerate.copy()

    def solve_range(start: int, stop: int) -> None:
        for f in range(start, stop):
            if fallback[f]:
                continue
            r_n = cov.noise[f]
            trace_n = np.real(np.trace(r_n))
            loaded = r_n + diagonal_loading * (trace_n / num_ch) * eye
            try:
                prod = np.linalg.solve(loaded, cov.speech[f])  # (R^N)^-1 R^S
            except np.linalg.LinAlgError:
                fallback[f] = True
                continue
            trace = np.trace(prod)
            if not np.isfinite(trace) or abs(trace) < TRACE_FLOOR:
                fallback[f] = True
                continue
            w = prod[:, reference_mic] / trace
            if not np.all(np.isfinite(w)):
                fallback[f] = True
                continue
            weights[f] = w

    run_chunked(solve_range, num_freqs, threads=threads)
    return BeamformerWeights(weights=weights, reference_mic=reference_mic, degenerate=fallback)


def apply_weights(spec: Spectrogram, w: BeamformerWeights) -> Spectrogram:
    """Beamform: out[t, f] = w_f^H y[:, t, f], returning one channel."""
    if w.num_channels != spec.num_channels:
        raise InputError(
            f"weights expect {w.num_channels} channels, spectrogram has {spec.num_channels}"
        )
    if w.num_freqs != spec.num_freqs:
        raise InputError(
            f"weights cover {w.num_freqs} bins, spectrogram has {spec.num_freqs}"
        )
    out = np.einsum("fc,ctf->tf", w.weights.conj(), spec.bins)
    return Spectrogram(
        bins=out[None, :, :],
        sample_rate=spec.sample_rate,
        frame_len_samples=spec.frame_len_samples,
        hop_samples=spec.hop_samples,
        window_kind=spec.window_kind,
    )


def enhance(
    wav: Waveform,
    geom: ArrayGeometry,
    speech_mask: TFMask,
    noise_mask: TFMask,
    frame_ms: float = 32.0,
    hop_ms: float = 16.0,
    diagonal_loading: float = DEFAULT_DIAGONAL_LOADING,
) -> Waveform:
    """Full mask-based MVDR chain: STFT, covariances, weights, inverse STFT.

    Deterministic given its inputs; output is mono with the input's length.
    """
    if wav.num_channels != geom.num_mics:
        raise InputError(
            f"waveform has {wav.num_channels} channels but geometry has {geom.num_mics} mics"
        )
    spec = stft(wav, frame_ms=frame_ms, hop_ms=hop_ms)
    cov = estimate_covariances(spec, speech_mask, noise_mask)
    w = solve_weights(cov, diagonal_loading=diagonal_loading, reference_mic=geom.reference_mic)
    enhanced = istft(apply_weights(spec, w))
    return Waveform(samples=enhanced.samples[:, : wav.num_samples], sample_rate=wav.sample_rate)
