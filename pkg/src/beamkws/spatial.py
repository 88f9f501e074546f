"""Inter-channel phase differences, angle features, and the network input.

The angle feature for a mic pair is the cosine distance between the measured
phase difference and the plane-wave phase expected from a hypothesized
arrival angle; it peaks at 1 when the hypothesis matches the true direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .geometry import ArrayGeometry, pair_phase_delta
from .stft import Spectrogram, magnitude

DEFAULT_PAIRS = ((0, 3), (1, 4), (2, 5))


@dataclass(frozen=True)
class PairSet:
    """Ordered mic index pairs used for phase features (0-based)."""

    pairs: tuple[tuple[int, int], ...] = DEFAULT_PAIRS

    def __post_init__(self) -> None:
        pairs = tuple((int(i), int(j)) for i, j in self.pairs)
        if not pairs:
            raise InputError("PairSet needs at least one pair")
        for i, j in pairs:
            if i == j:
                raise InputError(f"pair ({i}, {j}) must use two distinct mics")
            if i < 0 or j < 0:
                raise InputError(f"pair ({i}, {j}) has a negative mic index")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def validate_for(self, geom: ArrayGeometry) -> None:
        for i, j in self.pairs:
            geom.check_mic(i, "pair mic")
            geom.check_mic(j, "pair mic")


def pairs_from_config(entries, index_base: int = 1) -> PairSet:
    """Build a PairSet from config-file pairs.

    Config files index mics starting at ``index_base`` (default 1); internal
    indices are always 0-based.
    """
    if index_base not in (0, 1):
        raise InputError(f"index_base must be 0 or 1, got {index_base}")
    pairs = []
    for entry in entries:
        i, j = entry
        pairs.append((int(i) - index_base, int(j) - index_base))
    return PairSet(pairs=tuple(pairs))


@dataclass
class SpatialFeature:
    """Frame-aligned concatenation of magnitude and angle-feature blocks.

    data is (frames, freq * (1 + num_pairs)); ``blocks`` names each
    freq-wide block left to right, e.g. ("magnitude", "af_0_3", ...).
    """

    data: np.ndarray
    blocks: tuple[str, ...]
    bins_per_block: int

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise InputError(f"feature data must be 2-D, got shape {data.shape}")
        if data.shape[1] != self.bins_per_block * len(self.blocks):
            raise InputError(
                f"feature width {data.shape[1]} != {len(self.blocks)} blocks "
                f"x {self.bins_per_block} bins"
            )
        self.data = data

    def block(self, name: str) -> np.ndarray:
        if name not in self.blocks:
            raise InputError(f"unknown block {name!r}; have {self.blocks}")
        k = self.blocks.index(name)
        return self.data[:, k * self.bins_per_block : (k + 1) * self.bins_per_block]


def wrap_phase(x: np.ndarray) -> np.ndarray:
    """Wrap angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x), 2.0 * np.pi)


def ipd(spec: Spectrogram, pair: tuple[int, int]) -> np.ndarray:
    """Per-bin phase difference of channel i minus channel j, wrapped to (-pi, pi].

    Shape (frames, freq).
    """
    i, j = int(pair[0]), int(pair[1])
    for ch in (i, j):
        if not 0 <= ch < spec.num_channels:
            raise InputError(f"channel {ch} out of range for {spec.num_channels} channels")
    if i == j:
        raise InputError(f"pair must use two distinct channels, got ({i}, {j})")
    diff = np.angle(spec.bins[i]) - np.angle(spec.bins[j])
    return wrap_phase(diff)


def angle_feature(
    spec: Spectrogram,
    geom: ArrayGeometry,
    pairs: PairSet,
    theta_deg: float,
) -> np.ndarray:
    """Cosine of (measured IPD - expected phase delta) for each pair.

    Returns shape (num_pairs, frames, freq) with every value in [-1, 1];
    cosine absorbs phase wrapping, so no clamping is ever applied.
    """
    pairs.validate_for(geom)
    freqs = spec.freqs_hz
    out = np.empty((len(pairs), spec.num_frames, spec.num_freqs))
    for k, pair in enumerate(pairs.pairs):
        delta = pair_phase_delta(geom, pair, theta_deg, freqs)  # (F,)
        out[k] = np.cos(ipd(spec, pair) - delta[None, :])
    return out


def assemble_input(
    spec: Spectrogram,
    geom: ArrayGeometry,
    pairs: PairSet,
    theta_deg: float,
    magnitude_channel: int = 0,
) -> SpatialFeature:
    """Concatenate [magnitude | AF per pair] along the frequency axis."""
    mag = magnitude(spec, magnitude_channel)  # (T, F)
    af = angle_feature(spec, geom, pairs, theta_deg)  # (P, T, F)
    blocks = ["magnitude"] + [f"af_{i}_{j}" for i, j in pairs.pairs]
    data = np.concatenate([mag] + [af[k] for k in range(len(pairs))], axis=1)
    return SpatialFeature(data=data, blocks=tuple(blocks), bins_per_block=spec.num_freqs)
