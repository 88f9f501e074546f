"""Microphone-array topology, camera-region mapping, and plane-wave phases.

Angle convention: 0 degrees is array broadside (arrival from +y), positive
angles rotate toward +x, all in the z = 0 plane. The camera field of view is
assumed centered on broadside; ``BeamGrid.orientation_offset_deg`` absorbs
any mounting mismatch. Config files carry degrees, everything internal is
radians.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError

DEFAULT_SPEED_OF_SOUND = 343.0
DEFAULT_NUM_MICS = 6
DEFAULT_MIC_SPACING = 0.035


@dataclass(frozen=True)
class ArrayGeometry:
    """Microphone positions in meters plus the reference microphone index.

    mic_positions has shape (C, 3); the array topology is the sole source of
    the expected inter-channel phase pattern for a hypothesized arrival
    angle (see :func:`pair_phase_delta`).
    """

    mic_positions: np.ndarray
    reference_mic: int = 0
    speed_of_sound: float = DEFAULT_SPEED_OF_SOUND

    def __post_init__(self) -> None:
        pos = np.asarray(self.mic_positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise InputError(f"mic_positions must have shape (C, 3), got {pos.shape}")
        if pos.shape[0] < 2:
            raise InputError("an array needs at least 2 microphones")
        if not np.all(np.isfinite(pos)):
            raise InputError("mic positions must be finite")
        dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
        np.fill_diagonal(dist, np.inf)
        if np.any(dist == 0.0):
            i, j = map(int, np.argwhere(dist == 0.0)[0])
            raise InputError(f"microphones {i} and {j} share identical coordinates")
        if not 0 <= int(self.reference_mic) < pos.shape[0]:
            raise InputError(
                f"reference_mic {self.reference_mic} out of range for {pos.shape[0]} mics"
            )
        if not self.speed_of_sound > 0:
            raise InputError(f"speed_of_sound must be positive, got {self.speed_of_sound}")
        object.__setattr__(self, "mic_positions", pos)
        object.__setattr__(self, "reference_mic", int(self.reference_mic))
        object.__setattr__(self, "speed_of_sound", float(self.speed_of_sound))

    @property
    def num_mics(self) -> int:
        return self.mic_positions.shape[0]

    def check_mic(self, index: int, what: str = "mic") -> int:
        index = int(index)
        if not 0 <= index < self.num_mics:
            raise InputError(f"{what} index {index} out of range for {self.num_mics} mics")
        return index


def default_array(num_mics: int = DEFAULT_NUM_MICS, spacing: float = DEFAULT_MIC_SPACING) -> ArrayGeometry:
    """Uniform linear array along +x with mic 0 at the origin as reference."""
    x = np.arange(num_mics, dtype=np.float64) * spacing
    pos = np.stack([x, np.zeros(num_mics), np.zeros(num_mics)], axis=1)
    return ArrayGeometry(mic_positions=pos, reference_mic=0)


def geometry_from_dict(data: dict) -> ArrayGeometry:
    """Build geometry from ``{"mics": [[x,y,z],...], "reference": int, "speed_of_sound": float}``."""
    if "mics" not in data:
        raise InputError("geometry config is missing the 'mics' list")
    return ArrayGeometry(
        mic_positions=np.asarray(data["mics"], dtype=np.float64),
        reference_mic=int(data.get("reference", 0)),
        speed_of_sound=float(data.get("speed_of_sound", DEFAULT_SPEED_OF_SOUND)),
    )


def geometry_to_dict(geom: ArrayGeometry) -> dict:
    return {
        "mics": geom.mic_positions.tolist(),
        "reference": geom.reference_mic,
        "speed_of_sound": geom.speed_of_sound,
    }


def load_geometry(path: str | Path) -> ArrayGeometry:
    with open(path, "r", encoding="utf-8") as fh:
        return geometry_from_dict(json.load(fh))


@dataclass(frozen=True)
class BeamGrid:
    """Horizontal split of the camera frame into equal-width beams."""

    num_regions: int = 6
    field_of_view_deg: float = 120.0
    orientation_offset_deg: float = 0.0

    def __post_init__(self) -> None:
        if int(self.num_regions) < 1:
            raise InputError(f"num_regions must be >= 1, got {self.num_regions}")
        if not 0.0 < float(self.field_of_view_deg) <= 360.0:
            raise InputError(
                f"field_of_view_deg must be in (0, 360], got {self.field_of_view_deg}"
            )
        object.__setattr__(self, "num_regions", int(self.num_regions))
        object.__setattr__(self, "field_of_view_deg", float(self.field_of_view_deg))
        object.__setattr__(self, "orientation_offset_deg", float(self.orientation_offset_deg))

    @property
    def region_width_deg(self) -> float:
        return self.field_of_view_deg / self.num_regions


@dataclass(frozen=True)
class LipROI:
    """Pixel bounding box of the speaker's lips within one video frame."""

    frame_width_px: int
    box: tuple[float, float, float, float]  # (x_min, y_min, x_max, y_max)

    def __post_init__(self) -> None:
        if int(self.frame_width_px) <= 0:
            raise InputError(f"frame_width_px must be positive, got {self.frame_width_px}")
        box = tuple(float(v) for v in self.box)
        if len(box) != 4:
            raise InputError(f"box must have 4 entries, got {len(box)}")
        x_min, y_min, x_max, y_max = box
        if not 0.0 <= x_min < x_max <= float(self.frame_width_px):
            raise InputError(
                f"box x-range [{x_min}, {x_max}] invalid for frame width {self.frame_width_px}"
            )
        # No frame-height field exists, so only ordering is checked for y.
        if not 0.0 <= y_min < y_max:
            raise InputError(f"box y-range [{y_min}, {y_max}] invalid")
        object.__setattr__(self, "frame_width_px", int(self.frame_width_px))
        object.__setattr__(self, "box", box)

    @property
    def x_center(self) -> float:
        return 0.5 * (self.box[0] + self.box[2])


def region_of_roi(roi: LipROI, grid: BeamGrid) -> int:
    """Region index of a lip box, 0-based left to right.

    Uses floor(num_regions * x_center / frame_width); a center exactly on a
    boundary belongs to the region on its right. Clamped to the valid range
    so x_center == frame_width maps to the last region.
    """
    raw = math.floor(grid.num_regions * roi.x_center / roi.frame_width_px)
    return min(max(raw, 0), grid.num_regions - 1)


def region_center_angle(region: int, grid: BeamGrid) -> float:
    """Central angle (degrees) of a beam region."""
    region = int(region)
    if not 0 <= region < grid.num_regions:
        raise InputError(f"region {region} out of range for {grid.num_regions} regions")
    return (
        -0.5 * grid.field_of_view_deg
        + (region + 0.5) * grid.region_width_deg
        + grid.orientation_offset_deg
    )


def region_majority(regions: Iterable[int]) -> int:
    """Most frequent region id across frames; ties go to the smaller id."""
    counts = Counter(int(r) for r in regions)
    if not counts:
        raise InputError("no region ids given")
    best = max(counts.items(), key=lambda kv: (kv[1], -kv[0]))
    return best[0]


def load_roi_file(path: str | Path) -> list[tuple[int, LipROI]]:
    """Read ``{"frame_width": int, "boxes": [{"t",...box fields...}]}``.

    Returns (frame_index, LipROI) pairs in file order.
    """
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if "frame_width" not in data or "boxes" not in data:
        raise InputError("ROI file needs 'frame_width' and 'boxes'")
    width = int(data["frame_width"])
    out = []
    for k, box in enumerate(data["boxes"]):
        try:
            roi = LipROI(
                frame_width_px=width,
                box=(box["x_min"], box["y_min"], box["x_max"], box["y_max"]),
            )
        except KeyError as exc:
            raise InputError(f"ROI box {k} is missing field {exc}")
        out.append((int(box.get("t", k)), roi))
    if not out:
        raise InputError("ROI file contains no boxes")
    return out


def arrival_unit_vector(theta_deg: float) -> np.ndarray:
    """Unit vector pointing from the array toward a source at ``theta_deg``."""
    theta = math.radians(theta_deg)
    return np.array([math.sin(theta), math.cos(theta), 0.0])


def mic_lead_times(geom: ArrayGeometry, theta_deg: float) -> np.ndarray:
    """Seconds by which each mic leads the coordinate origin, shape (C,).

    A plane wave from ``theta_deg`` reaches mics closer to the source
    earlier; their lead time is positive. Arrival delay is the negation.
    """
    return geom.mic_positions @ arrival_unit_vector(theta_deg) / geom.speed_of_sound


def pair_phase_delta(
    geom: ArrayGeometry,
    pair: tuple[int, int],
    theta_deg: float,
    freqs_hz: Sequence[float] | np.ndarray,
) -> np.ndarray:
    """Expected inter-channel phase difference of pair (i, j) over frequency.

    Far-field plane-wave model: delta(f) = 2*pi*f*(tau_i - tau_j) with tau
    the per-mic lead times for the hypothesized angle. Radians, not wrapped;
    the value is what channel i's phase exceeds channel j's by when a plane
    wave actually arrives from ``theta_deg``.
    """
    i, j = pair
    i = geom.check_mic(i, "pair mic i")
    j = geom.check_mic(j, "pair mic j")
    if i == j:
        raise InputError(f"pair must use two distinct mics, got ({i}, {j})")
    freqs = np.asarray(freqs_hz, dtype=np.float64)
    if np.any(freqs < 0):
        raise InputError("frequencies must be non-negative")
    tau = mic_lead_times(geom, theta_deg)
    return 2.0 * np.pi * freqs * (tau[i] - tau[j])
