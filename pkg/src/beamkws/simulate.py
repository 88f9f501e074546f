"""Synthetic multichannel far-field scenes with exact ground truth.

Sources are rendered anechoically: each mono signal is multiplied in the
frequency domain by the plane-wave phase for its arrival angle, channel by
channel, on the full signal length (periodic boundary). That keeps every
inter-channel relationship analytically exact, so feature and beamformer
tests have closed-form expectations. Diffuse and sensor noise are spatially
white Gaussian streams keyed by (seed, role, channel), which makes renders
bit-reproducible regardless of evaluation order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError
from .geometry import ArrayGeometry, default_array, geometry_from_dict, mic_lead_times
from .stft import Waveform

SI_SNR_CAP_DB = 60.0
_STREAM_SOURCE = 1
_STREAM_DIFFUSE = 2
_STREAM_SENSOR = 3


@dataclass
class SourceSpec:
    """One far-field point source: a mono signal, arrival angle, and gain."""

    signal: Waveform
    angle_deg: float
    gain_db: float = 0.0

    def __post_init__(self) -> None:
        if self.signal.num_channels != 1:
            raise InputError(f"source signals must be mono, got {self.signal.num_channels} channels")
        if not -180.0 < self.angle_deg <= 180.0:
            raise InputError(f"angle_deg must be in (-180, 180], got {self.angle_deg}")


@dataclass
class SceneSpec:
    """Everything needed to render a scene deterministically."""

    geometry: ArrayGeometry
    sources: list[SourceSpec]
    diffuse_noise_snr_db: float | None = None
    sensor_noise_snr_db: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.sources:
            raise InputError("a scene needs at least one source")
        rates = {src.signal.sample_rate for src in self.sources}
        if len(rates) != 1:
            raise InputError(f"all source signals must share a sample rate, got {sorted(rates)}")
        lengths = {src.signal.num_samples for src in self.sources}
        if len(lengths) != 1:
            raise InputError(f"all source signals must share a length, got {sorted(lengths)}")

    @property
    def sample_rate(self) -> float:
        return self.sources[0].signal.sample_rate

    @property
    def num_samples(self) -> int:
        return self.sources[0].signal.num_samples


@dataclass
class SceneRender:
    """Rendered scene; mixture == sum(source_images) + noise_image exactly."""

    mixture: Waveform
    source_images: list[Waveform]
    noise_image: Waveform


def render_source_image(
    signal: np.ndarray,
    geom: ArrayGeometry,
    angle_deg: float,
    sample_rate: float,
) -> np.ndarray:
    """Render a mono signal to all mics of the array, shape (C, N).

    Each channel is the source advanced by that mic's plane-wave lead time,
    applied as a frequency-domain phase ramp over the full (periodic)
    signal, so measured inter-channel phase differences equal
    :func:`beamkws.geometry.pair_phase_delta` bin for bin.
    """
    signal = np.asarray(signal, dtype=np.float64).reshape(-1)
    n = signal.size
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)  # (F,)
    spectrum = np.fft.rfft(signal)  # (F,)
    if n % 2 == 0:
        # the band-edge coefficient of a real signal cannot carry a
        # fractional phase shift; render strictly below Nyquist
        spectrum[-1] = 0.0
    tau = mic_lead_times(geom, angle_deg)  # (C,)
    phases = np.exp(2j * np.pi * freqs[None, :] * tau[:, None])  # (C, F)
    return np.fft.irfft(spectrum[None, :] * phases, n=n, axis=-1)


def _noise(shape: tuple[int, ...], seed: int, stream: int) -> np.ndarray:
    channels, n = shape
    out = np.empty(shape)
    for c in range(channels):
        rng = np.random.default_rng([seed, stream, c])
        out[c] = rng.standard_normal(n)
    return out


def simulate(scene: SceneSpec) -> SceneRender:
    """Render a scene: per-source mic images, a noise image, and their sum.

    Noise levels are set against the mean power of the summed source images,
    so ``*_snr_db`` is the SNR of (all sources) over that noise stream.
    """
    geom = scene.geometry
    n = scene.num_samples
    rate = scene.sample_rate

    images = []
    for src in scene.sources:
        gain = 10.0 ** (src.gain_db / 20.0)
        img = gain * render_source_image(src.signal.samples[0], geom, src.angle_deg, rate)
        images.append(img)
    clean = np.sum(images, axis=0)  # (C, N)
    clean_power = float(np.mean(clean**2))

    noise = np.zeros_like(clean)
    for snr_db, stream in (
        (scene.diffuse_noise_snr_db, _STREAM_DIFFUSE),
        (scene.sensor_noise_snr_db, _STREAM_SENSOR),
    ):
        if snr_db is None:
            continue
        draw = _noise(clean.shape, scene.seed, stream)
        target_power = clean_power * 10.0 ** (-snr_db / 10.0)
        noise += np.sqrt(target_power) * draw

    mixture = clean + noise
    return SceneRender(
        mixture=Waveform(samples=mixture, sample_rate=rate),
        source_images=[Waveform(samples=img, sample_rate=rate) for img in images],
        noise_image=Waveform(samples=noise, sample_rate=rate),
    )


def si_snr(estimate: Waveform, reference: Waveform, cap_db: float = SI_SNR_CAP_DB) -> float:
    """Scale-invariant SNR in dB, clipped to +-cap_db.

    Projects the estimate onto the reference; the projection is the target
    and the remainder is the residual.
    """
    if estimate.num_channels != 1 or reference.num_channels != 1:
        raise InputError("si_snr expects mono waveforms")
    if estimate.num_samples != reference.num_samples:
        raise InputError(
            f"length mismatch: estimate {estimate.num_samples} vs reference {reference.num_samples}"
        )
    ref = reference.samples[0]
    est = estimate.samples[0]
    ref_energy = float(np.dot(ref, ref))
    if ref_energy == 0.0:
        raise InputError("reference signal is identically zero")
    target = (np.dot(est, ref) / ref_energy) * ref
    residual = est - target
    target_power = float(np.dot(target, target))
    residual_power = float(np.dot(residual, residual))
    with np.errstate(divide="ignore"):
        ratio_db = 10.0 * np.log10(target_power / residual_power) if residual_power > 0 else np.inf
        if target_power == 0.0:
            ratio_db = -np.inf
    return float(np.clip(ratio_db, -cap_db, cap_db))


def delay_and_sum(wav: Waveform, geom: ArrayGeometry, theta_deg: float) -> Waveform:
    """Fixed beamformer baseline: align channels for ``theta_deg``, average.

    Alignment compensates each channel's plane-wave lead relative to the
    reference mic via frequency-domain phase ramps (periodic boundary), so a
    noiseless source at exactly ``theta_deg`` reproduces its reference-
    channel image.
    """
    if wav.num_channels != geom.num_mics:
        raise InputError(
            f"waveform has {wav.num_channels} channels but geometry has {geom.num_mics} mics"
        )
    n = wav.num_samples
    freqs = np.fft.rfftfreq(n, d=1.0 / wav.sample_rate)
    tau = mic_lead_times(geom, theta_deg)
    shifts = tau[geom.reference_mic] - tau  # (C,)
    spectra = np.fft.rfft(wav.samples, axis=-1)
    aligned = spectra * np.exp(2j * np.pi * freqs[None, :] * shifts[:, None])
    out = np.fft.irfft(aligned.mean(axis=0), n=n)
    return Waveform(samples=out[None, :], sample_rate=wav.sample_rate)


# --- deterministic source signals -------------------------------------------


def _unit_rms(x: np.ndarray) -> np.ndarray:
    rms = np.sqrt(np.mean(x**2))
    return x / rms if rms > 0 else x


def tone_complex(
    duration_s: float,
    sample_rate: float,
    f0_hz: float = 350.0,
    num_harmonics: int = 20,
    am_hz: float = 4.0,
    am_depth: float = 1.0,
    decay: float = 0.5,
    seed: int = 0,
) -> np.ndarray:
    """Harmonic stack with syllable-rate amplitude modulation, unit RMS.

    Harmonic k gets amplitude k**-decay; am_depth 1 modulates all the way to
    silence, which gives mask-based processing the quiet gaps real speech has.
    """
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    rng = np.random.default_rng([seed, _STREAM_SOURCE, 0])
    phases = rng.uniform(0.0, 2.0 * np.pi, size=num_harmonics)
    x = np.zeros(n)
    nyquist = sample_rate / 2.0
    for k in range(1, num_harmonics + 1):
        f = k * f0_hz
        if f >= nyquist:
            break
        x += np.sin(2.0 * np.pi * f * t + phases[k - 1]) * k ** (-decay)
    envelope = 1.0 - am_depth * 0.5 * (1.0 + np.cos(2.0 * np.pi * am_hz * t))
    return _unit_rms(x * envelope)


def speech_shaped_noise(
    duration_s: float,
    sample_rate: float,
    knee_hz: float = 500.0,
    seed: int = 0,
) -> np.ndarray:
    """Gaussian noise with a first-order low-pass tilt above ``knee_hz``, unit RMS."""
    n = int(round(duration_s * sample_rate))
    rng = np.random.default_rng([seed, _STREAM_SOURCE, 1])
    white = rng.standard_normal(n)
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    shape = 1.0 / np.sqrt(1.0 + (freqs / knee_hz) ** 2)
    shaped = np.fft.irfft(np.fft.rfft(white) * shape, n=n)
    return _unit_rms(shaped)


def white_noise(duration_s: float, sample_rate: float, seed: int = 0, channel: int = 2) -> np.ndarray:
    n = int(round(duration_s * sample_rate))
    rng = np.random.default_rng([seed, _STREAM_SOURCE, channel])
    return _unit_rms(rng.standard_normal(n))


_SIGNAL_KINDS = ("tone_complex", "speech_shaped_noise", "white_noise", "wav")


def synthesize_signal(spec: dict, sample_rate: float, seed: int, base_dir: Path | None = None) -> Waveform:
    """Build a mono source signal from its JSON description."""
    kind = spec.get("kind")
    if kind not in _SIGNAL_KINDS:
        raise InputError(f"unknown signal kind {kind!r}; expected one of {_SIGNAL_KINDS}")
    if kind == "wav":
        from .wavio import read_wav

        path = Path(spec["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        wav = read_wav(path)
        if wav.num_channels != 1:
            raise InputError(f"{path}: source WAV must be mono")
        if wav.sample_rate != sample_rate:
            raise InputError(
                f"{path}: sample rate {wav.sample_rate} does not match scene rate {sample_rate}"
            )
        return wav
    duration = float(spec.get("duration_s", 10.0))
    if kind == "tone_complex":
        samples = tone_complex(
            duration,
            sample_rate,
            f0_hz=float(spec.get("f0_hz", 350.0)),
            num_harmonics=int(spec.get("harmonics", 20)),
            am_hz=float(spec.get("am_hz", 4.0)),
            am_depth=float(spec.get("am_depth", 1.0)),
            decay=float(spec.get("decay", 0.5)),
            seed=seed,
        )
    elif kind == "speech_shaped_noise":
        samples = speech_shaped_noise(
            duration, sample_rate, knee_hz=float(spec.get("knee_hz", 500.0)), seed=seed
        )
    else:
        samples = white_noise(duration, sample_rate, seed=seed)
    return Waveform(samples=samples[None, :], sample_rate=sample_rate)


def scene_from_dict(data: dict, base_dir: Path | None = None, seed_override: int | None = None) -> SceneSpec:
    """Build a SceneSpec from its JSON form."""
    sample_rate = float(data.get("sample_rate", 16000))
    seed = int(data.get("seed", 0)) if seed_override is None else int(seed_override)
    geom = geometry_from_dict(data["geometry"]) if "geometry" in data else default_array()
    if "sources" not in data or not data["sources"]:
        raise InputError("scene config needs a non-empty 'sources' list")
    sources = []
    for k, src in enumerate(data["sources"]):
        if "signal" not in src or "angle_deg" not in src:
            raise InputError(f"source {k} needs 'signal' and 'angle_deg'")
        signal = synthesize_signal(src["signal"], sample_rate, seed=seed + k, base_dir=base_dir)
        sources.append(
            SourceSpec(
                signal=signal,
                angle_deg=float(src["angle_deg"]),
                gain_db=float(src.get("gain_db", 0.0)),
            )
        )
    return SceneSpec(
        geometry=geom,
        sources=sources,
        diffuse_noise_snr_db=_optional_float(data.get("diffuse_noise_snr_db")),
        sensor_noise_snr_db=_optional_float(data.get("sensor_noise_snr_db")),
        seed=seed,
    )


def _optional_float(value) -> float | None:
    return None if value is None else float(value)


def load_scene(path: str | Path, seed_override: int | None = None) -> SceneSpec:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return scene_from_dict(data, base_dir=path.parent, seed_override=seed_override)


def default_scene(duration_s: float = 12.0, sample_rate: float = 16000.0, seed: int = 7) -> SceneSpec:
    """The shipped reference scene: tonal target at +10 deg against a
    speech-shaped interferer at -50 deg, equal power, mild diffuse floor."""
    data = {
        "sample_rate": sample_rate,
        "seed": seed,
        "sources": [
            {
                "signal": {"kind": "tone_complex", "duration_s": duration_s},
                "angle_deg": 10.0,
                "gain_db": 0.0,
            },
            {
                "signal": {"kind": "speech_shaped_noise", "duration_s": duration_s},
                "angle_deg": -50.0,
                "gain_db": 0.0,
            },
        ],
        "diffuse_noise_snr_db": 30.0,
    }
    return scene_from_dict(data)
