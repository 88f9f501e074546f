import numpy as np
import pytest

import helpers
from beamkws.errors import InputError
from beamkws.geometry import default_array, pair_phase_delta
from beamkws.simulate import (
    SceneSpec,
    SourceSpec,
    default_scene,
    delay_and_sum,
    load_scene,
    scene_from_dict,
    si_snr,
    simulate,
    speech_shaped_noise,
    tone_complex,
    white_noise,
)
from beamkws.spatial import wrap_phase
from beamkws.stft import Waveform, stft

SR = 16000


def _mono(x):
    return Waveform(x[None, :], SR)


class TestSimulate:
    def test_mixture_decomposes_exactly(self):
        scene = default_scene(duration_s=2.0)
        render = simulate(scene)
        total = np.sum([img.samples for img in render.source_images], axis=0)
        total = total + render.noise_image.samples
        np.testing.assert_allclose(render.mixture.samples, total, atol=1e-12)

    def test_same_seed_bit_identical(self):
        scene_a = default_scene(duration_s=1.0, seed=5)
        scene_b = default_scene(duration_s=1.0, seed=5)
        ra, rb = simulate(scene_a), simulate(scene_b)
        np.testing.assert_array_equal(ra.mixture.samples, rb.mixture.samples)
        np.testing.assert_array_equal(ra.noise_image.samples, rb.noise_image.samples)

    def test_different_seed_differs(self):
        ra = simulate(default_scene(duration_s=1.0, seed=5))
        rb = simulate(default_scene(duration_s=1.0, seed=6))
        assert not np.array_equal(ra.mixture.samples, rb.mixture.samples)

    def test_zero_gain_source_renders_zero_image(self, geom):
        sig = _mono(white_noise(0.5, SR, seed=1))
        scene = SceneSpec(
            geometry=geom,
            sources=[
                SourceSpec(sig, angle_deg=0.0),
                SourceSpec(sig, angle_deg=30.0, gain_db=-np.inf),
            ],
            seed=0,
        )
        render = simulate(scene)
        assert np.all(render.source_images[1].samples == 0)

    def test_rendered_ipd_matches_phase_model(self, geom):
        sig = helpers.multitone_at_bins(4.0)
        worst = 0.0
        for theta in (-50.0, 10.0, 50.0):
            scene = SceneSpec(geometry=geom, sources=[SourceSpec(sig, theta)], seed=1)
            spec = stft(simulate(scene).mixture, window="hann")
            energy = np.mean(np.abs(spec.bins[0]) ** 2, axis=0)
            keep = helpers.dominant_bins(energy)
            for pair in ((0, 3), (1, 4), (2, 5)):
                cross = np.sum(spec.bins[pair[0]] * np.conj(spec.bins[pair[1]]), axis=0)
                expect = pair_phase_delta(geom, pair, theta, spec.freqs_hz)
                err = np.abs(wrap_phase(np.angle(cross) - expect))[keep].max()
                worst = max(worst, err)
        assert worst < 1e-3

    def test_noise_snr_calibration(self, geom):
        sig = _mono(white_noise(4.0, SR, seed=2))
        scene = SceneSpec(
            geometry=geom, sources=[SourceSpec(sig, 0.0)], diffuse_noise_snr_db=10.0, seed=3
        )
        render = simulate(scene)
        clean = np.sum([img.samples for img in render.source_images], axis=0)
        snr = 10 * np.log10(np.mean(clean**2) / np.mean(render.noise_image.samples**2))
        assert snr == pytest.approx(10.0, abs=0.2)

    def test_sample_rate_mismatch_rejected(self, geom):
        a = _mono(white_noise(0.5, SR, seed=1))
        b = Waveform(white_noise(0.5, 8000, seed=1)[None, :], 8000)
        with pytest.raises(InputError):
            SceneSpec(geometry=geom, sources=[SourceSpec(a, 0.0), SourceSpec(b, 10.0)])


class TestSiSnr:
    def test_identical_signals_hit_cap(self, rng):
        x = _mono(rng.standard_normal(SR))
        assert si_snr(x, x) == 60.0

    def test_scale_invariance(self, rng):
        x = rng.standard_normal(SR)
        assert si_snr(_mono(2.5 * x), _mono(x)) == 60.0

    def test_orthogonal_hits_negative_cap(self):
        t = np.arange(SR)
        a = np.sin(2 * np.pi * 1000 * t / SR)
        b = np.sin(2 * np.pi * 2000 * t / SR)
        assert si_snr(_mono(a), _mono(b)) == -60.0

    def test_known_ratio(self, rng):
        ref = rng.standard_normal(SR)
        noise = rng.standard_normal(SR)
        noise -= (noise @ ref / (ref @ ref)) * ref  # orthogonalize
        scale = np.linalg.norm(ref) / np.linalg.norm(noise) / 10 ** (12 / 20)
        est = _mono(ref + scale * noise)
        assert si_snr(est, _mono(ref)) == pytest.approx(12.0, abs=1e-6)

    def test_zero_reference_rejected(self, rng):
        with pytest.raises(InputError):
            si_snr(_mono(rng.standard_normal(100)), _mono(np.zeros(100)))

    def test_length_mismatch_rejected(self, rng):
        with pytest.raises(InputError):
            si_snr(_mono(rng.standard_normal(100)), _mono(rng.standard_normal(101)))


class TestDelayAndSum:
    def test_single_source_recovers_reference_image(self, geom):
        sig = _mono(white_noise(2.0, SR, seed=4))
        theta = 30.0
        render = simulate(SceneSpec(geometry=geom, sources=[SourceSpec(sig, theta)], seed=1))
        out = delay_and_sum(render.mixture, geom, theta)
        ref_image = render.source_images[0].samples[geom.reference_mic]
        err = np.linalg.norm(out.samples[0] - ref_image) / np.linalg.norm(ref_image)
        assert err < 1e-6

    def test_identical_channels_pass_through(self, geom, rng):
        x = rng.standard_normal(SR)
        wav = Waveform(np.tile(x, (6, 1)), SR)
        out = delay_and_sum(wav, geom, 0.0)  # broadside: zero lead for a ULA on x
        np.testing.assert_allclose(out.samples[0], x, atol=1e-10)

    def test_uncorrelated_noise_reduced_by_channel_count(self, geom, rng):
        wav = Waveform(rng.standard_normal((6, 4 * SR)), SR)
        out = delay_and_sum(wav, geom, 20.0)
        ratio = np.mean(wav.samples**2) / np.mean(out.samples**2)
        assert ratio == pytest.approx(6.0, rel=0.2)


class TestSceneConfig:
    def test_scene_from_dict_defaults(self):
        scene = scene_from_dict(
            {
                "sources": [
                    {"signal": {"kind": "white_noise", "duration_s": 0.5}, "angle_deg": 5.0}
                ],
                "seed": 9,
            }
        )
        assert scene.geometry.num_mics == 6
        assert scene.sample_rate == 16000
        assert scene.seed == 9

    def test_seed_override(self):
        base = {
            "sources": [{"signal": {"kind": "white_noise", "duration_s": 0.2}, "angle_deg": 0.0}],
            "seed": 1,
        }
        scene = scene_from_dict(base, seed_override=4)
        assert scene.seed == 4

    def test_unknown_signal_kind_rejected(self):
        with pytest.raises(InputError):
            scene_from_dict(
                {"sources": [{"signal": {"kind": "chirp"}, "angle_deg": 0.0}]}
            )

    def test_shipped_default_scene_loads(self):
        from pathlib import Path

        path = Path(__file__).resolve().parent.parent / "src" / "beamkws" / "data" / "default_scene.json"
        scene = load_scene(path)
        assert len(scene.sources) == 2
        assert scene.sources[0].angle_deg == 10.0
        assert scene.sources[1].angle_deg == -50.0
        assert scene.num_samples == 12 * SR

    def test_synth_signals_unit_rms(self):
        for x in (
            tone_complex(1.0, SR, seed=1),
            speech_shaped_noise(1.0, SR, seed=1),
            white_noise(1.0, SR, seed=1),
        ):
            assert np.sqrt(np.mean(x**2)) == pytest.approx(1.0, rel=1e-9)
