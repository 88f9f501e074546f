import numpy as np
import pytest

from beamkws.errors import FormatError, InputError, ValidationError
from beamkws.masks import TFMask, load_mask, oracle_irm, save_mask
from beamkws.stft import Spectrogram, Waveform, stft
from beamkws.tensorfile import write_tensor

SR = 16000


def _random_spec(rng, frames=40, freqs=257, scale=1.0):
    bins = scale * (rng.standard_normal((1, frames, freqs)) + 1j * rng.standard_normal((1, frames, freqs)))
    return Spectrogram(bins=bins, sample_rate=SR, frame_len_samples=512, hop_samples=256)


class TestOracleIrm:
    def test_zero_noise_gives_speech_mask_near_one(self, rng):
        clean = _random_spec(rng)
        silent = Spectrogram(
            bins=np.zeros_like(clean.bins),
            sample_rate=SR,
            frame_len_samples=512,
            hop_samples=256,
        )
        m_s, m_n = oracle_irm(clean, silent)
        mag = np.abs(clean.bins[0])
        energetic = mag > 0.01 * mag.max()
        assert m_s.values[energetic].min() > 1.0 - 1e-4
        assert np.all(m_n.values == 0)

    def test_equal_magnitudes_give_half(self, rng):
        clean = _random_spec(rng)
        # same magnitudes, different phases
        noise = Spectrogram(
            bins=np.abs(clean.bins) * np.exp(0.5j),
            sample_rate=SR,
            frame_len_samples=512,
            hop_samples=256,
        )
        m_s, _ = oracle_irm(clean, noise)
        np.testing.assert_allclose(m_s.values, 0.5, atol=1e-4)

    def test_masks_sum_to_one_within_regularizer(self, rng):
        clean, noise = _random_spec(rng), _random_spec(rng)
        m_s, m_n = oracle_irm(clean, noise)
        total = np.abs(clean.bins[0]) + np.abs(noise.bins[0])
        scale = total.max()
        expected = total / (total + 1e-8 * scale)
        np.testing.assert_allclose(m_s.values + m_n.values, expected, rtol=1e-12)
        energetic = total > 0.01 * scale
        assert np.all(m_s.values[energetic] + m_n.values[energetic] > 1.0 - 1e-5)

    @pytest.mark.parametrize("alpha", [1e-3, 1.0, 1e3])
    def test_scale_invariance(self, rng, alpha):
        clean, noise = _random_spec(rng), _random_spec(rng)
        base_s, base_n = oracle_irm(clean, noise)
        scaled_s, scaled_n = oracle_irm(
            Spectrogram(alpha * clean.bins, SR, 512, 256),
            Spectrogram(alpha * noise.bins, SR, 512, 256),
        )
        np.testing.assert_allclose(scaled_s.values, base_s.values, atol=1e-9)
        np.testing.assert_allclose(scaled_n.values, base_n.values, atol=1e-9)

    def test_monotone_in_speech_magnitude(self, rng):
        clean, noise = _random_spec(rng, frames=8), _random_spec(rng, frames=8)
        m_before, _ = oracle_irm(clean, noise)
        boosted = clean.bins.copy()
        boosted[0, 3, 100] *= 4.0
        m_after, _ = oracle_irm(Spectrogram(boosted, SR, 512, 256), noise)
        assert m_after.values[3, 100] >= m_before.values[3, 100]

    def test_sqrt_energy_form_in_range(self, rng):
        clean, noise = _random_spec(rng), _random_spec(rng)
        m_s, m_n = oracle_irm(clean, noise, form="sqrt_energy")
        for m in (m_s, m_n):
            assert m.values.min() >= 0.0 and m.values.max() <= 1.0

    def test_shape_mismatch_rejected(self, rng):
        with pytest.raises(InputError):
            oracle_irm(_random_spec(rng, frames=10), _random_spec(rng, frames=12))

    def test_bad_form_rejected(self, rng):
        with pytest.raises(InputError):
            oracle_irm(_random_spec(rng), _random_spec(rng), form="wiener")


class TestMaskValidation:
    def test_out_of_range_mask_rejected(self):
        values = np.full((4, 5), 0.5)
        values[2, 3] = 1.5
        with pytest.raises(ValidationError, match=r"frame 2, bin 3"):
            TFMask(values=values, kind="speech")

    def test_nan_rejected(self):
        values = np.full((2, 2), np.nan)
        with pytest.raises(ValidationError):
            TFMask(values=values, kind="noise")

    def test_bad_kind_rejected(self):
        with pytest.raises(InputError):
            TFMask(values=np.zeros((2, 2)), kind="music")


class TestMaskFiles:
    def test_roundtrip_bit_identical(self, rng, tmp_path):
        values = rng.uniform(0, 1, size=(30, 257)).astype(np.float32)
        mask = TFMask(values=values.astype(np.float64), kind="noise")
        path = tmp_path / "mask.bkt"
        save_mask(mask, path)
        loaded = load_mask(path)
        assert loaded.kind == "noise"
        np.testing.assert_array_equal(loaded.values.astype(np.float32), values)
        # a second save of the loaded mask is byte-identical
        path2 = tmp_path / "mask2.bkt"
        save_mask(loaded, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_out_of_range_file_rejected_not_clamped(self, tmp_path):
        bad = np.full((3, 4), 0.25, dtype=np.float32)
        bad[1, 2] = 1.5
        path = tmp_path / "bad.bkt"
        write_tensor(path, bad, metadata="tfmask v1; kind=speech")
        with pytest.raises(ValidationError, match=r"frame 1, bin 2"):
            load_mask(path)

    def test_truncated_file_rejected(self, tmp_path):
        path = tmp_path / "mask.bkt"
        save_mask(TFMask(np.zeros((4, 4)), "speech"), path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-7])
        with pytest.raises(FormatError):
            load_mask(path)

    def test_shape_check(self, tmp_path):
        path = tmp_path / "mask.bkt"
        save_mask(TFMask(np.zeros((4, 4)), "speech"), path)
        with pytest.raises(InputError):
            load_mask(path, expected_shape=(4, 5))

    def test_oracle_masks_pair_with_stft(self, rng):
        wav = Waveform(rng.standard_normal((1, SR)), SR)
        spec = stft(wav)
        m_s, _ = oracle_irm(spec, spec)
        assert m_s.shape == (spec.num_frames, spec.num_freqs)
