import numpy as np
import pytest

from beamkws.errors import ConfigError, InputError
from beamkws.stft import Spectrogram, Waveform, analysis_window, istft, magnitude, stft

SR = 16000


def _noise_wav(channels=1, seconds=0.5, seed=0):
    rng = np.random.default_rng(seed)
    return Waveform(rng.standard_normal((channels, int(seconds * SR))), SR)


class TestFraming:
    def test_default_frame_math_at_16k(self):
        spec = stft(_noise_wav())
        assert spec.frame_len_samples == 512
        assert spec.hop_samples == 256
        assert spec.num_freqs == 257

    def test_partial_final_frame_is_padded_not_dropped(self):
        n = 512 + 256 + 100  # 100 samples past the last full hop
        wav = Waveform(np.ones((1, n)), SR)
        spec = stft(wav)
        # frames must cover the whole signal
        covered = spec.frame_len_samples + (spec.num_frames - 1) * spec.hop_samples
        assert covered >= n
        assert spec.num_frames == 3

    def test_too_short_signal_rejected(self):
        with pytest.raises(InputError):
            stft(Waveform(np.ones((1, 100)), SR))

    def test_empty_signal_rejected(self):
        with pytest.raises(InputError):
            Waveform(np.ones((1, 0)), SR)

    def test_unsupported_window_rejected(self):
        with pytest.raises(ConfigError):
            stft(_noise_wav(), window="blackman")


class TestStftContent:
    def test_bin_centered_sinusoid_concentrates(self):
        # the analysis window spreads a bin-centered tone over its kernel
        # mainlobe; >= 99% of the frame energy stays within one bin of it
        k = 40  # exact bin center at 40 * 31.25 Hz
        t = np.arange(SR) / SR
        wav = Waveform(np.sin(2 * np.pi * k * 31.25 * t)[None, :], SR)
        for window, single_bin_floor in (("sqrt_hann", 0.8), ("hann", 0.6)):
            spec = stft(wav, window=window)
            mid = spec.num_frames // 2
            energy = np.abs(spec.bins[0, mid]) ** 2
            assert int(np.argmax(energy)) == k
            assert energy[k] / energy.sum() >= single_bin_floor
            assert energy[k - 1 : k + 2].sum() / energy.sum() >= 0.99

    def test_zero_input_gives_zero_spectrogram(self):
        wav = Waveform(np.zeros((2, SR)), SR)
        spec = stft(wav)
        assert np.all(spec.bins == 0)

    def test_linearity(self):
        x = _noise_wav(seed=1)
        y = _noise_wav(seed=2)
        a, b = 0.7, -1.3
        mixed = Waveform(a * x.samples + b * y.samples, SR)
        lhs = stft(mixed).bins
        rhs = a * stft(x).bins + b * stft(y).bins
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_parseval_per_frame(self):
        wav = _noise_wav(seed=3)
        spec = stft(wav)
        win = analysis_window(spec.window_kind, spec.frame_len_samples)
        n, hop = spec.frame_len_samples, spec.hop_samples
        padded = np.zeros(n + (spec.num_frames - 1) * hop)
        padded[: wav.num_samples] = wav.samples[0]
        for t in range(spec.num_frames):
            frame = padded[t * hop : t * hop + n] * win
            time_energy = np.sum(frame**2)
            mags = np.abs(spec.bins[0, t]) ** 2
            freq_energy = (mags[0] + 2 * mags[1:-1].sum() + mags[-1]) / n
            assert freq_energy == pytest.approx(time_energy, rel=1e-6, abs=1e-12)


class TestIstft:
    @pytest.mark.parametrize("window", ["sqrt_hann", "hann"])
    def test_white_noise_roundtrip_interior(self, window):
        wav = _noise_wav(seed=4, seconds=1.0)
        out = istft(stft(wav, window=window))
        n = wav.num_samples
        interior = slice(512, n - 512)
        err = np.linalg.norm(out.samples[0, interior] - wav.samples[0, interior])
        assert err / np.linalg.norm(wav.samples[0, interior]) < 1e-6

    def test_roundtrip_everything_but_first_sample(self):
        wav = _noise_wav(seed=5)
        out = istft(stft(wav))
        n = wav.num_samples
        np.testing.assert_allclose(out.samples[0, 1:n], wav.samples[0, 1:], atol=1e-10)

    def test_zero_spectrogram_gives_zero_waveform(self):
        spec = stft(_noise_wav())
        zero = Spectrogram(
            bins=np.zeros_like(spec.bins),
            sample_rate=spec.sample_rate,
            frame_len_samples=spec.frame_len_samples,
            hop_samples=spec.hop_samples,
        )
        assert np.all(istft(zero).samples == 0)

    def test_impulse_roundtrip_same_index(self):
        n = SR // 2
        x = np.zeros((1, n))
        idx = 5000
        x[0, idx] = 1.0
        out = istft(stft(Waveform(x, SR)))
        assert np.argmax(np.abs(out.samples[0])) == idx
        assert out.samples[0, idx] == pytest.approx(1.0, rel=1e-9)

    def test_multichannel_preserved(self):
        wav = _noise_wav(channels=3, seed=6)
        out = istft(stft(wav))
        assert out.num_channels == 3
        np.testing.assert_allclose(out.samples[:, 1 : wav.num_samples], wav.samples[:, 1:], atol=1e-10)


class TestMagnitude:
    def test_pythagoras(self):
        bins = np.zeros((1, 2, 257), dtype=np.complex128)
        bins[0, 0, 3] = 3 + 4j
        spec = Spectrogram(bins=bins, sample_rate=SR, frame_len_samples=512, hop_samples=256)
        mag = magnitude(spec, 0)
        assert mag[0, 3] == 5.0
        assert mag[1, 3] == 0.0

    def test_scales_linearly_with_gain(self):
        wav = _noise_wav(seed=7)
        g = 3.7
        scaled = Waveform(g * wav.samples, SR)
        np.testing.assert_allclose(
            magnitude(stft(scaled), 0), g * magnitude(stft(wav), 0), rtol=1e-10, atol=1e-12
        )

    def test_channel_out_of_range(self):
        spec = stft(_noise_wav())
        with pytest.raises(InputError):
            magnitude(spec, 1)
