import numpy as np
import pytest

from beamkws.errors import FormatError, InputError
from beamkws.stft import Waveform
from beamkws.tensorfile import parse_metadata, read_tensor, write_tensor
from beamkws.wavio import read_wav, write_wav


class TestTensorFile:
    def test_roundtrip_bit_identical(self, rng, tmp_path):
        values = rng.standard_normal((3, 5, 7)).astype(np.float32)
        path = tmp_path / "t.bkt"
        write_tensor(path, values, metadata="unit test; k=v")
        loaded, metadata = read_tensor(path)
        np.testing.assert_array_equal(loaded, values)
        assert metadata == "unit test; k=v"
        # second write of the loaded tensor is byte-identical
        path2 = tmp_path / "t2.bkt"
        write_tensor(path2, loaded, metadata=metadata)
        assert path.read_bytes() == path2.read_bytes()

    def test_metadata_parsing(self):
        fields = parse_metadata("tfmask v1; kind=speech; bins=257")
        assert fields == {"kind": "speech", "bins": "257"}

    def test_bad_magic_reports_offset(self, tmp_path):
        path = tmp_path / "t.bkt"
        write_tensor(path, np.zeros(4, np.float32))
        blob = bytearray(path.read_bytes())
        blob[:4] = b"NOPE"
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="offset 0"):
            read_tensor(path)

    def test_bad_dtype_code(self, tmp_path):
        path = tmp_path / "t.bkt"
        write_tensor(path, np.zeros(4, np.float32))
        blob = bytearray(path.read_bytes())
        blob[4] = 9
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="dtype"):
            read_tensor(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "t.bkt"
        write_tensor(path, np.zeros((2, 3), np.float32))
        blob = path.read_bytes()
        path.write_bytes(blob[:-3])
        with pytest.raises(FormatError, match="payload"):
            read_tensor(path)

    def test_trailing_garbage_rejected(self, tmp_path):
        path = tmp_path / "t.bkt"
        write_tensor(path, np.zeros((2, 3), np.float32))
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(FormatError):
            read_tensor(path)


class TestWavIO:
    def test_float32_roundtrip(self, rng, tmp_path):
        samples = rng.uniform(-0.5, 0.5, size=(3, 1000)).astype(np.float32).astype(np.float64)
        wav = Waveform(samples, 16000)
        path = tmp_path / "x.wav"
        write_wav(path, wav)
        loaded = read_wav(path)
        assert loaded.sample_rate == 16000
        assert loaded.num_channels == 3
        np.testing.assert_array_equal(loaded.samples, samples)

    def test_pcm16_roundtrip_quantized(self, rng, tmp_path):
        samples = rng.uniform(-0.9, 0.9, size=(1, 500))
        path = tmp_path / "x.wav"
        write_wav(path, Waveform(samples, 8000), encoding="pcm16")
        loaded = read_wav(path)
        np.testing.assert_allclose(loaded.samples, samples, atol=1.0 / 32768)

    def test_mono_shape(self, rng, tmp_path):
        path = tmp_path / "m.wav"
        write_wav(path, Waveform(rng.standard_normal((1, 256)), 16000))
        loaded = read_wav(path)
        assert loaded.samples.shape == (1, 256)

    def test_channel_order_preserved(self, tmp_path):
        samples = np.vstack([np.full(64, 0.1), np.full(64, -0.2), np.full(64, 0.3)])
        path = tmp_path / "c.wav"
        write_wav(path, Waveform(samples, 16000))
        loaded = read_wav(path)
        np.testing.assert_allclose(loaded.samples[:, 0], [0.1, -0.2, 0.3], atol=1e-7)

    def test_unknown_encoding_rejected(self, rng, tmp_path):
        with pytest.raises(InputError):
            write_wav(tmp_path / "x.wav", Waveform(rng.standard_normal((1, 10)), 16000), encoding="pcm24")

    def test_garbage_file_rejected(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(b"this is not a wav file at all")
        with pytest.raises(FormatError):
            read_wav(path)
