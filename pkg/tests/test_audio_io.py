import io
import struct
import wave

import numpy as np
import pytest

from anclab.audio_io import (
    AudioClip,
    PcmFrame32,
    QuantizationSpec,
    decode_wav,
    encode_wav,
    frame_pack,
    frame_unpack,
    pack_frames,
    quantize,
    read_wav,
    sqnr_db,
    to_pcm,
    unpack_frames,
    write_wav,
)
from anclab.errors import EmptyInputError, FormatError, RangeError, UnsupportedFormatError
from oracles import FROZEN, sine


def _wav_bytes(frames: bytes, width=2, channels=1, rate=48000):
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wf:
        wf.setnchannels(channels)
        wf.setsampwidth(width)
        wf.setframerate(rate)
        wf.writeframes(frames)
    return buf.getvalue()


class TestDecode:
    def test_single_sample_half_scale(self):
        clip = decode_wav(_wav_bytes(struct.pack("<h", 0x4000)))
        assert clip.samples.shape == (1, 1)
        assert clip.data[0] == 0.5

    def test_all_zero(self):
        clip = decode_wav(_wav_bytes(b"\x00\x00" * 10))
        assert np.all(clip.data == 0.0)
        assert len(clip) == 10

    def test_24bit_sine_matches_generator(self):
        s = sine(4800, 1000, 48000, 0.9)
        clip = decode_wav(encode_wav(AudioClip.mono(s, 48000), 24))
        assert np.max(np.abs(clip.data - s)) <= 2.0**-23

    def test_negative_full_scale_exact(self):
        clip = decode_wav(_wav_bytes(struct.pack("<h", -32768)))
        assert clip.data[0] == -1.0

    def test_stereo_deinterleaves(self):
        raw = struct.pack("<hhhh", 100, -100, 200, -200)
        clip = decode_wav(_wav_bytes(raw, channels=2))
        assert clip.channels == 2
        np.testing.assert_array_equal(clip.samples * 32768, [[100, 200], [-100, -200]])

    def test_garbage_is_format_error(self):
        with pytest.raises(FormatError):
            decode_wav(b"not a wav file at all")

    def test_truncated_header(self):
        with pytest.raises(FormatError):
            decode_wav(_wav_bytes(b"\x00\x00" * 4)[:20])

    def test_8bit_unsupported(self):
        with pytest.raises(UnsupportedFormatError):
            decode_wav(_wav_bytes(b"\x80" * 4, width=1))

    def test_float_format_unsupported(self):
        data = bytearray(_wav_bytes(b"\x00\x00" * 4))
        data[20:22] = struct.pack("<H", 3)  # IEEE float tag
        with pytest.raises(UnsupportedFormatError):
            decode_wav(bytes(data))


class TestEncode:
    def test_half_scale_word(self):
        data = encode_wav(AudioClip.mono([0.5], 48000), 16)
        assert struct.unpack("<h", data[-2:])[0] == 0x4000

    def test_saturates_positive(self):
        data = encode_wav(AudioClip.mono([1.5], 48000), 16)
        assert struct.unpack("<h", data[-2:])[0] == 0x7FFF

    def test_saturates_negative_24(self):
        clip = decode_wav(encode_wav(AudioClip.mono([-3.0], 48000), 24))
        assert clip.data[0] == -1.0

    def test_random_roundtrip_bit_identical(self):
        rng = np.random.default_rng(5)
        s = np.round(rng.uniform(-1, 1, 1000) * 32768).clip(-32768, 32767) / 32768
        clip = decode_wav(encode_wav(AudioClip.mono(s, 16000), 16))
        np.testing.assert_array_equal(clip.data, s)
        assert clip.sample_rate == 16000

    def test_empty_clip(self):
        with pytest.raises(EmptyInputError):
            encode_wav(AudioClip.mono([], 48000))

    def test_bad_depth(self):
        with pytest.raises(UnsupportedFormatError):
            encode_wav(AudioClip.mono([0.1], 48000), 32)

    def test_file_roundtrip(self, tmp_path):
        s = np.linspace(-0.5, 0.5, 64)
        write_wav(tmp_path / "a.wav", AudioClip.mono(s, 8000), 24)
        clip = read_wav(tmp_path / "a.wav")
        np.testing.assert_allclose(clip.data, s, atol=2.0**-23)

    def test_to_pcm_rounds_half_away(self):
        np.testing.assert_array_equal(to_pcm([0.5 / 32768, -0.5 / 32768], 16), [1, -1])


class TestFraming:
    @pytest.mark.parametrize("sample,raw", list(FROZEN["frame_pack"].items()))
    def test_pack_examples(self, sample, raw):
        assert frame_pack(sample).raw == raw

    @pytest.mark.parametrize("sample,raw", list(FROZEN["frame_pack"].items()))
    def test_unpack_examples(self, sample, raw):
        assert frame_unpack(PcmFrame32(raw)) == sample

    def test_half_words(self):
        assert frame_pack(0x123456).half_words == (0x1234, 0x5600)

    def test_low_byte_zero(self):
        for s in (-(2**23), -1, 0, 1, 2**23 - 1, 0x5A5A5A):
            assert frame_pack(s).raw & 0xFF == 0

    @pytest.mark.parametrize("bad", [2**23, -(2**23) - 1])
    def test_out_of_range(self, bad):
        with pytest.raises(RangeError):
            frame_pack(bad)
        with pytest.raises(RangeError):
            pack_frames([bad])

    def test_vectorized_matches_scalar(self):
        s = np.array([-(2**23), -12345, -1, 0, 1, 777, 2**23 - 1])
        raw = pack_frames(s)
        assert [int(r) for r in raw] == [frame_pack(int(v)).raw for v in s]
        np.testing.assert_array_equal(unpack_frames(raw), s)


class TestQuantize:
    def test_two_bit_grid(self):
        q = quantize(AudioClip.mono([0.9, 0.2, -0.8, -1.0, 0.3], 8000), 2)
        np.testing.assert_array_equal(q.data, [0.5, 0.0, -1.0, -1.0, 0.5])

    def test_identity_on_own_grid(self):
        rng = np.random.default_rng(2)
        s = rng.integers(-(2**23), 2**23, 500) / 2.0**23
        np.testing.assert_array_equal(quantize(AudioClip.mono(s, 48000), 24).data, s)

    def test_sqnr_12_bits(self):
        s = sine(48000, 997, 48000, 1.0 - 2.0**-11)
        q = quantize(AudioClip.mono(s, 48000), QuantizationSpec(12))
        assert sqnr_db(s, q.data) == pytest.approx(FROZEN["sqnr_12bit"], abs=1.5)

    @pytest.mark.parametrize("bits", [1, 25, 2.5])
    def test_bits_validated(self, bits):
        with pytest.raises(ValueError):
            QuantizationSpec(bits)
