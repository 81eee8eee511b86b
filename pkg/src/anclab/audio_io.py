"""WAV encode/decode, 24-in-32 I2S frame packing and bit-depth quantization.

Samples are carried as normalized floats. An ``n``-bit PCM word ``q`` maps
to ``q / 2**(n-1)`` so -1.0 is exactly representable and +1.0 is the
saturation bound.
"""

from __future__ import annotations

import io
import struct
import wave
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, FormatError, RangeError, UnsupportedFormatError

SUPPORTED_DEPTHS = (16, 24)

_INT24_MIN = -(1 << 23)
_INT24_MAX = (1 << 23) - 1


@dataclass
class AudioClip:
    """Normalized multichannel audio.

    Attributes
    ----------
    samples : np.ndarray
        Shape ``(channels, n)``, float64.
    sample_rate : int
        Sampling rate in Hz.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim == 1:
            s = s[np.newaxis, :]
        if s.ndim != 2 or s.shape[0] < 1:
            raise ValueError("samples must be 1-D or (channels, n)")
        if int(self.sample_rate) <= 0:
            raise ValueError("sample_rate must be positive")
        self.samples = s
        self.sample_rate = int(self.sample_rate)

    @classmethod
    def mono(cls, samples, sample_rate):
        return cls(np.asarray(samples, dtype=np.float64).reshape(1, -1), sample_rate)

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    def __len__(self):
        return self.samples.shape[1]

    @property
    def data(self) -> np.ndarray:
        """First channel as a 1-D array (the common mono case)."""
        return self.samples[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class PcmFrame32:
    """One 32-bit I2S slot carrying a left-aligned 24-bit sample."""

    raw: int

    @property
    def hi(self) -> int:
        """Bits 31..16."""
        return (self.raw >> 16) & 0xFFFF

    @property
    def lo(self) -> int:
        """Bits 15..0."""
        return self.raw & 0xFFFF

    @property
    def half_words(self) -> tuple[int, int]:
        return self.hi, self.lo


@dataclass(frozen=True)
class QuantizationSpec:
    bits: int

    def __post_init__(self):
        if not isinstance(self.bits, (int, np.integer)) or not 2 <= self.bits <= 24:
            raise ValueError(f"bits must be an integer in [2, 24], got {self.bits!r}")


def _round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def to_pcm(samples, bits: int) -> np.ndarray:
    """Normalized floats to saturated signed integer PCM words."""
    full = float(1 << (bits - 1))
    q = _round_half_away(np.asarray(samples, dtype=np.float64) * full)
    return np.clip(q, -full, full - 1).astype(np.int32)


def decode_wav(data: bytes) -> AudioClip:
    """Decode a 16- or 24-bit PCM RIFF/WAVE byte string.

    Raises
    ------
    FormatError
        The container is not a readable RIFF/WAVE file.
    UnsupportedFormatError
        Compressed/float encodings, other bit depths or more than two channels.
    """
    try:
        with wave.open(io.BytesIO(data), "rb") as wf:
            channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            nframes = wf.getnframes()
            raw = wf.readframes(nframes)
    except wave.Error as exc:
        if "unknown format" in str(exc):
            raise UnsupportedFormatError(str(exc)) from exc
        raise FormatError(str(exc)) from exc
    except (EOFError, struct.error) as exc:
        raise FormatError(f"truncated or malformed header: {exc}") from exc

    bits = 8 * width
    if bits not in SUPPORTED_DEPTHS:
        raise UnsupportedFormatError(f"unsupported bit depth {bits}")
    if channels not in (1, 2):
        raise UnsupportedFormatError(f"unsupported channel count {channels}")
    if rate <= 0:
        raise FormatError("sample rate must be positive")
    usable = (len(raw) // (width * channels)) * width * channels
    raw = raw[:usable]

    if bits == 16:
        ints = np.frombuffer(raw, dtype="<i2").astype(np.int32)
    else:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        ints = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        ints = np.where(ints & 0x800000, ints - (1 << 24), ints)
    samples = ints.reshape(-1, channels).T / float(1 << (bits - 1))
    return AudioClip(samples, rate)


def encode_wav(clip: AudioClip, bits: int = 16) -> bytes:
    """Encode a clip as little-endian PCM WAV; out-of-range samples saturate."""
    if bits not in SUPPORTED_DEPTHS:
        raise UnsupportedFormatError(f"unsupported bit depth {bits}")
    if len(clip) == 0:
        raise EmptyInputError("cannot encode an empty clip")
    if clip.channels > 2:
        raise UnsupportedFormatError("WAV output is limited to 1 or 2 channels")

    ints = to_pcm(clip.samples, bits).T.reshape(-1)
    if bits == 16:
        payload = ints.astype("<i2").tobytes()
    else:
        u = ints.astype(np.int64) & 0xFFFFFF
        payload = np.stack([u & 0xFF, (u >> 8) & 0xFF, (u >> 16) & 0xFF], axis=1)
        payload = payload.astype(np.uint8).tobytes()

    buf = io.BytesIO()
    with wave.open(buf, "wb") as wf:
        wf.setnchannels(clip.channels)
        wf.setsampwidth(bits // 8)
        wf.setframerate(clip.sample_rate)
        wf.writeframes(payload)
    return buf.getvalue()


def read_wav(path) -> AudioClip:
    with open(path, "rb") as fh:
        return decode_wav(fh.read())


def write_wav(path, clip: AudioClip, bits: int = 16) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_wav(clip, bits))


def frame_pack(sample: int) -> PcmFrame32:
    """Left-align a signed 24-bit sample in a 32-bit slot (low byte is padding)."""
    sample = int(sample)
    if not _INT24_MIN <= sample <= _INT24_MAX:
        raise RangeError(f"{sample} is not a signed 24-bit value")
    return PcmFrame32((sample << 8) & 0xFFFFFFFF)


def frame_unpack(frame) -> int:
    """Sign-extended 24-bit sample from bits 31..8 of a frame (or raw int)."""
    raw = frame.raw if isinstance(frame, PcmFrame32) else int(frame)
    value = (raw & 0xFFFFFFFF) >> 8
    return value - (1 << 24) if value & 0x800000 else value


def pack_frames(samples) -> np.ndarray:
    """Vectorized :func:`frame_pack` returning ``uint32`` words."""
    s = np.asarray(samples, dtype=np.int64)
    if s.size and (s.min() < _INT24_MIN or s.max() > _INT24_MAX):
        raise RangeError("samples outside the signed 24-bit range")
    return ((s << 8) & 0xFFFFFFFF).astype(np.uint32)


def unpack_frames(raw) -> np.ndarray:
    """Vectorized :func:`frame_unpack`; arithmetic shift does the sign extension."""
    return np.asarray(raw, dtype=np.uint32).view(np.int32) >> 8


def quantize(clip: AudioClip, spec: QuantizationSpec | int) -> AudioClip:
    """Snap samples onto a ``bits``-bit uniform grid spanning [-1, 1).

    Rounds half away from zero and saturates at the grid ends.
    """
    if not isinstance(spec, QuantizationSpec):
        spec = QuantizationSpec(int(spec))
    full = float(1 << (spec.bits - 1))
    q = np.clip(_round_half_away(clip.samples * full), -full, full - 1) / full
    return AudioClip(q, clip.sample_rate)


def sqnr_db(reference, quantized) -> float:
    """Signal-to-quantization-noise ratio of ``quantized`` against ``reference``."""
    ref = np.asarray(reference, dtype=np.float64)
    err = np.asarray(quantized, dtype=np.float64) - ref
    return float(10.0 * np.log10(np.sum(ref**2) / np.sum(err**2)))
