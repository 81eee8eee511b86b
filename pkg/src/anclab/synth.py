"""Deterministic dual-microphone test scenarios with known ground truth.

A scenario is the triple (clean ``s``, reference ``x``, primary ``d``) with
``d = s + h * x``: the reference microphone hears only noise and the primary
microphone hears speech plus the same noise after a short acoustic path
``h``. All randomness comes from one ``numpy.random.PCG64`` stream seeded by
the ``ScenarioSpec``, so each spec value maps to exactly one scenario.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass

import numpy as np
from scipy.signal import lfilter

from .audio_io import AudioClip, read_wav, write_wav
from .config import Config
from .errors import ConfigError, FormatError

CLEAN_KINDS = ("multitone-am", "wav")
NOISE_KINDS = ("white", "filtered-white")

# Peak level of the synthesized speech surrogate; leaves headroom for the
# noise at the primary mic so 24-bit exports do not clip at +5 dB.
CLEAN_PEAK = 0.35
CHANNEL_DECAY = 0.7
FILTERED_NOISE_POLE = 0.8


def make_rng(seed: int) -> np.random.Generator:
    """The one generator used for every seeded draw in the package."""
    return np.random.Generator(np.random.PCG64(int(seed) & (2**64 - 1)))


@dataclass
class ScenarioSpec:
    duration: float = 10.0
    sample_rate: int = 48_000
    clean_kind: str = "multitone-am"
    clean_path: str | None = None
    noise_kind: str = "white"
    channel_taps: int = 16
    target_snr_in: float = 5.0
    seed: int = 0
    leakage: float = 0.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ConfigError("must be > 0", key="scenario.duration")
        if self.sample_rate <= 0:
            raise ConfigError("must be > 0", key="scenario.sample_rate")
        if self.channel_taps < 1:
            raise ConfigError("must be >= 1", key="scenario.channel_taps")
        if self.clean_kind not in CLEAN_KINDS:
            raise ConfigError(f"must be one of {CLEAN_KINDS}", key="scenario.clean_kind")
        if self.clean_kind == "wav" and not self.clean_path:
            raise ConfigError("required when clean_kind = wav", key="scenario.clean_path")
        if self.noise_kind not in NOISE_KINDS:
            raise ConfigError(f"must be one of {NOISE_KINDS}", key="scenario.noise_kind")
        if math.isnan(self.target_snr_in) or self.target_snr_in == -math.inf:
            raise ConfigError("must be a finite number or inf", key="scenario.target_snr_in")

    @property
    def num_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    @classmethod
    def from_config(cls, cfg: Config, seed: int | None = None) -> "ScenarioSpec":
        d = cls()
        kwargs = dict(
            duration=cfg.get_float("scenario.duration", d.duration),
            sample_rate=cfg.get_int("scenario.sample_rate", d.sample_rate),
            clean_kind=cfg.get_str("scenario.clean_kind", d.clean_kind),
            clean_path=cfg.get_str("scenario.clean_path", None),
            noise_kind=cfg.get_str("scenario.noise_kind", d.noise_kind),
            channel_taps=cfg.get_int("scenario.channel_taps", d.channel_taps),
            target_snr_in=cfg.get_float("scenario.target_snr_in", d.target_snr_in),
            seed=cfg.get_int("scenario.seed", d.seed) if seed is None else seed,
            leakage=cfg.get_float("scenario.leakage", d.leakage),
        )
        try:
            return cls(**kwargs)
        except ConfigError as exc:
            # re-anchor to the config line that set the offending key
            raise ConfigError(exc.message, key=exc.key, line=cfg.lines.get(exc.key)) from None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Scenario:
    clean: AudioClip
    reference: AudioClip
    primary: AudioClip
    channel: np.ndarray
    snr_in: float
    spec: ScenarioSpec | None = None

    @property
    def sample_rate(self) -> int:
        return self.primary.sample_rate

    def __len__(self):
        return len(self.primary)


def fir_channel(signal, coeffs) -> np.ndarray:
    """Causal FIR filtering with zero initial state, output truncated to input length."""
    h = np.asarray(coeffs, dtype=np.float64).ravel()
    if h.size == 0:
        raise ValueError("coeffs must be non-empty")
    x = np.asarray(signal, dtype=np.float64).ravel()
    return np.convolve(x, h)[: x.size]


def random_channel(rng: np.random.Generator, taps: int, decay: float = CHANNEL_DECAY) -> np.ndarray:
    """Exponentially decaying random impulse response with unit energy."""
    h = rng.standard_normal(taps) * decay ** np.arange(taps)
    return h / np.sqrt(np.sum(h**2))


def multitone_am(rng: np.random.Generator, n: int, sample_rate: int) -> np.ndarray:
    """Speech-band surrogate: 3-5 tones in 200-3400 Hz under a 2-8 Hz envelope."""
    t = np.arange(n) / sample_rate
    n_tones = int(rng.integers(3, 6))
    freqs = rng.uniform(200.0, 3400.0, n_tones)
    phases = rng.uniform(0.0, 2 * np.pi, n_tones)
    amps = rng.uniform(0.5, 1.0, n_tones)
    am_rate = rng.uniform(2.0, 8.0)
    am_phase = rng.uniform(0.0, 2 * np.pi)

    carrier = np.sum(amps[:, None] * np.sin(2 * np.pi * freqs[:, None] * t + phases[:, None]), axis=0)
    envelope = 0.55 + 0.45 * np.sin(2 * np.pi * am_rate * t + am_phase)
    s = carrier * envelope
    peak = np.max(np.abs(s))
    return s * (CLEAN_PEAK / peak) if peak > 0 else s


def synth_scenario(spec: ScenarioSpec) -> Scenario:
    """Build the scenario described by ``spec``.

    The reference noise is scaled so that the noise reaching the primary mic
    sits exactly ``target_snr_in`` dB below the clean signal.
    """
    rng = make_rng(spec.seed)
    n = spec.num_samples
    rate = spec.sample_rate

    if spec.clean_kind == "wav":
        src = read_wav(spec.clean_path)
        if src.sample_rate != rate:
            raise ConfigError(
                f"clean WAV rate {src.sample_rate} != scenario rate {rate}",
                key="scenario.sample_rate",
            )
        clean = np.resize(src.data, n) if len(src) < n else src.data[:n].copy()
        # draw the tone parameters anyway so the rest of the stream is unchanged
        multitone_am(rng, 1, rate)
    else:
        clean = multitone_am(rng, n, rate)

    h = random_channel(rng, spec.channel_taps)
    noise = rng.standard_normal(n)
    if spec.noise_kind == "filtered-white":
        a = FILTERED_NOISE_POLE
        noise = lfilter([np.sqrt(1 - a * a)], [1.0, -a], noise)

    p_clean = np.mean(clean**2)
    if spec.target_snr_in == math.inf:
        gain = 0.0
    else:
        p_noise = np.mean(fir_channel(noise, h) ** 2)
        gain = math.sqrt(p_clean / (p_noise * 10 ** (spec.target_snr_in / 10)))
    reference = gain * noise
    noise_at_primary = fir_channel(reference, h)
    primary = clean + noise_at_primary
    if spec.leakage:
        reference = reference + spec.leakage * clean

    p_noise_primary = np.mean(noise_at_primary**2)
    snr_in = math.inf if p_noise_primary == 0 else 10 * math.log10(p_clean / p_noise_primary)
    return Scenario(
        clean=AudioClip.mono(clean, rate),
        reference=AudioClip.mono(reference, rate),
        primary=AudioClip.mono(primary, rate),
        channel=h,
        snr_in=snr_in,
        spec=spec,
    )


def synth_system_id(n: int, taps: int, seed: int, noise_db: float = -40.0,
                    input_std: float = 1.0):
    """White-input system identification data ``(x, d, h)``.

    ``d = h * x + v`` with ``v`` white at ``noise_db`` relative to the
    power of ``h * x``.
    """
    rng = make_rng(seed)
    h = random_channel(rng, taps)
    x = input_std * rng.standard_normal(n)
    clean = fir_channel(x, h)
    v = rng.standard_normal(n) * math.sqrt(np.mean(clean**2) * 10 ** (noise_db / 10))
    return x, clean + v, h


SCENARIO_FILES = ("clean.wav", "reference.wav", "primary.wav")


def write_scenario(directory, scenario: Scenario, bits: int = 24) -> list[str]:
    """Write the three mono WAVs plus ``channel.csv``; returns the paths."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for name, clip in zip(SCENARIO_FILES, (scenario.clean, scenario.reference, scenario.primary)):
        path = os.path.join(directory, name)
        write_wav(path, clip, bits)
        paths.append(path)
    path = os.path.join(directory, "channel.csv")
    with open(path, "w", newline="") as fh:
        fh.write("tap,coefficient\n")
        for k, c in enumerate(scenario.channel):
            fh.write(f"{k},{c:.17g}\n")
    paths.append(path)
    return paths


def load_scenario(directory) -> Scenario:
    clean, reference, primary = (read_wav(os.path.join(directory, f)) for f in SCENARIO_FILES)
    if not (len(clean) == len(reference) == len(primary)):
        raise FormatError("scenario clips differ in length")
    channel_path = os.path.join(directory, "channel.csv")
    channel = np.zeros(0)
    if os.path.exists(channel_path):
        channel = np.loadtxt(channel_path, delimiter=",", skiprows=1, ndmin=2)[:, 1]
    p_clean = np.mean(clean.data**2)
    p_noise = np.mean((primary.data - clean.data) ** 2)
    snr_in = math.inf if p_noise == 0 else 10 * math.log10(p_clean / p_noise)
    return Scenario(clean, reference, primary, channel, snr_in)
