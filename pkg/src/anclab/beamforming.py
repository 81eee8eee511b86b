"""Delay-and-sum beamforming over a uniform linear microphone array.

Geometry convention: mic ``m`` sits at ``m * spacing`` along the array axis
and ``angle`` is measured from broadside. A plane wave arriving from a
positive angle reaches higher-index mics *earlier*, by
``m * spacing * sin(angle) / c`` seconds relative to mic 0, so steering
delays channel ``m`` by that amount (shifted so the smallest delay is 0).

The adaptive stage is a generalized-sidelobe-style canceller: the
delay-and-sum output is the fixed branch, adjacent-channel differences of
the steered channels block the look direction and feed an NLMS canceller.
It is a simplification, not a linearly constrained (Frost) beamformer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .filters import FilterConfig, nlms_multi

SPEED_OF_SOUND = 343.0


@dataclass
class ArrayGeometry:
    mic_count: int
    spacing: float
    speed_of_sound: float = SPEED_OF_SOUND
    sample_rate: int = 48_000

    def __post_init__(self):
        if self.mic_count < 2:
            raise ValueError("mic_count must be >= 2")
        if not self.spacing > 0:
            raise ValueError("spacing must be > 0")
        if not self.speed_of_sound > 0 or self.sample_rate <= 0:
            raise ValueError("speed_of_sound and sample_rate must be positive")

    @property
    def positions(self) -> np.ndarray:
        return np.arange(self.mic_count) * self.spacing


@dataclass
class SteeringDelays:
    """Per-mic fractional sample delays; the minimum is always 0."""

    delays: np.ndarray

    def __len__(self):
        return self.delays.size


def steering_delays(geom: ArrayGeometry, angle: float) -> SteeringDelays:
    if abs(angle) > math.pi / 2 + 1e-12:
        raise ValueError("angle must lie in [-pi/2, pi/2]")
    tau = geom.positions * math.sin(angle) / geom.speed_of_sound * geom.sample_rate
    return SteeringDelays(tau - tau.min())


def max_spacing(f_max: float, c: float = SPEED_OF_SOUND) -> float:
    """Largest spacing free of spatial aliasing up to ``f_max``: half a wavelength."""
    if not f_max > 0:
        raise ValueError("f_max must be > 0")
    return c / (2.0 * f_max)


def fractional_delay(signal, delay: float) -> np.ndarray:
    """Delay by a non-negative fractional number of samples (linear interpolation).

    Samples before the start of the signal are taken as zero.
    """
    x = np.asarray(signal, dtype=np.float64).ravel()
    if delay < 0:
        raise ValueError("delay must be >= 0")
    k = int(math.floor(delay))
    f = delay - k
    n = x.size
    # padded[j] == x[j - k - 1]
    padded = np.concatenate([np.zeros(k + 1), x])
    return (1.0 - f) * padded[1:n + 1] + f * padded[:n]


def _as_channels(channels) -> np.ndarray:
    if isinstance(channels, np.ndarray):
        arr = np.asarray(channels, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("channels must be a 2-D array (mics, samples)")
        return arr
    lengths = {len(c) for c in channels}
    if len(lengths) != 1:
        raise ValueError(f"channel lengths differ: {sorted(lengths)}")
    return np.asarray([np.asarray(c, dtype=np.float64) for c in channels])


def steer(channels, delays: SteeringDelays) -> np.ndarray:
    """Apply each channel's steering delay; returns ``(M, N)``."""
    X = _as_channels(channels)
    if X.shape[0] != len(delays):
        raise ValueError(f"{X.shape[0]} channels but {len(delays)} delays")
    return np.asarray([fractional_delay(X[m], delays.delays[m]) for m in range(X.shape[0])])


def delay_and_sum(channels, delays: SteeringDelays) -> np.ndarray:
    """Steer and average (sum / M) the microphone channels."""
    return steer(channels, delays).mean(axis=0)


def filter_and_sum_adaptive(channels, geom: ArrayGeometry, angle: float,
                            filter_cfg: FilterConfig | None = None) -> np.ndarray:
    cfg = filter_cfg or FilterConfig(num_taps=32, block_size=256, mu=0.1)
    X = _as_channels(channels)
    if X.shape[0] != geom.mic_count:
        raise ValueError(f"{X.shape[0]} channels for a {geom.mic_count}-mic geometry")
    aligned = steer(X, steering_delays(geom, angle))
    fixed = aligned.mean(axis=0)
    blocked = np.diff(aligned, axis=0)
    return nlms_multi(blocked, fixed, cfg.num_taps, cfg.mu, cfg.nlms_epsilon,
                      cfg.block_size).e


def simulate_plane_wave(source, geom: ArrayGeometry, angle: float) -> np.ndarray:
    """Render a far-field source at every mic of the array.

    Arrival offsets are applied as exact band-limited shifts in the
    frequency domain (circular), so the result is independent of the
    linear-interpolation steering it is used to check. Mic ``m`` lags by
    ``max(steer) - steer[m]`` samples.
    """
    s = np.asarray(source, dtype=np.float64).ravel()
    lags = steering_delays(geom, angle).delays
    lags = lags.max() - lags
    n = s.size
    spec = np.fft.rfft(s)
    freqs = np.fft.rfftfreq(n)
    out = np.empty((geom.mic_count, n))
    for m, lag in enumerate(lags):
        phase = np.exp(-2j * np.pi * freqs * lag)
        if n % 2 == 0:
            # keep the Nyquist bin real so the shift stays a real signal
            phase[-1] = np.cos(np.pi * lag)
        out[m] = np.fft.irfft(spec * phase, n)
    return out


def array_snr_gain(signal_channels, noise_channels, delays: SteeringDelays) -> float:
    """Output SNR over mean per-mic SNR, from separately known components.

    Delay-and-sum is linear, so the two components are beamformed
    separately. Per-mic SNR is taken after steering so the mild lowpass
    of fractional-delay interpolation is not credited as array gain.
    """
    S = steer(signal_channels, delays)
    V = steer(noise_channels, delays)
    snr_in = np.mean(np.sum(S**2, axis=1)) / np.mean(np.sum(V**2, axis=1))
    s_out = S.mean(axis=0)
    v_out = V.mean(axis=0)
    snr_out = np.sum(s_out**2) / np.sum(v_out**2)
    return float(10 * np.log10(snr_out / snr_in))

