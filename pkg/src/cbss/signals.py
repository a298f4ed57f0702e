"""Time-domain audio containers, WAV file I/O, and a synthetic test source.

WAV support is deliberately narrow: RIFF files holding 16-bit PCM or IEEE
float32 samples, one or two channels.  Everything is normalized to float64
in [-1, 1] on read so the rest of the toolkit never sees integer codes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

PCM16_SCALE = 32768.0


class WavError(ValueError):
    """Base class for WAV file problems."""


class UnsupportedWavError(WavError):
    """File is not a readable PCM16/float32 RIFF WAVE with 1-2 channels."""


class EmptyWavError(WavError):
    """File decodes to zero audio samples."""


@dataclass(frozen=True, eq=False)
class Waveform:
    """A finite single-channel signal with its sample rate in Hz.

    Samples are stored as a read-only float64 array; construction rejects
    NaN/Inf values and non-positive rates.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("waveform samples must be one-dimensional")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform samples must be finite")
        rate = int(self.sample_rate)
        if rate <= 0:
            raise ValueError("sample_rate must be positive")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", rate)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        """Length in seconds."""
        return len(self) / self.sample_rate


@dataclass(frozen=True, eq=False)
class MultichannelRecording:
    """One or more equally long channels sharing a sample rate."""

    channels: tuple[Waveform, ...]

    def __post_init__(self) -> None:
        channels = tuple(self.channels)
        if len(channels) < 1:
            raise ValueError("recording needs at least one channel")
        rate = channels[0].sample_rate
        length = len(channels[0])
        for ch in channels[1:]:
            if ch.sample_rate != rate:
                raise ValueError("all channels must share one sample rate")
            if len(ch) != length:
                raise ValueError("all channels must have equal length")
        object.__setattr__(self, "channels", channels)

    @property
    def sample_rate(self) -> int:
        return self.channels[0].sample_rate

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def n_samples(self) -> int:
        return len(self.channels[0])

    def to_array(self) -> np.ndarray:
        """Stack channels into a (n_channels, n_samples) float64 array."""
        return np.stack([ch.samples for ch in self.channels])


def read_wav(path) -> MultichannelRecording:
    """Read a 1- or 2-channel PCM16/float32 WAV file.

    PCM16 samples are scaled by 1/32768 (a single fixed scale, so
    inter-channel level ratios survive).  Float32 samples pass through
    unchanged.

    Raises FileNotFoundError for a missing file, UnsupportedWavError for
    malformed files or encodings outside the supported pair, and
    EmptyWavError for files with no audio frames.
    """
    try:
        rate, data = wavfile.read(path)
    except OSError:
        raise
    except Exception as exc:
        raise UnsupportedWavError(f"unsupported or corrupt WAV file: {path}: {exc}") from exc

    if data.size == 0:
        raise EmptyWavError(f"WAV file holds no samples: {path}")
    if data.dtype == np.int16:
        scaled = data / PCM16_SCALE
    elif data.dtype == np.float32:
        scaled = data.astype(np.float64)
    else:
        raise UnsupportedWavError(
            f"unsupported sample encoding {data.dtype} in {path}; "
            "only 16-bit PCM and IEEE float32 are readable"
        )

    if scaled.ndim == 1:
        scaled = scaled[:, None]
    if scaled.shape[1] > 2:
        raise UnsupportedWavError(
            f"{path} has {scaled.shape[1]} channels; only mono and stereo are supported"
        )
    channels = tuple(Waveform(scaled[:, c], rate) for c in range(scaled.shape[1]))
    return MultichannelRecording(channels)


def write_wav(recording: MultichannelRecording, path, encoding: str = "float32") -> None:
    """Write a recording as float32 (default) or 16-bit PCM.

    PCM output clips samples to [-1, 1] first, then quantizes with scale
    32768 so a round trip stays within one LSB.
    """
    data = recording.to_array().T  # frames x channels
    if encoding == "float32":
        out = data.astype(np.float32)
    elif encoding == "pcm16":
        clipped = np.clip(data, -1.0, 1.0)
        codes = np.round(clipped * PCM16_SCALE)
        out = np.clip(codes, -32768, 32767).astype(np.int16)
    else:
        raise ValueError(f"unknown encoding {encoding!r}; use 'float32' or 'pcm16'")
    if out.shape[1] == 1:
        out = out[:, 0]
    wavfile.write(path, recording.sample_rate, out)


def gen_am_source(
    seed: int,
    duration_s: float,
    sample_rate: int,
    mod_rate: float,
) -> Waveform:
    """Generate a deterministic non-stationary test source.

    White Gaussian noise is amplitude-modulated by a raised sinusoid at
    `mod_rate` Hz with a seed-derived phase, then peak-normalized to 0.9.
    The envelope stays strictly positive, so short-time power swings by
    tens of dB over a modulation period, which is what the separation
    stage's non-stationarity assumption feeds on.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    if not 0.5 <= mod_rate <= 16.0:
        raise ValueError("mod_rate must lie in [0.5, 16] Hz")
    if sample_rate <= 0:
        raise ValueError("sample_rate must be positive")

    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate))
    noise = rng.standard_normal(n)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    t = np.arange(n) / sample_rate
    # Envelope in [0.05, 1.0]: never fully gates the noise off.
    envelope = 0.05 + 0.475 * (1.0 + np.sin(2.0 * np.pi * mod_rate * t + phase))
    x = noise * envelope
    peak = np.max(np.abs(x))
    if peak > 0:
        x = 0.9 * x / peak
    return Waveform(x, sample_rate)
