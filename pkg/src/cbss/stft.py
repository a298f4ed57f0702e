"""Short-time Fourier analysis and weighted overlap-add synthesis.

The analysis/synthesis pair is built for perfect reconstruction: the same
window is applied on both sides, the window product must satisfy
constant-overlap-add at the configured hop, and the signal is zero-padded
by one frame minus one hop at both ends so every original sample sees the
full window overlap.  Only the non-negative-frequency half of each frame
spectrum is stored; the missing bins are implied by conjugate symmetry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signals import Waveform

COLA_TOL = 1e-10

_WINDOW_NAMES = ("sqrt_hann", "hann", "rect")


def _window(name: str, frame_length: int) -> np.ndarray:
    n = np.arange(frame_length)
    if name == "sqrt_hann":
        return np.sin(np.pi * n / frame_length)
    if name == "hann":
        return np.sin(np.pi * n / frame_length) ** 2
    if name == "rect":
        return np.ones(frame_length)
    raise ValueError(f"unknown window {name!r}; choose from {_WINDOW_NAMES}")


@dataclass(frozen=True)
class StftConfig:
    """Frame length (power of two), overlap fraction, and window pair id."""

    frame_length: int = 2048
    overlap_fraction: float = 0.75
    window: str = "sqrt_hann"
    hop: int = field(init=False)

    def __post_init__(self) -> None:
        k = self.frame_length
        if k <= 0 or (k & (k - 1)) != 0:
            raise ValueError("frame_length must be a positive power of two")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise ValueError("overlap_fraction must lie in [0, 1)")
        hop_exact = k * (1.0 - self.overlap_fraction)
        hop = int(round(hop_exact))
        if hop < 1 or abs(hop_exact - hop) > 1e-9:
            raise ValueError("overlap_fraction must give an integer hop size")
        object.__setattr__(self, "hop", hop)
        self._check_cola()

    def _check_cola(self) -> None:
        """Reject window/hop pairs whose overlap-add profile is not flat."""
        product = self.analysis_window() * self.synthesis_window()
        k, hop = self.frame_length, self.hop
        total = 4 * k
        profile = np.zeros(total)
        for start in range(0, total - k + 1, hop):
            profile[start : start + k] += product
        interior = profile[k : 2 * k]
        mean = float(np.mean(interior))
        if mean <= 0 or np.max(np.abs(interior - mean)) > COLA_TOL * mean:
            raise ValueError(
                f"window {self.window!r} at hop {hop} violates the "
                "constant-overlap-add condition"
            )

    @property
    def n_bins(self) -> int:
        return self.frame_length // 2 + 1

    def analysis_window(self) -> np.ndarray:
        return _window(self.window, self.frame_length)

    def synthesis_window(self) -> np.ndarray:
        return _window(self.window, self.frame_length)


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Half-spectrum STFT values: complex (n_bins, n_frames).

    `original_length` records the analyzed signal's sample count so
    synthesis can strip the padding again.
    """

    values: np.ndarray
    config: StftConfig
    sample_rate: int
    original_length: int

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.complex128)
        if values.ndim != 2:
            raise ValueError("spectrogram values must be 2-D (bins x frames)")
        if values.shape[0] != self.config.n_bins:
            raise ValueError(
                f"expected {self.config.n_bins} frequency bins, got {values.shape[0]}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("spectrogram values must be finite")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.original_length < 0:
            raise ValueError("original_length must be non-negative")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n_bins(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray) -> "Spectrogram":
        """Same geometry and provenance, different bin values."""
        return Spectrogram(values, self.config, self.sample_rate, self.original_length)


def analyze(signal: Waveform, config: StftConfig) -> Spectrogram:
    """Transform a waveform into its half-spectrum STFT.

    Frame m covers samples [m*hop, m*hop + K) of the padded signal, where
    K - hop zeros are prepended and at least as many appended.
    """
    n = len(signal)
    k, hop = config.frame_length, config.hop
    if n < k:
        raise ValueError(f"signal of {n} samples is shorter than one frame ({k})")

    pad = k - hop
    covered = pad + n + pad
    n_frames = int(np.ceil((covered - k) / hop)) + 1
    total = (n_frames - 1) * hop + k
    buf = np.zeros(total)
    buf[pad : pad + n] = signal.samples

    frames = np.lib.stride_tricks.sliding_window_view(buf, k)[::hop]
    windowed = frames * config.analysis_window()
    values = np.fft.rfft(windowed, axis=1).T
    return Spectrogram(values, config, signal.sample_rate, n)


def synthesize(spec: Spectrogram) -> Waveform:
    """Weighted overlap-add resynthesis, truncated to the original length."""
    config = spec.config
    k, hop = config.frame_length, config.hop
    pad = k - hop
    n_frames = spec.n_frames

    frames = np.fft.irfft(spec.values.T, n=k, axis=1)
    synthesis = config.synthesis_window()
    weight = config.analysis_window() * synthesis

    total = (n_frames - 1) * hop + k
    acc = np.zeros(total)
    norm = np.zeros(total)
    for m in range(n_frames):
        start = m * hop
        acc[start : start + k] += frames[m] * synthesis
        norm[start : start + k] += weight
    out = np.where(norm > 1e-12, acc / np.where(norm > 1e-12, norm, 1.0), 0.0)

    return Waveform(out[pad : pad + spec.original_length], spec.sample_rate)
