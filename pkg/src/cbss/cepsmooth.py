"""Cepstral-domain temporal smoothing of spectral masks.

Binary masks win on interference suppression but leave randomly isolated
units that resynthesize as musical noise.  Smoothing the mask over time
fixes that, but doing it directly per frequency bin also blurs exactly the
structure worth keeping: the spectral envelope and the pitch harmonics.
Working in the cepstrum separates those concerns by quefrency:

  * low quefrencies [0, l_env] carry the envelope,
  * one bin l_pitch (found from the separated signal itself) carries the
    harmonic comb,
  * everything else is presumed mask noise.

Each region gets its own first-order recursive smoothing factor, usually
none for the envelope, mild for the pitch bin, and strong elsewhere.
The mask column is floored, log-transformed, expanded to an even spectrum,
moved to the cepstrum, smoothed across frames per quefrency, and moved
back; outputs are clamped to [floor, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .masking import SpectralMask
from .stft import Spectrogram

SYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class SmoothingParams:
    """Per-quefrency smoothing factors and band edges for one DFT length."""

    dft_length: int = 2048
    beta_env: float = 0.0
    beta_pitch: float = 0.4
    beta_peak: float = 0.9
    l_env: int = 8
    l_low: int = 16
    l_high: int = 120
    mask_floor: float = 1e-3

    def __post_init__(self) -> None:
        k = self.dft_length
        if k <= 0 or k % 2 != 0:
            raise ValueError("dft_length must be a positive even number")
        for name in ("beta_env", "beta_pitch", "beta_peak"):
            b = getattr(self, name)
            if not 0.0 <= b <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.mask_floor < 1.0:
            raise ValueError("mask_floor must lie in (0, 1)")
        if not 0 < self.l_env < self.l_low < self.l_high < k // 2:
            raise ValueError(
                "quefrency bands must satisfy 0 < l_env < l_low < l_high < K/2"
            )

    @classmethod
    def from_pitch_range_hz(
        cls, f_min: float, f_max: float, sample_rate: int, **kwargs
    ) -> "SmoothingParams":
        """Convert a pitch frequency range into quefrency search bounds."""
        if not 0 < f_min < f_max:
            raise ValueError("need 0 < f_min < f_max")
        l_low = int(round(sample_rate / f_max))
        l_high = int(round(sample_rate / f_min))
        return cls(l_low=l_low, l_high=l_high, **kwargs)


@dataclass(frozen=True, eq=False)
class CepstralFrame:
    """Real, even-symmetric cepstral coefficients for one frame."""

    coefficients: np.ndarray
    frame_index: int = 0

    def __post_init__(self) -> None:
        c = np.array(self.coefficients, dtype=np.float64)
        if c.ndim != 1 or c.shape[0] < 2 or c.shape[0] % 2 != 0:
            raise ValueError("coefficients must be a 1-D array of even length")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        mirror = np.concatenate(([c[0]], c[:0:-1]))
        scale = max(1.0, float(np.max(np.abs(c))))
        if np.max(np.abs(c - mirror)) > SYMMETRY_TOL * scale:
            raise ValueError("coefficients must satisfy c(l) = c(K - l)")
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)

    @property
    def dft_length(self) -> int:
        return self.coefficients.shape[0]


def _even_spectrum(half: np.ndarray) -> np.ndarray:
    """Expand bins [0, K/2] to the full even spectrum of length K."""
    return np.concatenate([half, half[-2:0:-1]])


def _cepstrum_from_half(half: np.ndarray, floor: float) -> np.ndarray:
    full = _even_spectrum(np.maximum(half, floor))
    return np.real(np.fft.ifft(np.log(full)))


def mask_frame_to_cepstrum(
    column: np.ndarray, mask_floor: float, frame_index: int = 0
) -> CepstralFrame:
    """Cepstrum of one mask column (bins 0..K/2, values in [0, 1])."""
    column = np.asarray(column, dtype=np.float64)
    if column.ndim != 1 or column.shape[0] < 2:
        raise ValueError("mask column must be 1-D with at least two bins")
    if np.any(column < 0.0) or np.any(column > 1.0):
        raise ValueError("mask values must lie in [0, 1]")
    return CepstralFrame(_cepstrum_from_half(column, mask_floor), frame_index)


def magnitude_cepstrum(
    magnitudes: np.ndarray, floor: float, frame_index: int = 0
) -> CepstralFrame:
    """Cepstrum of arbitrary non-negative half-spectrum magnitudes."""
    magnitudes = np.asarray(magnitudes, dtype=np.float64)
    if magnitudes.ndim != 1 or magnitudes.shape[0] < 2:
        raise ValueError("magnitudes must be 1-D with at least two bins")
    if np.any(magnitudes < 0.0):
        raise ValueError("magnitudes must be non-negative")
    return CepstralFrame(_cepstrum_from_half(magnitudes, floor), frame_index)


def estimate_pitch_quefrency(frame: CepstralFrame, l_low: int, l_high: int) -> int:
    """Arg-max of the cepstrum over [l_low, l_high]; ties pick the smallest l."""
    k = frame.dft_length
    if not 0 <= l_low <= l_high < k // 2:
        raise ValueError("need 0 <= l_low <= l_high < K/2")
    window = frame.coefficients[l_low : l_high + 1]
    return l_low + int(np.argmax(window))


def beta_for_quefrency(l: int, l_pitch: int, params: SmoothingParams) -> float:
    """Smoothing factor for quefrency l given the current pitch quefrency.

    The mirrored quefrency K - l receives the same factor as l, keeping the
    smoothed cepstrum even-symmetric.
    """
    k = params.dft_length
    if not 0 <= l < k:
        raise ValueError("quefrency out of range")
    folded = min(l, k - l)
    if folded <= params.l_env:
        return params.beta_env
    if folded == l_pitch:
        return params.beta_pitch
    return params.beta_peak


def _beta_schedule(l_pitch: int, params: SmoothingParams) -> np.ndarray:
    k = params.dft_length
    l = np.arange(k)
    folded = np.minimum(l, k - l)
    betas = np.full(k, params.beta_peak)
    betas[folded == l_pitch] = params.beta_pitch
    betas[folded <= params.l_env] = params.beta_env
    return betas


def smooth_step(
    prev: CepstralFrame, current: CepstralFrame, l_pitch: int, params: SmoothingParams
) -> CepstralFrame:
    """One recursion step: beta(l) * prev + (1 - beta(l)) * current."""
    if prev.dft_length != current.dft_length or prev.dft_length != params.dft_length:
        raise ValueError("frames and params must agree on the DFT length")
    if not 0 <= l_pitch < params.dft_length // 2:
        raise ValueError("l_pitch out of range")
    betas = _beta_schedule(l_pitch, params)
    mixed = betas * prev.coefficients + (1.0 - betas) * current.coefficients
    return CepstralFrame(mixed, current.frame_index)


def cepstrum_to_mask(frame: CepstralFrame, mask_floor: float) -> np.ndarray:
    """Back to a mask column: exponentiate the log spectrum, clamp to [floor, 1]."""
    log_spectrum = np.real(np.fft.fft(frame.coefficients))
    column = np.exp(log_spectrum)
    return np.clip(column[: frame.dft_length // 2 + 1], mask_floor, 1.0)


def smooth_mask(
    mask: SpectralMask, separated: Spectrogram, params: SmoothingParams
) -> SpectralMask:
    """Smooth a mask across frames in the cepstral domain.

    The pitch quefrency is re-estimated every frame from the separated
    signal the mask belongs to, so the pitch-adaptive band tracks that
    speaker.  The recursion is seeded with the first frame's own cepstrum,
    which makes frame 0 pass through (floored and clamped) unchanged.
    """
    if mask.values.shape != separated.values.shape:
        raise ValueError("mask and spectrogram shapes differ")
    k = params.dft_length
    if separated.config.frame_length != k:
        raise ValueError("params.dft_length must match the spectrogram frame length")

    floor = params.mask_floor
    magnitudes = np.abs(separated.values)
    n_bins, n_frames = mask.values.shape
    out = np.empty((n_bins, n_frames))

    state: np.ndarray | None = None
    for m in range(n_frames):
        signal_cep = _cepstrum_from_half(magnitudes[:, m], floor)
        l_pitch = params.l_low + int(
            np.argmax(signal_cep[params.l_low : params.l_high + 1])
        )
        current = _cepstrum_from_half(mask.values[:, m], floor)
        if state is None:
            state = current
        else:
            betas = _beta_schedule(l_pitch, params)
            state = betas * state + (1.0 - betas) * current
        log_spectrum = np.real(np.fft.fft(state))
        out[:, m] = np.clip(np.exp(log_spectrum[: n_bins]), floor, 1.0)

    return SpectralMask(out, "smoothed")
