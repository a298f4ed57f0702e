"""Binary time-frequency masks estimated from a pair of separated spectrograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stft import Spectrogram


@dataclass(frozen=True)
class MaskThreshold:
    """Dominance ratio tau: unit (k, m) goes to output i iff |S_i| > tau |S_j|."""

    value: float = 1.0

    def __post_init__(self) -> None:
        if not self.value > 0:
            raise ValueError("threshold must be positive")


@dataclass(frozen=True, eq=False)
class SpectralMask:
    """Per-unit gains, float (n_bins, n_frames); kind 'binary' or 'smoothed'."""

    values: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("mask values must be 2-D (bins x frames)")
        if not np.all(np.isfinite(values)):
            raise ValueError("mask values must be finite")
        if self.kind == "binary":
            if not np.all((values == 0.0) | (values == 1.0)):
                raise ValueError("binary mask values must be exactly 0 or 1")
        elif self.kind == "smoothed":
            if np.any(values <= 0.0) or np.any(values > 1.0):
                raise ValueError("smoothed mask values must lie in (0, 1]")
        else:
            raise ValueError(f"unknown mask kind {self.kind!r}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def estimate_binary_masks(
    s1: Spectrogram,
    s2: Spectrogram,
    threshold: MaskThreshold = MaskThreshold(1.0),
) -> tuple[SpectralMask, SpectralMask]:
    """Assign each unit to the strictly dominant output.

    Strict inequalities mean a tie (including both magnitudes zero)
    activates neither mask.  For tau >= 1 the two masks can never both be
    active on one unit.
    """
    if s1.values.shape != s2.values.shape:
        raise ValueError("spectrograms must have equal shape")
    a1 = np.abs(s1.values)
    a2 = np.abs(s2.values)
    m1 = (a1 > threshold.value * a2).astype(np.float64)
    m2 = (a2 > threshold.value * a1).astype(np.float64)
    return SpectralMask(m1, "binary"), SpectralMask(m2, "binary")


def apply_mask(mask: SpectralMask, spec: Spectrogram) -> Spectrogram:
    """Elementwise product; geometry and provenance carry over."""
    if mask.values.shape != spec.values.shape:
        raise ValueError("mask and spectrogram shapes differ")
    return spec.with_values(mask.values * spec.values)


def isolated_unit_fraction(mask: SpectralMask) -> float:
    """Fraction of active units with no active 4-neighbor.

    Values are binarized at 0.5 first so the measure applies to smoothed
    masks too.  Isolated units are the visual signature of musical noise;
    smoothing should push this number down.  Returns 0.0 for an empty mask.
    """
    active = mask.values > 0.5
    total = int(np.sum(active))
    if total == 0:
        return 0.0
    padded = np.pad(active, 1, mode="constant")
    neighbors = (
        padded[:-2, 1:-1].astype(np.int64)
        + padded[2:, 1:-1]
        + padded[1:-1, :-2]
        + padded[1:-1, 2:]
    )
    isolated = active & (neighbors == 0)
    return float(np.sum(isolated) / total)
