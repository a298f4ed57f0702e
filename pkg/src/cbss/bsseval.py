"""Projection-based separation metrics for two-source estimates.

An estimate is split into target, interference, and artifact components by
least-squares projection onto the spans of delayed references (a bank of L
allowed deformation taps per reference).  SIR is the energy ratio between
the first two components in dB; SDR and SAR fall out of the same split.

The dB convention throughout is 10*log10 of an energy ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz
from scipy.signal import fftconvolve

from .signals import Waveform

SIR_CAP_DB = 100.0
ENERGY_RATIO_FLOOR = 1e-12
DIAGONAL_LOADING = 1e-9


@dataclass(frozen=True, eq=False)
class Decomposition:
    """estimate = target + interference + artifact, all on a padded domain."""

    target: Waveform
    interference: Waveform
    artifact: Waveform
    filter_taps: int
    regularized: bool = False

    def __post_init__(self) -> None:
        if not len(self.target) == len(self.interference) == len(self.artifact):
            raise ValueError("decomposition components must share one length")
        if self.filter_taps < 1:
            raise ValueError("filter_taps must be positive")


@dataclass(frozen=True)
class SegmentAnnotation:
    """Two disjoint [start, end) sample intervals, one per speaker."""

    first: tuple[int, int]
    second: tuple[int, int]

    def __post_init__(self) -> None:
        for start, end in (self.first, self.second):
            if start < 0 or end <= start:
                raise ValueError("segments must satisfy 0 <= start < end")
        a, b = sorted((self.first, self.second))
        if a[1] > b[0]:
            raise ValueError("segments must not overlap")
        object.__setattr__(self, "first", (int(self.first[0]), int(self.first[1])))
        object.__setattr__(self, "second", (int(self.second[0]), int(self.second[1])))


def _correlation(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """c[N - 1 + t] = sum_n x[n + t] y[n] for t in [-(N-1), N-1], zero-extended."""
    return fftconvolve(x, y[::-1])


def _solve(gram: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, bool]:
    try:
        return np.linalg.solve(gram, rhs), False
    except np.linalg.LinAlgError:
        n = gram.shape[0]
        loading = DIAGONAL_LOADING * max(1.0, float(np.trace(gram).real) / n)
        return np.linalg.solve(gram + loading * np.eye(n), rhs), True


def project_decompose(
    estimate: Waveform,
    references: tuple[Waveform, Waveform],
    filter_taps: int = 512,
) -> Decomposition:
    """Least-squares split of an estimate against (target, interferer) references.

    references[0] is the target.  The target component is the projection
    onto the target's L delayed copies alone; interference is what the
    joint two-reference projection adds on top; the artifact is the
    remainder.  Components live on a zero-extended domain of length
    N + L - 1.  Singular normal equations (degenerate references) fall
    back to a diagonally loaded solve, flagged on the result.
    """
    ref_t, ref_i = references
    n = len(estimate)
    if len(ref_t) != n or len(ref_i) != n:
        raise ValueError("estimate and references must share one length")
    if not estimate.sample_rate == ref_t.sample_rate == ref_i.sample_rate:
        raise ValueError("estimate and references must share one sample rate")
    taps = int(filter_taps)
    if not 1 <= taps <= n:
        raise ValueError("filter_taps must lie in [1, signal length]")

    est = estimate.samples
    refs = [ref_t.samples, ref_i.samples]
    lags = np.arange(taps)

    # Gram blocks: <delay_i ref_a, delay_j ref_b> = corr(ref_b, ref_a)[i - j].
    blocks = [[None, None], [None, None]]
    for a in (0, 1):
        for b in (0, 1):
            c_ba = _correlation(refs[b], refs[a])
            col = c_ba[n - 1 + lags]
            c_ab = _correlation(refs[a], refs[b])
            row = c_ab[n - 1 + lags]
            blocks[a][b] = toeplitz(col, row)
    gram = np.block(blocks)

    rhs = np.empty(2 * taps)
    for a in (0, 1):
        c_ea = _correlation(est, refs[a])
        rhs[a * taps : (a + 1) * taps] = c_ea[n - 1 + lags]

    coef_joint, reg_joint = _solve(gram, rhs)
    coef_target, reg_target = _solve(blocks[0][0], rhs[:taps])

    padded = n + taps - 1
    target = fftconvolve(refs[0], coef_target)[:padded]
    joint = (
        fftconvolve(refs[0], coef_joint[:taps]) + fftconvolve(refs[1], coef_joint[taps:])
    )[:padded]
    est_padded = np.pad(est, (0, taps - 1))

    return Decomposition(
        target=Waveform(target, estimate.sample_rate),
        interference=Waveform(joint - target, estimate.sample_rate),
        artifact=Waveform(est_padded - joint, estimate.sample_rate),
        filter_taps=taps,
        regularized=reg_joint or reg_target,
    )


def _ratio_db(numerator: float, denominator: float) -> float:
    if numerator <= 0.0:
        return -SIR_CAP_DB
    if denominator < ENERGY_RATIO_FLOOR * numerator:
        return SIR_CAP_DB
    return min(SIR_CAP_DB, max(-SIR_CAP_DB, 10.0 * np.log10(numerator / denominator)))


def sir_db(decomposition: Decomposition) -> float:
    """Signal-to-interference ratio in dB, capped at +/-100."""
    target = float(np.sum(decomposition.target.samples**2))
    interference = float(np.sum(decomposition.interference.samples**2))
    return _ratio_db(target, interference)


def sdr_db(decomposition: Decomposition) -> float:
    """Signal-to-distortion ratio: target vs interference + artifact."""
    target = float(np.sum(decomposition.target.samples**2))
    error = decomposition.interference.samples + decomposition.artifact.samples
    return _ratio_db(target, float(np.sum(error**2)))


def sar_db(decomposition: Decomposition) -> float:
    """Signal-to-artifact ratio: projected part vs the projection residual."""
    kept = decomposition.target.samples + decomposition.interference.samples
    artifact = float(np.sum(decomposition.artifact.samples**2))
    return _ratio_db(float(np.sum(kept**2)), artifact)


def segment_sir(
    outputs: tuple[Waveform, Waveform], segments: SegmentAnnotation
) -> tuple[float, float]:
    """Reference-free SIR from single-speaker segments.

    Output 1 should carry speaker 1, so its mean power over the first
    segment is signal and over the second segment is leakage; output 2
    mirrors that.  Ratios are capped at +/-100 dB.
    """
    w1, w2 = outputs
    if len(w1) != len(w2):
        raise ValueError("outputs must share one length")
    for start, end in (segments.first, segments.second):
        if end > len(w1):
            raise ValueError("segment extends past the signal end")

    def mean_power(w: Waveform, bounds: tuple[int, int]) -> float:
        start, end = bounds
        return float(np.mean(w.samples[start:end] ** 2))

    sir1 = _ratio_db(mean_power(w1, segments.first), mean_power(w1, segments.second))
    sir2 = _ratio_db(mean_power(w2, segments.second), mean_power(w2, segments.first))
    return sir1, sir2
