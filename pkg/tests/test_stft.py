import numpy as np
import pytest

from cbss.signals import Waveform
from cbss.stft import Spectrogram, StftConfig, analyze, synthesize


def _random_wave(rng, n=10000, rate=10000):
    return Waveform(rng.standard_normal(n), rate)


def test_config_validates_frame_length_and_overlap():
    with pytest.raises(ValueError):
        StftConfig(300, 0.5)
    with pytest.raises(ValueError):
        StftConfig(256, 1.0)
    with pytest.raises(ValueError):
        StftConfig(256, -0.1)
    # 0.3 overlap on 256 samples gives a fractional hop
    with pytest.raises(ValueError):
        StftConfig(256, 0.3)


def test_config_rejects_non_cola_window_pair():
    # plain Hann squared against itself does not overlap-add flat at 50%
    with pytest.raises(ValueError):
        StftConfig(256, 0.5, window="hann")


def test_config_hop_and_bins():
    cfg = StftConfig(1024, 0.75)
    assert cfg.hop == 256
    assert cfg.n_bins == 513


def test_round_trip_across_configs():
    rng = np.random.default_rng(0)
    for k in (256, 1024, 2048):
        for overlap in (0.5, 0.75):
            cfg = StftConfig(k, overlap)
            x = _random_wave(rng)
            y = synthesize(analyze(x, cfg))
            err = np.linalg.norm(y.samples - x.samples) / np.linalg.norm(x.samples)
            assert err <= 1e-6, f"K={k} overlap={overlap}: {err}"


def test_round_trip_preserves_length_and_rate():
    cfg = StftConfig(256, 0.75)
    x = Waveform(np.random.default_rng(1).standard_normal(5000), 16000)
    y = synthesize(analyze(x, cfg))
    assert len(y) == len(x)
    assert y.sample_rate == 16000


def test_zero_spectrogram_gives_zero_signal():
    cfg = StftConfig(256, 0.5)
    x = _random_wave(np.random.default_rng(2), n=2000)
    spec = analyze(x, cfg)
    silent = spec.with_values(np.zeros_like(spec.values))
    y = synthesize(silent)
    assert np.all(y.samples == 0.0)
    assert len(y) == len(x)


def test_linearity_of_round_trip():
    cfg = StftConfig(512, 0.75)
    x = _random_wave(np.random.default_rng(3), n=4000)
    spec = analyze(x, cfg)
    y = synthesize(spec.with_values(0.5 * spec.values))
    err = np.linalg.norm(y.samples - 0.5 * x.samples) / np.linalg.norm(x.samples)
    assert err <= 1e-6


def test_analyze_rejects_short_signal():
    cfg = StftConfig(1024, 0.5)
    with pytest.raises(ValueError):
        analyze(Waveform(np.zeros(1000), 8000), cfg)


def test_frame_energy_matches_spectrum_energy():
    # Parseval per frame: windowed-frame energy equals spectral energy / K.
    rng = np.random.default_rng(4)
    cfg = StftConfig(256, 0.5)
    k, hop = cfg.frame_length, cfg.hop
    x = _random_wave(rng, n=3000)
    spec = analyze(x, cfg)

    pad = k - hop
    total = (spec.n_frames - 1) * hop + k
    buf = np.zeros(total)
    buf[pad : pad + len(x)] = x.samples
    window = cfg.analysis_window()

    for m in (0, spec.n_frames // 2, spec.n_frames - 1):
        frame = buf[m * hop : m * hop + k] * window
        time_energy = np.sum(frame**2)
        col = spec.values[:, m]
        spec_energy = (
            np.abs(col[0]) ** 2
            + np.abs(col[-1]) ** 2
            + 2.0 * np.sum(np.abs(col[1:-1]) ** 2)
        ) / k
        assert time_energy == pytest.approx(spec_energy, rel=1e-9)


def test_spectrogram_validates_geometry():
    cfg = StftConfig(256, 0.5)
    with pytest.raises(ValueError):
        Spectrogram(np.zeros((10, 5), dtype=complex), cfg, 8000, 1000)
    with pytest.raises(ValueError):
        Spectrogram(np.full((129, 5), np.nan, dtype=complex), cfg, 8000, 1000)
    with pytest.raises(ValueError):
        Spectrogram(np.zeros((129, 5), dtype=complex), cfg, 0, 1000)


def test_spectrogram_values_read_only():
    cfg = StftConfig(256, 0.5)
    spec = Spectrogram(np.zeros((129, 4), dtype=complex), cfg, 8000, 900)
    with pytest.raises(ValueError):
        spec.values[0, 0] = 1.0
