import json

import numpy as np
import pytest

from cbss.cli import main
from cbss.signals import MultichannelRecording, Waveform, read_wav, write_wav

FAST_CONFIG = """
dft_length = 512
overlap_factor = 0.75
filter_support = 128
block_count = 4
max_iters = 40
room_height = 3.0
room_width = 3.0
room_depth = 3.0
synth_duration_s = 2.0
synth_sample_rate = 8000
seed = 0
"""


@pytest.fixture()
def fast_cfg(tmp_path):
    path = tmp_path / "fast.cfg"
    path.write_text(FAST_CONFIG)
    return str(path)


def _run(argv):
    return main(argv)


def test_simulate_writes_scene_files(tmp_path, fast_cfg):
    out = tmp_path / "scene"
    code = _run(
        ["simulate", "--synthetic", "--rt60", "150", "--config", fast_cfg, "--out", str(out)]
    )
    assert code == 0
    mixture = read_wav(out / "mixture.wav")
    assert mixture.n_channels == 2
    assert mixture.sample_rate == 8000
    for name in ("source_1.wav", "source_2.wav"):
        assert read_wav(out / name).n_channels == 1
    for mic in (1, 2):
        for src in (1, 2):
            assert (out / f"image_m{mic}_s{src}.wav").exists()
    manifest = (out / "manifest.txt").read_text()
    assert "rt60_ms = 150.0" in manifest
    assert "mixture = mixture.wav" in manifest


def test_simulate_rejects_source_file_conflicts(tmp_path, fast_cfg):
    out = tmp_path / "scene"
    code = _run(
        [
            "simulate",
            "a.wav",
            "b.wav",
            "--synthetic",
            "--config",
            fast_cfg,
            "--out",
            str(out),
        ]
    )
    assert code == 1
    code = _run(["simulate", "only_one.wav", "--config", fast_cfg, "--out", str(out)])
    assert code == 1


def test_separate_happy_path_is_deterministic(tmp_path, fast_cfg):
    scene = tmp_path / "scene"
    assert (
        _run(
            [
                "simulate",
                "--synthetic",
                "--rt60",
                "150",
                "--config",
                fast_cfg,
                "--out",
                str(scene),
            ]
        )
        == 0
    )

    outs = []
    for name in ("run_a", "run_b"):
        out = tmp_path / name
        code = _run(
            [
                "separate",
                str(scene / "mixture.wav"),
                "--config",
                fast_cfg,
                "--out",
                str(out),
            ]
        )
        assert code == 0
        outs.append(out)

    report = json.loads((outs[0] / "report.json").read_text())
    assert report["kind"] == "separation"
    assert report["solver"]["final_cost"] <= report["solver"]["initial_cost"]
    assert report["outputs"]["stage1"] == ["stage1_1.wav", "stage1_2.wav"]
    assert report["outputs"]["final"] == ["final_1.wav", "final_2.wav"]

    for name in ("stage1_1.wav", "stage1_2.wav", "final_1.wav", "final_2.wav"):
        a = (outs[0] / name).read_bytes()
        b = (outs[1] / name).read_bytes()
        assert a == b


def test_separate_rejects_mono_input(tmp_path, fast_cfg):
    mono = tmp_path / "mono.wav"
    wave = Waveform(np.zeros(4000) + 0.1, 8000)
    write_wav(MultichannelRecording((wave,)), mono)
    out = tmp_path / "out"
    assert _run(["separate", str(mono), "--config", fast_cfg, "--out", str(out)]) == 1


def test_separate_missing_file_is_runtime_error(tmp_path, fast_cfg):
    out = tmp_path / "out"
    code = _run(["separate", str(tmp_path / "nope.wav"), "--config", fast_cfg, "--out", str(out)])
    assert code == 1


def _write_mono(path, samples, rate=8000):
    write_wav(MultichannelRecording((Waveform(np.asarray(samples, dtype=float), rate),)), path)


def test_evaluate_needs_exactly_one_scoring_mode(tmp_path):
    est1 = tmp_path / "e1.wav"
    est2 = tmp_path / "e2.wav"
    _write_mono(est1, 0.1 * np.ones(400))
    _write_mono(est2, 0.1 * np.ones(400))
    with pytest.raises(SystemExit) as info:
        _run(["evaluate", str(est1), str(est2)])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        _run(
            [
                "evaluate",
                str(est1),
                str(est2),
                "--references",
                str(est1),
                str(est2),
                "--segments",
                "0:10,10:20",
            ]
        )
    assert info.value.code == 2


def test_evaluate_reference_mode_caps_perfect_estimates(tmp_path, capsys):
    rng = np.random.default_rng(3)
    r1 = tmp_path / "r1.wav"
    r2 = tmp_path / "r2.wav"
    s1 = (0.5 * rng.standard_normal(4000)).clip(-0.99, 0.99)
    s2 = (0.5 * rng.standard_normal(4000)).clip(-0.99, 0.99)
    _write_mono(r1, s1)
    _write_mono(r2, s2)
    code = _run(
        ["evaluate", str(r1), str(r2), "--references", str(r1), str(r2)]
    )
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["mode"] == "reference"
    assert report["sir_db"] == [100.0, 100.0]
    assert all(v >= 90.0 for v in report["sdr_db"])


def test_evaluate_segment_mode_matches_rms_ratio(tmp_path, capsys):
    est1 = tmp_path / "e1.wav"
    est2 = tmp_path / "e2.wav"
    a = np.zeros(200)
    a[:100] = 0.5
    a[100:] = 0.05
    b = np.zeros(200)
    b[:100] = 0.05
    b[100:] = 0.5
    _write_mono(est1, a)
    _write_mono(est2, b)
    code = _run(["evaluate", str(est1), str(est2), "--segments", "0:100,100:200"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["mode"] == "segment"
    assert report["sir_db"][0] == pytest.approx(20.0, abs=1e-5)
    assert report["sir_db"][1] == pytest.approx(20.0, abs=1e-5)
    assert report["segments"]["first"] == [0, 100]


def test_evaluate_malformed_segments_is_usage_error(tmp_path):
    est = tmp_path / "e.wav"
    _write_mono(est, 0.1 * np.ones(100))
    for bad in ("0:100", "a:b,c:d", "0:100,100:200,200:300", ""):
        with pytest.raises(SystemExit) as info:
            _run(["evaluate", str(est), str(est), "--segments", bad])
        assert info.value.code == 2


def test_evaluate_mismatched_estimates_fail(tmp_path):
    est1 = tmp_path / "e1.wav"
    est2 = tmp_path / "e2.wav"
    _write_mono(est1, 0.1 * np.ones(100))
    _write_mono(est2, 0.1 * np.ones(150))
    assert _run(["evaluate", str(est1), str(est2), "--segments", "0:10,10:20"]) == 1


def test_sweep_empty_rt60_is_usage_error(tmp_path, fast_cfg):
    for bad in ("", "abc", "100,,200"):
        with pytest.raises(SystemExit) as info:
            _run(["sweep", "--rt60", bad, "--config", fast_cfg, "--out", str(tmp_path / "s")])
        assert info.value.code == 2


def test_sweep_writes_report_and_outputs(tmp_path, fast_cfg):
    out = tmp_path / "sweep"
    code = _run(["sweep", "--rt60", "150", "--config", fast_cfg, "--out", str(out)])
    assert code == 0
    report = json.loads((out / "sweep_report.json").read_text())
    assert report["kind"] == "sweep"
    assert len(report["rows"]) == 1
    row = report["rows"][0]
    assert row["rt60_ms"] == 150.0
    assert set(row["stage1_sir_db"]) == {"signal_1", "signal_2", "average"}
    rt_dir = out / "rt150"
    for name in ("mixture.wav", "stage1_1.wav", "final_2.wav", "report.json"):
        assert (rt_dir / name).exists()
