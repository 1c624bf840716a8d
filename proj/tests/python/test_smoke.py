import json

import numpy as np
import pytest

import eegtl


def test_version():
    assert eegtl.__version__ == "0.1.0"


def test_synth_and_epoch_roundtrip(tmp_path):
    sets = eegtl.synth_generate(n_subjects=2, n_trials=8, n_samples=64, sample_rate_hz=64.0, seed=3)
    assert sorted(sets) == [(1, 1), (1, 2), (2, 1), (2, 2)]
    s = sets[(1, 1)]
    assert s.data.shape == (8, 6, 64)
    assert s.data.dtype == np.float32
    eegtl.save_epochset(s, tmp_path / "e")
    back = eegtl.load_epochset(tmp_path / "e")
    assert back == s
    assert np.array_equal(back.data, s.data)


def test_corruption_is_detected(tmp_path):
    s = eegtl.synth_generate(n_subjects=1, n_trials=4, n_samples=64, sample_rate_hz=64.0)[(1, 1)]
    eegtl.save_epochset(s, tmp_path / "e")
    blob = tmp_path / "e" / "epochs.bin"
    raw = bytearray(blob.read_bytes())
    raw[10] ^= 0x01
    blob.write_bytes(bytes(raw))
    with pytest.raises(eegtl.FormatError):
        eegtl.load_epochset(tmp_path / "e")


def test_metrics():
    truth = np.array([0, 0, 1, 1])
    pred = np.array([0, 1, 1, 1])
    assert eegtl.accuracy(pred, truth) == 0.75
    assert eegtl.kappa(pred, truth, 2) == pytest.approx(0.5)
    assert eegtl.confusion_matrix(pred, truth, 2).tolist() == [[1, 1], [0, 2]]
    with pytest.raises(ValueError):
        eegtl.kappa(pred, truth, 2, mode="fleiss")


def test_highpass_removes_offset():
    s = eegtl.synth_generate(n_subjects=1, n_trials=4, n_samples=256, sample_rate_hz=128.0)[(1, 1)]
    data = s.data
    data += 50.0
    s.data = data
    filtered = eegtl.highpass_filter(s, cutoff_hz=4.0, order=4)
    assert abs(filtered.data.mean()) < 1.0


def test_train_and_checkpoint(tmp_path):
    config = {
        "seed": 7,
        "data": {"synth": {"n_subjects": 2, "n_trials": 16, "n_samples": 64, "sample_rate_hz": 64.0}},
        "plan": {"strategy": "standard", "epochs": 2, "batch_size": 8},
        "architecture": {"temporal_kernel_len": 16, "pool1": 2, "pool2": 4},
    }
    eegtl.run("train", config, out=tmp_path / "run")
    report = json.loads((tmp_path / "run" / "report.json").read_text())
    assert set(report["subjects"]) == {"1", "2"}
    ckpt = eegtl.load_checkpoint(tmp_path / "run" / "subject1" / "checkpoint")
    assert ckpt["n_classes"] == 4
    assert set(ckpt["blocks"].values()) == {"block1", "block2", "head"}
    assert all(isinstance(v, np.ndarray) for v in ckpt["params"].values())


def test_bad_config_raises(tmp_path):
    with pytest.raises(ValueError):
        eegtl.run("train", {"seed": 1, "nonsense": 2}, out=tmp_path / "x")
