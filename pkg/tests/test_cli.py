import hashlib
import json
import time

import numpy as np
import pytest

from insolemotion import training
from insolemotion.checkpoint import load_checkpoint
from insolemotion.cli import main, parse_style_spec, synth_sequences, UsageError
from insolemotion.data.types import Skeleton
from insolemotion.errors import NumericalError
from insolemotion.io import read_dataset, read_motion, write_motion

TINY = ["--W", "32", "--d", "16", "--ff-dim", "24", "--heads", "2", "--layers", "1", "--T", "5",
        "--batch-size", "16", "--stride", "8", "--overlap", "8", "--threads", "1"]


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "walk.jsonl"
    assert main(["synth", "--style", "walk+jog", "--duration", "40", "--segments", "2", "--seed", "3",
                 "--noise-level", "0.2", "--out", str(path)]) == 0
    return path


@pytest.fixture(scope="module")
def models(tmp_path_factory, data):
    d = tmp_path_factory.mktemp("models")
    pose, disp = d / "pose.ckpt", d / "disp.ckpt"
    assert main(["train-pose", "--data", str(data), "--out", str(pose), "--pose-epochs", "1"] + TINY) == 0
    assert main(["train-disp", "--data", str(data), "--out", str(disp), "--disp-epochs", "1"] + TINY) == 0
    return pose, disp


def test_style_spec_parsing():
    assert parse_style_spec("walk+jog") == ["walk", "jog"]
    with pytest.raises(UsageError):
        parse_style_spec("walk+fly")
    with pytest.raises(UsageError):
        parse_style_spec("+")


def test_synth_segments_split_frames():
    seqs = synth_sequences(["walk", "idle"], 10.0, 3, 0, 0.0)
    assert [len(s) for s in seqs] == [100, 100, 100]
    assert [s.meta["style"]["kind"] for s in seqs] == ["walk", "idle", "walk"]


def test_synth_ten_minutes_of_walking(tmp_path):
    path = tmp_path / "w.jsonl"
    assert main(["synth", "--style", "walk", "--duration", "600", "--seed", "7", "--out", str(path)]) == 0
    seqs, header = read_dataset(path)
    assert sum(len(s) for s in seqs) == 18000
    assert header["run_config"]["seed"] == 7


def test_synth_byte_identical(tmp_path):
    args = ["synth", "--style", "jog", "--duration", "5", "--seed", "2", "--noise-level", "0.5"]
    assert main(args + ["--out", str(tmp_path / "a.jsonl")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.jsonl")]) == 0
    assert sha(tmp_path / "a.jsonl") == sha(tmp_path / "b.jsonl")


def test_invalid_style_is_usage_error(tmp_path, capsys):
    assert main(["synth", "--style", "moonwalk", "--duration", "5", "--out", str(tmp_path / "x.jsonl")]) == 2
    assert "unknown style" in capsys.readouterr().err
    assert not (tmp_path / "x.jsonl").exists()


def test_bad_config_is_usage_error(tmp_path, data):
    assert main(["train-pose", "--data", str(data), "--out", str(tmp_path / "p"), "--d", "30"]) == 2
    assert main(["train-pose", "--data", str(data), "--out", str(tmp_path / "p"), "--threads", "0"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--style", "walk"])
    assert exc.value.code == 2


def test_missing_data_is_data_error(tmp_path):
    assert main(["train-pose", "--data", str(tmp_path / "none.jsonl"), "--out", str(tmp_path / "p")]) == 3


def test_tiny_training_run(tmp_path, data):
    ckpt, log = tmp_path / "p.ckpt", tmp_path / "p.csv"
    start = time.perf_counter()
    assert main(["train-pose", "--data", str(data), "--out", str(ckpt), "--log", str(log),
                 "--pose-epochs", "2"] + TINY) == 0
    assert time.perf_counter() - start < 60
    tensors, meta = load_checkpoint(ckpt)
    assert meta["status"] == "complete" and meta["epoch"] == 2
    assert meta["skeleton_hash"] == Skeleton.default().content_hash()
    assert meta["run_config"]["W"] == 32
    rows = log.read_text().splitlines()
    assert rows[0] == "step,loss"
    assert len(rows) - 1 == meta["step"] == len(tensors["train.losses"])
    assert any(k.startswith("stats.") for k in tensors)


@pytest.mark.parametrize("kind, epochs_flag", [("train-pose", "--pose-epochs"), ("train-disp", "--disp-epochs")])
def test_resume_matches_uninterrupted_run(tmp_path, data, kind, epochs_flag):
    full, half = tmp_path / "full.ckpt", tmp_path / "half.ckpt"
    base = [kind, "--data", str(data)] + TINY
    assert main(base + ["--out", str(full), "--log", str(tmp_path / "full.csv"), epochs_flag, "2"]) == 0
    assert main(base + ["--out", str(half), epochs_flag, "1"]) == 0
    assert main(base + ["--out", str(half), "--resume", str(half), "--log", str(tmp_path / "half.csv"),
                        epochs_flag, "2"]) == 0
    a, ma = load_checkpoint(full)
    b, mb = load_checkpoint(half)
    assert ma["step"] == mb["step"]
    for k in a:
        assert np.array_equal(a[k], b[k]), k
    assert (tmp_path / "full.csv").read_bytes() == (tmp_path / "half.csv").read_bytes()


def test_resume_rejects_other_kind(tmp_path, data, models):
    pose, _ = models
    assert main(["train-disp", "--data", str(data), "--out", str(tmp_path / "d"), "--resume", str(pose)]
                + TINY) == 3


def test_nan_loss_aborts_with_failed_checkpoint(tmp_path, data, monkeypatch):
    calls = {"n": 0}
    real = training.pose_training_step

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] > 3:
            raise NumericalError("non-finite pose loss at optimizer step 4")
        return real(*args, **kwargs)

    monkeypatch.setattr(training, "pose_training_step", flaky)
    ckpt, log = tmp_path / "p.ckpt", tmp_path / "p.csv"
    assert main(["train-pose", "--data", str(data), "--out", str(ckpt), "--log", str(log),
                 "--pose-epochs", "3"] + TINY) == 4
    _, meta = load_checkpoint(ckpt)
    assert meta["status"] == "failed"
    assert len(log.read_text().splitlines()) - 1 == 3


def test_reconstruct_and_eval(tmp_path, data, models):
    pose, disp = models
    out1, out2 = tmp_path / "m1.jsonl", tmp_path / "m2.jsonl"
    args = ["reconstruct", "--data", str(data), "--pose-ckpt", str(pose), "--disp-ckpt", str(disp), "--threads", "1"]
    assert main(args + ["--out", str(out1), "--csv", str(tmp_path / "m1.csv")]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    joints, disp_pred, header = read_motion(out1)
    seqs, _ = read_dataset(data)
    assert joints.shape == seqs[0].joints.shape and disp_pred.shape == (len(seqs[0]), 3)
    assert header["skeleton_hash"] == Skeleton.default().content_hash()
    report = tmp_path / "r.json"
    assert main(["eval", "--pred", str(out1), "--gt", str(data), "--out", str(report)]) == 0
    doc = json.loads(report.read_text())
    rec = doc["reports"]["reconstruction"]
    assert rec["mpjpe_cm"]["mean"] > 0 and rec["mrpe_m"]["mean"] > 0
    assert report.with_suffix(".txt").exists()


def test_reconstruct_rejects_swapped_checkpoints(tmp_path, data, models):
    pose, disp = models
    assert main(["reconstruct", "--data", str(data), "--pose-ckpt", str(disp), "--disp-ckpt", str(pose),
                 "--out", str(tmp_path / "m.jsonl")]) == 3


def test_eval_identical_gives_zeros(tmp_path):
    gt = tmp_path / "gt.jsonl"
    assert main(["synth", "--style", "walk", "--duration", "5", "--out", str(gt)]) == 0
    assert main(["eval", "--pred", str(gt), "--gt", str(gt), "--out", str(tmp_path / "r.json")]) == 0
    rec = json.loads((tmp_path / "r.json").read_text())["reports"]["reconstruction"]
    for key in ("mpjpe_cm", "mpjpe_legs_cm", "mpjve_legs_cm_s", "mrpe_m"):
        assert rec[key] == {"mean": 0.0, "std": 0.0}
    assert rec["drift_m"] == 0.0


def test_eval_rejects_mismatches(tmp_path):
    gt = tmp_path / "gt.jsonl"
    assert main(["synth", "--style", "walk", "--duration", "5", "--out", str(gt)]) == 0
    seqs, _ = read_dataset(gt)
    other = Skeleton.generic(22)
    write_motion(tmp_path / "skel.jsonl", seqs[0].joints, seqs[0].displacement, other)
    assert main(["eval", "--pred", str(tmp_path / "skel.jsonl"), "--gt", str(gt), "--out",
                 str(tmp_path / "r.json")]) == 3
    write_motion(tmp_path / "short.jsonl", seqs[0].joints[:100], seqs[0].displacement[:100], seqs[0].skeleton)
    assert main(["eval", "--pred", str(tmp_path / "short.jsonl"), "--gt", str(gt), "--out",
                 str(tmp_path / "r.json")]) == 3


def test_seed_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("S2M_SEED", "11")
    assert main(["synth", "--style", "walk", "--duration", "2", "--seed", "1", "--out", str(tmp_path / "a")]) == 0
    _, header = read_dataset(tmp_path / "a")
    assert header["run_config"]["seed"] == 11


def test_module_entry_point():
    import subprocess
    import sys
    out = subprocess.run([sys.executable, "-m", "insolemotion", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "reconstruct" in out.stdout
