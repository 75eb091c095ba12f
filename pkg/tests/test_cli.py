import filecmp
import json
import os
import subprocess
import sys

import pytest

from explainrul import cli, pipeline

TINY = """
[pipeline]
seed = 3

[synth]
n_train = 2
n_test = 1
duration = 30
duration_jitter = 0.1
onset_amplitude_g = 0.1
record_len = 1024

[autoencoder]
encoder_hidden = 16, 8
decoder_hidden = 16
beta = 0
epochs = 40
learning_rate = 3e-3

[ffnn]
epochs = 40

[changepoint]
penalty_factor = 10

[explain]
n_balls = 9
ball_diameter = 7.94
pitch_diameter = 39.04
shaft_hz = 30
"""


@pytest.fixture
def tiny_cfg(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(TINY)
    return path


def run(*args):
    return cli.main([str(a) for a in args])


def tree(root):
    return sorted(os.path.relpath(os.path.join(d, f), root) for d, _, fs in os.walk(root) for f in fs)


def test_full_chain(tiny_cfg, tmp_path):
    out = tmp_path / "out"
    assert run("--config", tiny_cfg, "--out", out) == 0
    files = tree(out)
    for name in ("metrics.csv", "baseline_metrics.csv", "changepoints.csv", "labels.csv", "bands.csv",
                 "explain/importance.csv", "explain/annotations.csv", "explain/injection_1.csv",
                 "explain/spectrogram_test_00.pgm", "models/ae.model", "models/ffnn.model",
                 "trajectories/trajectory_test_00.csv", "estimates/rul_test_00.csv"):
        assert name in files
    assert ".lock" not in files
    lines = (out / "metrics.csv").read_text().splitlines()
    assert lines[0] == "run_id,rmse_s,re" and lines[1].startswith("test_00,")
    cfg = pipeline.PipelineConfig.load(tiny_cfg, out=out)
    for stage in pipeline.STAGES:
        man = json.loads((out / "manifests" / f"{stage}.json").read_text())
        assert man["config_hash"] == cfg.config_hash()
        assert man["seed"] == cfg.stage_seed(stage)
    assert "BPFO" in (out / "explain" / "annotations.csv").read_text()


def test_rerun_is_byte_identical(tiny_cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("--config", tiny_cfg, "--out", a) == 0
    assert run("--config", tiny_cfg, "--out", b) == 0
    assert tree(a) == tree(b)
    _, mismatch, errors = filecmp.cmpfiles(a, b, tree(a), shallow=False)
    assert mismatch == [] and errors == []
    # a single stage re-run rewrites the same bytes
    before = (a / "changepoints.csv").read_bytes()
    assert run("--config", tiny_cfg, "--out", a, "--stage", "changepoint") == 0
    assert (a / "changepoints.csv").read_bytes() == before


def test_missing_upstream(tiny_cfg, tmp_path, capsys):
    assert run("--config", tiny_cfg, "--out", tmp_path / "o", "--stage", "train-ffnn") == 3
    assert "'label'" in capsys.readouterr().err


def test_stale_upstream_config(tiny_cfg, tmp_path):
    out = tmp_path / "o"
    assert run("--config", tiny_cfg, "--out", out, "--stage", "synth") == 0
    assert run("--config", tiny_cfg, "--out", out, "--stage", "preprocess", "--seed", "4") == 3


@pytest.mark.parametrize("text", ["[nonsense]\na = 1\n", "[dsp]\nm = -2\n", "[pipeline]\nseed = x\n",
                                  "[synth]\nfault_freqs_hz = 20000\n", "[dsp]\nbogus = 1\n"])
def test_config_errors(tmp_path, text):
    path = tmp_path / "bad.ini"
    path.write_text(text)
    assert run("--config", path, "--out", tmp_path / "o") == 2


def test_missing_config_file(tmp_path):
    assert run("--config", tmp_path / "nope.ini") == 2


def test_divergence_exit_code(tiny_cfg, tmp_path):
    path = tmp_path / "div.ini"
    path.write_text(TINY.replace("learning_rate = 3e-3", "learning_rate = 1e300"))
    assert run("--config", path, "--out", tmp_path / "o") == 4


def test_lock_blocks_second_writer(tiny_cfg, tmp_path):
    out = tmp_path / "o"
    out.mkdir()
    (out / ".lock").write_text("123")
    assert run("--config", tiny_cfg, "--out", out, "--stage", "synth") == 1


def test_ae_pool_changes_hash(tiny_cfg):
    a = pipeline.PipelineConfig.load(tiny_cfg)
    b = pipeline.PipelineConfig.load(tiny_cfg, ae_pool="train+test")
    assert a.config_hash() != b.config_hash()
    assert a.stage_seed("synth") != a.stage_seed("train-ae")


def test_files_source(tiny_cfg, tmp_path):
    # runs written by one workspace feed a second one as external data
    src = tmp_path / "src"
    assert run("--config", tiny_cfg, "--out", src, "--stage", "synth") == 0
    cfg = tmp_path / "files.ini"
    cfg.write_text(TINY.split("[synth]")[0] + "[data]\nsource = files\n"
                   f"train_runs = {src / 'runs/train_00'}, {src / 'runs/train_01'}\n"
                   f"test_runs = {src / 'runs/test_00'}\n" + "[autoencoder]" + TINY.split("[autoencoder]")[1])
    assert run("--config", cfg, "--out", tmp_path / "o") == 0
    assert (tmp_path / "o" / "metrics.csv").exists()


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "explainrul.cli", "--print-config"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "[changepoint]" in res.stdout
