import json
import os
import subprocess

import pytest

CLI = os.environ.get("HIRET_CLI")

pytestmark = pytest.mark.skipif(not CLI, reason="HIRET_CLI not set")

TINY = """
[data]
samples = 60
[model]
d = 8
patch_hidden = 8
text_hidden = 8
attn = 8
hidden = 8
ffn = 8
max_sentences = 4
max_words = 12
[vlr]
epochs = 1
[llr]
epochs = 1
pairs_per_epoch = 64
[decoder]
epochs = 1
"""


def run(tmp_path, *args):
    cmd = [CLI, "--config", str(tmp_path / "tiny.ini"), "--data", str(tmp_path / "data"),
           "--out", str(tmp_path / "out"), "--checkpoint", str(tmp_path / "ckpt"),
           "--log-level", "warn", *args]
    return subprocess.run(cmd, capture_output=True, text=True)


def test_stages_and_exit_codes(tmp_path):
    (tmp_path / "tiny.ini").write_text(TINY)

    missing = run(tmp_path, "pretrain-vlr")
    assert missing.returncode == 3
    assert "synth-data" in missing.stderr

    assert run(tmp_path, "synth-data").returncode == 0
    missing = run(tmp_path, "train")
    assert missing.returncode == 3
    assert "pretrain-vlr" in missing.stderr

    assert run(tmp_path, "--variant", "nope", "train").returncode == 2
    for stage in ("pretrain-vlr", "pretrain-llr", "train", "generate", "evaluate"):
        done = run(tmp_path, stage)
        assert done.returncode == 0, done.stderr
    rows = json.loads((tmp_path / "out" / "metrics-full.json").read_text())
    assert [r["model"] for r in rows] == ["V-L Retrieval", "full"]
    assert "CIDEr" in (tmp_path / "out" / "metrics-full.txt").read_text()


def test_bad_config_key(tmp_path):
    (tmp_path / "tiny.ini").write_text("[model]\nhidden_units = 4\n")
    result = run(tmp_path, "config")
    assert result.returncode == 2
    assert "hidden_units" in result.stderr


def test_config_prints_every_key(tmp_path):
    (tmp_path / "tiny.ini").write_text(TINY)
    result = run(tmp_path, "--seed", "9", "config")
    assert result.returncode == 0
    assert "seed = 9" in result.stdout
    assert "samples = 60" in result.stdout
