"""Fixtures: corpora come from the primary toolkit's CLI (the external
interface); everything model-sized is seeded and small."""

import subprocess
import sys

import pytest
import torch


@pytest.fixture(autouse=True, scope="session")
def _torch_threads():
    torch.set_num_threads(2)


def synth_builtin(name: str, out_dir) -> None:
    proc = subprocess.run(
        [sys.executable, "-m", "bcgkit.cli", "synth", "--builtin", name,
         "--out", str(out_dir)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


@pytest.fixture(scope="session")
def train_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus") / "dl-train"
    synth_builtin("dl-train", out)
    return out


@pytest.fixture(scope="session")
def holdout_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus") / "dl-holdout"
    synth_builtin("dl-holdout", out)
    return out


@pytest.fixture(scope="session")
def demo_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus") / "demo"
    synth_builtin("demo", out)
    return out
