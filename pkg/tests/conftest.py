import json
from pathlib import Path

import pytest

from switchgan.cli import main as cli_main


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("data") / "faces"
    rc = cli_main(["synth-data", "--out", str(out), "--count", "48",
                   "--size", "32", "--seed", "3"])
    assert rc == 0
    return out


@pytest.fixture(scope="session")
def gated_run(tmp_path_factory, dataset_dir) -> Path:
    run = tmp_path_factory.mktemp("runs") / "gated"
    rc = cli_main(["train", "--data", str(dataset_dir), "--out", str(run),
                   "--steps", "2", "--gate", "--cfm", "--batch", "4",
                   "--base-channels", "8", "--checkpoint-every", "2",
                   "--log-every", "1", "--seed", "1"])
    assert rc == 0
    return run


@pytest.fixture(scope="session")
def gated_ckpt(gated_run) -> Path:
    return gated_run / "checkpoints" / "step_2.ckpt"


@pytest.fixture(scope="session")
def ungated_ckpt(tmp_path_factory, dataset_dir) -> Path:
    run = tmp_path_factory.mktemp("runs") / "ungated"
    rc = cli_main(["train", "--data", str(dataset_dir), "--out", str(run),
                   "--steps", "1", "--batch", "4", "--base-channels", "8",
                   "--checkpoint-every", "1", "--seed", "2"])
    assert rc == 0
    return run / "checkpoints" / "step_1.ckpt"


@pytest.fixture(scope="session")
def sample_image(dataset_dir) -> Path:
    manifest = json.loads((dataset_dir / "manifest.json").read_text())
    return dataset_dir / manifest["records"][0]["file"]
