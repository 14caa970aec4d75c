import numpy as np
import pytest

from sonosynth import cli


@pytest.fixture(scope="session")
def sim_dataset(tmp_path_factory):
    """A 20-image dataset built once through the CLI (seed 7)."""
    root = tmp_path_factory.mktemp("dataset") / "sim"
    rc = cli.main(
        ["simulate", "--n", "20", "--seed", "7", "--out", str(root), "--quiet"]
    )
    assert rc == 0
    return root


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
