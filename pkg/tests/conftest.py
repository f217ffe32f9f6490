import numpy as np
import pytest

from spftrack import simulate
from spftrack.volume import Volume4D


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_volume(rng):
    voxels = rng.integers(0, 200, size=(3, 6, 16, 20)).astype(np.uint8)
    return Volume4D(voxels=voxels, z_scale=3.0)


@pytest.fixture
def tiny_dataset():
    """Small rendered dataset with ground truth, shared across tests."""
    cfg = simulate.SimConfig(dims=(80, 50, 8), frames=10, seed=31)
    vol, truth = simulate.generate_dataset(cfg, k_count=6)
    return vol, truth
