import numpy as np
import pytest

from landmark_anon.gan import GanConfig, GanCheckpoint, build_models
from landmark_anon.synthetic import write_fixture_dataset


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    return write_fixture_dataset(tmp_path_factory.mktemp("fixtures"))


@pytest.fixture(scope="session")
def small_checkpoint():
    """An untrained 32px generator; enough for shape and determinism checks."""
    cfg = GanConfig(image_size=32, base_channels=8, seed=5)
    gen, disc = build_models(cfg)
    return GanCheckpoint.from_models(gen, disc, cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
