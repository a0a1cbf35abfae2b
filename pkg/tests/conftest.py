import numpy as np
import pytest

from stereoseld.model import ModelConfig, init_random_weights
from stereoseld.rng import SplitMix64


@pytest.fixture
def rng():
    return np.random.default_rng(20250809)


# Small-width model for algebraic tests; same depth and wiring as the real one.
TINY_CFG = ModelConfig(
    n_classes=5,
    cnn_channels=(8, 8, 16, 32),
    d_model=32,
    n_heads=4,
    ffn_mult=2,
    conv_kernel=5,
    clap_dim=32,
    visual_dim=24,
    visual_tokens=9,
)


@pytest.fixture(scope="session")
def tiny_cfg():
    return TINY_CFG


@pytest.fixture(scope="session")
def tiny_weights():
    return init_random_weights(TINY_CFG, seed=11)


@pytest.fixture(scope="session")
def full_cfg():
    return ModelConfig()


@pytest.fixture(scope="session")
def full_weights(full_cfg):
    return init_random_weights(full_cfg, seed=7)


@pytest.fixture(scope="session")
def fixture_waveform():
    """Deterministic broadband 5 s stereo signal (splitmix-driven, platform-stable)."""
    gen = SplitMix64(20250401)
    left = gen.uniform(-0.4, 0.4, 120000)
    right = 0.6 * left + gen.uniform(-0.2, 0.2, 120000)
    return left, right
