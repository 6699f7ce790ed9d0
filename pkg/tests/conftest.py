import numpy as np
import pytest

from fdrelay.channel import config_from_snr_inr, crandn, draw_slot_channels, slot_rng


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_cfg():
    """Toy dimensions used by the oracle-backed tests."""
    return config_from_snr_inr(5.0, 0.0, n_s=1, n_r=2)


@pytest.fixture
def paper_cfg():
    return config_from_snr_inr(5.0, 0.0, n_s=2, n_r=5)


def random_channels(cfg, seed, realization=0, slot=0):
    return draw_slot_channels(cfg, slot_rng(seed, realization, slot), slot)


def random_complex(rng, *shape):
    return crandn(rng, *shape)
