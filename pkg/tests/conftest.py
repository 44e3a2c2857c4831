import numpy as np
import pytest

from multiplierlab.engine import EngineOptions


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def fast_opts():
    return EngineOptions(restarts=16, seed=11)


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
