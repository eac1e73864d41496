import numpy as np
import pytest
from hypothesis import settings

from fracnls.spectral import SpectralField, TorusGrid

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def grid1():
    return TorusGrid(1, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_field(grid, rng, scale=1.0):
    c = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return SpectralField(grid, scale * c * np.exp(-0.5 * grid.k_abs))
