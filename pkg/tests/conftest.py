import numpy as np
import pytest

from beamkws.geometry import default_array


@pytest.fixture
def geom():
    return default_array()


@pytest.fixture
def rng():
    return np.random.default_rng(42)
