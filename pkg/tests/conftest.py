import numpy as np
import pytest

from bsdegame import build


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def lat1():
    return build(1.0, 8, 1)


@pytest.fixture
def lat2():
    return build(0.5, 4, 2)
