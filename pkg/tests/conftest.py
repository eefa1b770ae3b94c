import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_signs(rng, n):
    return rng.choice(np.array([-1, 1], dtype=np.int8), size=n)
