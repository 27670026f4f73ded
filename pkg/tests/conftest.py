import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("riwalk", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("riwalk")


def z_score(est, se, target):
    return (est - target) / se


@pytest.fixture
def seed():
    return 20240611


@pytest.fixture
def rng_np():
    return np.random.default_rng(12345)
