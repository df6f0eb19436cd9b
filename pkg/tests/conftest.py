import numpy as np
import pytest

from spikenet.rng import make_stream


@pytest.fixture
def rng():
    return make_stream(12345)


def within(x, target, se, k=3.0):
    return abs(x - target) <= k * se
