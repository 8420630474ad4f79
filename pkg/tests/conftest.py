import numpy as np
import pytest
from hypothesis import settings

from anisoparab.profiles import GridFunction

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def bump(cx=0.5, cy=0.5, r=0.4, ax=1.0, ay=1.0):
    """Smooth compactly supported bump, elliptical when ax != ay."""

    def f(x, y):
        q = (((x - cx) / ax) ** 2 + ((y - cy) / ay) ** 2) / r**2
        out = np.zeros_like(q)
        inside = q < 1
        out[inside] = np.exp(1 - 1 / (1 - q[inside]))
        return out

    return f


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_field(rng, nx=8, ny=8, lo=-1.0, hi=1.0):
    return GridFunction(nx, ny, 1.0 / nx, 1.0 / ny, rng.uniform(lo, hi, (nx, ny)))
