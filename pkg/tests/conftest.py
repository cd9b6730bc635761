import numpy as np
import pytest
from hypothesis import strategies as hst

from tsdde.timescale import DenseInterval, IsolatedPoint, TimeScale


@hst.composite
def scales(draw, max_segments=6):
    """Random mixed scales: dense intervals and isolated points with positive gaps."""
    n = draw(hst.integers(1, max_segments))
    t = draw(hst.floats(-5, 5))
    segs = []
    for _ in range(n):
        if draw(hst.booleans()):
            length = draw(hst.floats(0.1, 3.0))
            segs.append(DenseInterval(t, t + length))
            t += length
        else:
            segs.append(IsolatedPoint(t))
        t += draw(hst.floats(0.05, 2.0))
    segs.append(IsolatedPoint(t))
    return TimeScale(segs)


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)
