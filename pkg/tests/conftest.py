import numpy as np
import pytest

from topotrack import GridTopology, ScalarTimeSeries


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def tiny_series():
    """3x3, one timestep, distinct values, two local minima (v0 and v5)."""
    vals = np.array(
        [
            [1.0, 4.0, 3.0],
            [6.0, 5.0, 2.0],
            [7.0, 9.0, 8.0],
        ]
    )
    topo = GridTopology(3, 3)
    return ScalarTimeSeries(topo, vals[None, :, :])


def random_series(rng, width, height, steps=1, wrap_x=False, ties=False):
    topo = GridTopology(width, height, wrap_x=wrap_x)
    vals = rng.standard_normal((steps, height, width))
    if ties:
        vals = np.round(vals * 4.0) / 4.0
    return ScalarTimeSeries(topo, vals)
