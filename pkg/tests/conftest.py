import numpy as np
import pytest

from alarmtaxis.grid import Field, GridSpec
from alarmtaxis.model import Params, StateTriple


@pytest.fixture
def unit_params():
    return Params.unit(xi=0.0)


@pytest.fixture
def grid16():
    return GridSpec(16, 16, 1.0, 1.0)


def smooth_state(grid, amp=(0.5, 0.3, 0.4), base=(1.0, 0.8, 0.5)):
    """Positive cosine-profile state with zero normal derivative."""
    x, y = grid.cell_centers()
    cx = np.cos(np.pi * x / grid.lx)
    cy = np.cos(np.pi * y / grid.ly) if grid.ny > 1 else 1.0
    u = Field(grid, base[0] + amp[0] * cx * cy)
    v = Field(grid, base[1] + amp[1] * cx)
    w = Field(grid, base[2] + amp[2] * (cy if grid.ny > 1 else cx))
    return StateTriple(u, v, w)


@pytest.fixture
def smooth_state16(grid16):
    return smooth_state(grid16)
