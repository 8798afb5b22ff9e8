import math

import numpy as np
import pytest

from chvi.potential import PotentialKind, PotentialSpec
from chvi.spectral import Grid, SpectralField


def mode_field(grid: Grid, amplitude: float, k: int = 1) -> SpectralField:
    """Field whose collocation profile is amplitude * sin(k pi x) (tensor in 2-D)."""
    coeffs = np.zeros(grid.shape)
    if grid.dim == 1:
        coeffs[k - 1] = amplitude / math.sqrt(2.0)
    else:
        coeffs[k - 1, k - 1] = amplitude / 2.0
    return SpectralField(grid, coeffs)


@pytest.fixture
def grid31():
    return Grid(1, 31)


@pytest.fixture
def log_pot():
    return PotentialSpec(PotentialKind.LOGARITHMIC)


@pytest.fixture
def obstacle_pot():
    return PotentialSpec(PotentialKind.OBSTACLE)


@pytest.fixture
def doublewell_pot():
    return PotentialSpec(PotentialKind.DOUBLE_WELL)
