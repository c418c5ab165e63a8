import math

import pytest

from brushlets import Anisotropy, CoveringSpec

ANISO_BETA = 1.1


@pytest.fixture(scope="session")
def aniso_spec():
    return CoveringSpec(1 - 1 / ANISO_BETA, Anisotropy((math.sqrt(3), 1.5)))


@pytest.fixture(scope="session")
def grid_spec():
    """Integer knots and cutoffs, so every reflection lands on a 1/16 grid."""
    return CoveringSpec(0.0, Anisotropy((1, 1)))
