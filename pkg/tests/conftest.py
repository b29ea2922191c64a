import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pwhyp import scales, systems

# Slowdown runs use their own constants: the derivative is only
# Hoelder-(slow_exponent) regular at the excluded point, which forces a
# smaller regularity slack, and the boundary-growth fit wants the r0-annulus
# inside the region where whole unit-time trajectories stay slowed.
SLOW_RADIUS = 0.16
SLOW_EXPONENT = 0.5


@pytest.fixture(scope="session")
def cat():
    return systems.build_cat_map()


@pytest.fixture(scope="session")
def cat_scales():
    return scales.ScaleParams()


@pytest.fixture(scope="session")
def slow():
    return systems.build_slowdown_map(SLOW_RADIUS, SLOW_EXPONENT)


@pytest.fixture(scope="session")
def slow_scales():
    return scales.ScaleParams(
        alpha=0.5, beta=0.5, gamma=1.2, delta=0.08, eps=0.3, r0=0.055, c_f=3.5
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
