import numpy as np
import pytest

from yieldfill.data_io import load_fixture
from yieldfill.surface import YieldSurface


@pytest.fixture(scope="session")
def fixture_pair():
    return load_fixture()


@pytest.fixture
def ramp_surface():
    """values[i, j] = small base + i + j/2: strictly monotone both ways."""
    i = np.arange(13)[:, None]
    j = np.arange(15)[None, :]
    return YieldSurface(1.0 + i + 0.5 * j)
