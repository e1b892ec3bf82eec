import numpy as np
import pytest

from eldersim.floor_plan import bundled_layout_path, load_plan
from eldersim.scheduler import default_catalog
from eldersim.trajectory import AgentModel


@pytest.fixture(scope="session")
def studio():
    """(plan, zone_map, sensors) of the bundled layout."""
    return load_plan(bundled_layout_path())


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture(scope="session")
def agent():
    return AgentModel()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
