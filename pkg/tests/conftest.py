import numpy as np
import pytest

from rflink.scenario import reference_scenario


@pytest.fixture(scope="session")
def ref_scenario():
    return reference_scenario()


@pytest.fixture()
def rng():
    return np.random.default_rng(0xC0FFEE)
