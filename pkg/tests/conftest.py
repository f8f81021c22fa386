import warnings

import numpy as np
import pytest

warnings.filterwarnings("ignore", message=".*TBB.*")

from transmonsim import presets
from transmonsim.device import device_basis


@pytest.fixture(scope="session")
def kit_device():
    return presets.single_transmon_resonator()


@pytest.fixture(scope="session")
def two_transmon_device():
    return presets.two_transmon()


@pytest.fixture(scope="session")
def two_transmon_library():
    return presets.two_transmon_pulse_library()


@pytest.fixture(scope="session")
def fitted_freqs():
    return presets.TWO_TRANSMON_FITTED_FREQS


@pytest.fixture(scope="session")
def kit_basis(kit_device):
    return device_basis(kit_device)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
