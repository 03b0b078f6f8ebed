import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hamport.models import controller_library, timoshenko_beam, vibrating_string

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FROZEN = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())


@pytest.fixture(scope="session")
def frozen():
    return FROZEN


@pytest.fixture(scope="session")
def string():
    return vibrating_string()


@pytest.fixture(scope="session")
def beam():
    return timoshenko_beam()


@pytest.fixture(scope="session", params=["linear_pd", "quartic_pd", "saturating_damper_pd"])
def library_controller(request):
    return controller_library(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
