import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

TESTS = Path(__file__).parent
FIXTURES = TESTS / "fixtures"
GOLDEN = TESTS / "golden"
sys.path.insert(0, str(TESTS))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def demo_model():
    from famass.fml import parse_file

    return parse_file(FIXTURES / "demo.fml")


@pytest.fixture(scope="session")
def demo(demo_model):
    from famass.deploy import deploy

    return deploy(demo_model)


@pytest.fixture(scope="session")
def network_model():
    from famass.fml import parse_file

    return parse_file(FIXTURES / "network.fml")


@pytest.fixture(scope="session")
def network(network_model):
    from famass.deploy import deploy

    return deploy(network_model)
