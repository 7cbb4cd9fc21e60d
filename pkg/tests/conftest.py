import pytest
from hypothesis import HealthCheck, settings

from tapsplit.crypto import Rng, generate_keypair

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return Rng(1234)


@pytest.fixture
def keys(rng):
    return generate_keypair("alice", rng)
