from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from walksieve.blocks import build_generator_system
from walksieve.instances import make_coloring_instance

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def coloring3():
    """Three triples, c = 3: blocks of 3 edges, quotients of order 27."""
    return make_coloring_instance(3, 3)


@pytest.fixture(scope="session")
def gens3(coloring3):
    return build_generator_system(coloring3, 0.5, seed=1)


@pytest.fixture(scope="session")
def two_block():
    """The two-block coloring instance (c = 3, i = 3), built permissively."""
    return make_coloring_instance(2, 3, strict=False, t=7)


@pytest.fixture(scope="session")
def two_block_gens(two_block):
    return build_generator_system(two_block, 0.5, seed=1)
