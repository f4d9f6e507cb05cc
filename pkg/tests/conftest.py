from __future__ import annotations

import pytest

from app.services.graph_service import (
    Graph,
    build_graph,
    gen_complete,
    gen_cycle,
    gen_grid,
    gen_path,
    gen_star,
)
from app.services.spectral_service import LevelPartition, build_levels, choose_epsilon, power_iterate


@pytest.fixture
def path3() -> Graph:
    return gen_path(3)


@pytest.fixture
def path4() -> Graph:
    return gen_path(4)


@pytest.fixture
def cycle4() -> Graph:
    return gen_cycle(4)


@pytest.fixture
def triangle() -> Graph:
    return gen_complete(3)


@pytest.fixture
def grid33() -> Graph:
    return gen_grid(3, 3)


@pytest.fixture
def edge() -> Graph:
    return build_graph(2, [(0, 1)])


@pytest.fixture
def star4() -> Graph:
    return gen_star(4)


@pytest.fixture
def star4_levels(star4: Graph) -> LevelPartition:
    """L_0 = the four leaves, L_1 = the centre."""
    eigen = power_iterate(star4)
    return build_levels(star4, eigen, choose_epsilon(star4, eigen))
