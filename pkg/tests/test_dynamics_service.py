from __future__ import annotations

import pytest

from app.services.dynamics_service import (
    ChainState,
    Coloring,
    available_colors,
    glauber_step,
    greedy_coloring,
    is_proper,
    make_coloring,
    round_budget,
    run_glauber,
    run_set_dynamics,
    set_dynamics_round,
)
from app.services.graph_service import build_graph, degeneracy
from app.services.spectral_service import partition_from_levels, singleton_partition
from app.utils.constants import MODE_SWEEP
from app.utils.errors import ColoringError, ColoringLabError
from app.utils.seeding import UniformStream


def _greedy(graph, k: int) -> Coloring:
    order = list(reversed(degeneracy(graph).order))
    return greedy_coloring(graph, order, range(1, k + 1), k)


# ---------------------------------------------------------------------------
# Colourings
# ---------------------------------------------------------------------------


def test_make_coloring_checks_range() -> None:
    assert make_coloring([1, 2], 2).colors == (1, 2)
    with pytest.raises(ColoringError) as info:
        make_coloring([1, 3], 2)
    assert info.value.witness == 1


def test_is_proper(path3) -> None:
    assert is_proper(path3, Coloring((1, 2, 1), 3))
    assert not is_proper(path3, Coloring((1, 1, 2), 3))
    with pytest.raises(ColoringError):
        is_proper(path3, Coloring((1, 2), 3))


def test_available_colors(path3) -> None:
    coloring = Coloring((1, 2, 1), 3)
    assert available_colors(path3, coloring, 1) == (2, 3)
    assert available_colors(path3, coloring, 0) == (1, 3)


def test_greedy_coloring_exhausts_small_palette(triangle) -> None:
    with pytest.raises(ColoringError, match="exhausted"):
        greedy_coloring(triangle, [0, 1, 2], range(1, 3))
    assert is_proper(triangle, greedy_coloring(triangle, [0, 1, 2], range(1, 4)))


def test_greedy_in_reverse_peeling_order_uses_d_plus_one_colours(grid33) -> None:
    coloring = _greedy(grid33, 5)
    assert is_proper(grid33, coloring)
    assert max(coloring.colors) <= degeneracy(grid33).d + 1


# ---------------------------------------------------------------------------
# Glauber
# ---------------------------------------------------------------------------


def test_glauber_preserves_properness(grid33) -> None:
    state = ChainState(_greedy(grid33, 5), UniformStream(3))
    for _ in range(500):
        glauber_step(state, grid33)
        assert is_proper(grid33, state.coloring)
    assert state.steps == 500


def test_glauber_is_a_function_of_the_seed(grid33) -> None:
    start = _greedy(grid33, 6)
    first = run_glauber(ChainState(start, 42), grid33, 300).coloring
    second = run_glauber(ChainState(start, 42), grid33, 300).coloring
    assert first == second


def test_restriction_to_all_vertices_matches_unrestricted(grid33) -> None:
    start = _greedy(grid33, 6)
    free = ChainState(start, 9)
    restricted = ChainState(start, 9)
    everything = list(range(grid33.n))
    for _ in range(200):
        glauber_step(free, grid33)
        glauber_step(restricted, grid33, everything)
    assert free.colors == restricted.colors


def test_empty_restriction_raises(path3) -> None:
    state = ChainState(Coloring((1, 2, 1), 3), 0)
    with pytest.raises(ColoringLabError):
        glauber_step(state, path3, [])


def test_negative_steps_raise(path3) -> None:
    with pytest.raises(ColoringLabError):
        run_glauber(ChainState(Coloring((1, 2, 1), 3), 0), path3, -1)


def test_frozen_vertex_keeps_its_colour(triangle) -> None:
    start = Coloring((1, 2, 3), 3)
    state = run_glauber(ChainState(start, 1), triangle, 100)
    assert state.coloring == start


# ---------------------------------------------------------------------------
# Set dynamics
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    ("size", "delta", "expected"),
    [(10, 4, 14), (1, 2, 1), (0, 4, 1), (5, 1, 5)],
)
def test_round_budget(size, delta, expected) -> None:
    assert round_budget(size, delta) == expected


def test_round_only_touches_its_level(grid33) -> None:
    partition = partition_from_levels(grid33, [[0, 2, 4, 6, 8], [1, 3, 5, 7]], None)
    start = _greedy(grid33, 6)
    state = ChainState(start, 4)
    set_dynamics_round(state, grid33, partition, 1)
    for v in partition.levels[0]:
        assert state.colors[v] == start[v]
    assert state.steps == round_budget(4, grid33.max_degree)
    assert is_proper(grid33, state.coloring)


def test_sweep_recolours_each_vertex_once(grid33) -> None:
    partition = partition_from_levels(grid33, [[0, 2, 4, 6, 8], [1, 3, 5, 7]], None)
    state = ChainState(_greedy(grid33, 6), 4)
    set_dynamics_round(state, grid33, partition, 0, MODE_SWEEP)
    assert state.steps == 5


def test_sweep_needs_an_independent_level(path3) -> None:
    partition = partition_from_levels(path3, [[0, 1], [2]], None)
    state = ChainState(Coloring((1, 2, 1), 3), 0)
    with pytest.raises(ColoringLabError, match="independent"):
        set_dynamics_round(state, path3, partition, 0, MODE_SWEEP)


def test_unknown_mode_raises(path3) -> None:
    state = ChainState(Coloring((1, 2, 1), 3), 0)
    with pytest.raises(ColoringLabError, match="unknown round mode"):
        run_set_dynamics(state, path3, singleton_partition(path3), 3, mode="zigzag")


def test_run_set_dynamics_cycles_levels(path3) -> None:
    seen: list[tuple[int, int]] = []
    state = ChainState(Coloring((1, 2, 1), 3), 0)
    state, stats = run_set_dynamics(
        state,
        path3,
        singleton_partition(path3),
        6,
        observer=lambda i, j, _: seen.append((i, j)),
    )
    assert [s.level for s in stats] == [0, 1, 2, 0, 1, 2]
    assert seen == [(i, i % 3) for i in range(6)]
    assert all(s.updates == 1 for s in stats)
    assert state.steps == 6
    assert is_proper(path3, state.coloring)


def test_set_dynamics_on_empty_graph_runs_nothing() -> None:
    empty = build_graph(0, [])
    partition = partition_from_levels(empty, [], None)
    assert partition.m == 0
    state = ChainState(Coloring((), 3), 0)
    state, stats = run_set_dynamics(state, empty, partition, 5)
    assert stats == []
    assert state.steps == 0


def test_sweep_mode_mixes_sweeps_and_random_rounds(path3) -> None:
    partition = partition_from_levels(path3, [[0, 2], [1]], None)
    state = ChainState(Coloring((1, 2, 1), 4), 2)
    _, stats = run_set_dynamics(state, path3, partition, 2, MODE_SWEEP)
    assert [s.mode for s in stats] == [MODE_SWEEP, MODE_SWEEP]
    assert [s.updates for s in stats] == [2, 1]
