from __future__ import annotations

import itertools

import pytest

from app.services.dynamics_service import Coloring, greedy_coloring, is_proper
from app.services.graph_service import (
    build_graph,
    degeneracy,
    gen_complete,
    gen_complete_tree,
    gen_path,
)
from app.services.oracle_service import enumerate_colorings
from app.services.path_service import (
    Move,
    apply_moves,
    canonical_path,
    compose_paths,
    composed_walk_bound,
    hub_coloring,
    layered_path,
    layered_schedule,
    pinned_hub,
    reverse_moves,
    simplify_moves,
)
from app.utils.errors import PathConstructionError


# ---------------------------------------------------------------------------
# Replay and simplification
# ---------------------------------------------------------------------------


def test_apply_moves_rejects_monochromatic_edge(path3) -> None:
    start = Coloring((1, 2, 1), 4)
    with pytest.raises(PathConstructionError) as info:
        apply_moves(path3, start, [Move(0, 1, 3), Move(1, 2, 3)])
    assert info.value.witness == 1


def test_apply_moves_rejects_stale_colour(path3) -> None:
    with pytest.raises(PathConstructionError, match="expects vertex 0"):
        apply_moves(path3, Coloring((1, 2, 1), 4), [Move(0, 3, 4)])


def test_reverse_moves_undoes_a_walk(path3) -> None:
    start = Coloring((1, 2, 1), 4)
    moves = [Move(0, 1, 3), Move(2, 1, 4)]
    end = apply_moves(path3, start, moves)
    assert apply_moves(path3, end, reverse_moves(moves)) == start


def test_simplify_merges_consecutive_moves(path3) -> None:
    start = Coloring((1, 2, 1), 4)
    assert simplify_moves(path3, start, [Move(0, 1, 3), Move(0, 3, 4)]) == [Move(0, 1, 4)]
    assert simplify_moves(path3, start, [Move(0, 1, 3), Move(0, 3, 1)]) == []


# ---------------------------------------------------------------------------
# Canonical and composed walks
# ---------------------------------------------------------------------------


def test_hub_uses_d_plus_one_colours(grid33) -> None:
    hub = hub_coloring(grid33, 6)
    assert is_proper(grid33, hub)
    assert set(hub.colors) <= {1, 2, 3}


def test_canonical_walk_from_every_state(path3) -> None:
    k, n = 4, path3.n
    degen = degeneracy(path3)
    hub = hub_coloring(path3, k, degen)
    model = enumerate_colorings(path3, k)
    assert model.size == 36
    for i in range(model.size):
        start = model.coloring(i)
        moves = canonical_path(path3, start, hub, degen)
        assert apply_moves(path3, start, moves) == hub
        assert len(moves) <= n * (n + 1) // 2


COMPOSED_CASES = [
    (gen_path(3), 4),
    (gen_path(3), 6),
    (gen_path(4), 4),
    (gen_complete(3), 6),
]


@pytest.mark.parametrize(("graph", "k"), COMPOSED_CASES)
def test_composed_walk_between_every_pair_within_n2_minus_n(graph, k) -> None:
    n = graph.n
    model = enumerate_colorings(graph, k)
    states = [model.coloring(i) for i in range(model.size)]
    longest = 0
    for a, b in itertools.permutations(states, 2):
        moves = compose_paths(graph, a, b)
        assert apply_moves(graph, a, moves) == b
        longest = max(longest, len(moves))
    assert longest <= n * n - n


def test_composed_walk_on_two_vertices_keeps_n_n_plus_1() -> None:
    edge = gen_path(2)
    a, b = Coloring((1, 2), 4), Coloring((2, 1), 4)
    moves = compose_paths(edge, a, b)
    assert apply_moves(edge, a, moves) == b
    assert 3 <= len(moves) <= 6


def test_pinned_hub_keeps_last_vertex_neighbours_off_both_colours(triangle) -> None:
    degen = degeneracy(triangle)
    last = degen.order[-1]
    hub, bank = pinned_hub(triangle, 6, degen, (1, 2))
    assert hub[last] == 1
    assert bank == (4, 5, 6)
    assert is_proper(triangle, hub)
    assert all(hub[u] not in (1, 2) for u in triangle.adjacency[last])


def test_composed_walk_bound_switches_at_three_vertices() -> None:
    assert composed_walk_bound(2) == 6
    assert composed_walk_bound(3) == 6
    assert composed_walk_bound(5) == 20


def test_canonical_walk_needs_enough_colours(path3) -> None:
    start = Coloring((1, 2, 1), 3)
    with pytest.raises(PathConstructionError, match="k >= 2"):
        canonical_path(path3, start, start)


def test_canonical_walk_target_must_be_low(path3) -> None:
    with pytest.raises(PathConstructionError, match="only colours 1..2"):
        canonical_path(path3, Coloring((1, 2, 1), 4), Coloring((3, 2, 1), 4))


def test_identical_endpoints_give_empty_walk(grid33) -> None:
    hub = hub_coloring(grid33, 6)
    assert canonical_path(grid33, hub, hub) == []
    assert compose_paths(grid33, hub, hub) == []
    assert layered_path(grid33, hub, hub) == []


# ---------------------------------------------------------------------------
# Layered walks
# ---------------------------------------------------------------------------


def test_layered_schedule_on_grid(grid33) -> None:
    schedule = layered_schedule(grid33, 6)
    assert schedule.sets == ((0, 2, 6, 8), (1, 3, 5, 7), (4,))
    assert schedule.walk_bound == 4 + 8 + 9 + 9


def test_layered_schedule_needs_enough_colours(grid33) -> None:
    with pytest.raises(PathConstructionError, match="2d\\+2"):
        layered_schedule(grid33, 5)


def test_layered_walk_reaches_any_target(grid33) -> None:
    k = 6
    start = greedy_coloring(grid33, list(range(grid33.n)), range(4, 7), k)
    target = greedy_coloring(grid33, list(reversed(range(grid33.n))), [2, 5, 6], k)
    moves = layered_path(grid33, start, target)
    assert apply_moves(grid33, start, moves) == target
    assert len(moves) <= 2 * layered_schedule(grid33, k).walk_bound


def test_layered_walk_on_a_tree() -> None:
    tree = gen_complete_tree(2, 3)
    k = 4
    start = greedy_coloring(tree, list(range(tree.n)), [3, 4], k)
    target = greedy_coloring(tree, list(range(tree.n)), [1, 2], k)
    moves = layered_path(tree, start, target)
    assert apply_moves(tree, start, moves) == target
    assert len(moves) <= layered_schedule(tree, k).walk_bound


def test_diameter_bound(path3) -> None:
    schedule = layered_schedule(path3, 4)
    assert schedule.d == 1
    # 3 · ⌈log_{3/2} 3⌉
    assert schedule.diameter_bound(3) == 9
    assert layered_schedule(build_graph(3, []), 2).diameter_bound(3) is None
