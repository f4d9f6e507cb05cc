"""
Constructive walks on the space of proper colourings.

Every walk is a list of single-site ``Move``s whose intermediate colourings
are all proper, so each walk is a path in the Glauber move graph.

canonical_path   from → target in d+1 colours, rounds over the peeling order
compose_paths    from → X → to through the greedy (d+1)-colouring X
layered_path     rounds over the sets S_1..S_ℓ with alternating half palettes
simplify_moves   local shortening of any valid walk
apply_moves      replay with a properness check at every move

Design notes
------------
- Peeling order ``v_1..v_n`` (first peeled first): ``v_j`` has at most d
  neighbours among ``v_{j+1}..v_n``.  Round i recolours ``v_i, ..., v_1``;
  rounds with the parity of n use bank ``{1..d+1}`` and the others
  ``{d+2..2d+2}``.  A vertex keeps its colour when that colour is already
  in the round's bank and legal, otherwise it takes the smallest legal bank
  colour.  The last round writes the target colours.
- Layered walks use one extra round: S_ℓ is first recoloured in round ℓ,
  when its unrecoloured neighbours inside S_ℓ still carry starting colours,
  so the target colours are written in round ℓ+1 once every vertex sits in
  the opposite half palette.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import NamedTuple

from app.services.dynamics_service import (
    Coloring,
    greedy_coloring,
    require_proper,
)
from app.services.graph_service import DegeneracyData, Graph, degeneracy
from app.utils.errors import InvariantViolation, PathConstructionError

logger = logging.getLogger(__name__)


class Move(NamedTuple):
    vertex: int
    old_color: int
    new_color: int


@dataclass(frozen=True)
class LayeredSchedule:
    """The sets S_1..S_ℓ of a layered walk and its move bounds."""

    sets: tuple[tuple[int, ...], ...]
    k: int
    d: int

    @property
    def ell(self) -> int:
        return len(self.sets)

    @property
    def walk_bound(self) -> int:
        """Moves of one single-target walk: Σ_i |S_1 ∪ … ∪ S_i| + n."""
        total, prefix = 0, 0
        for s in self.sets:
            prefix += len(s)
            total += prefix
        return total + prefix

    def diameter_bound(self, n: int) -> int | None:
        """n·⌈log_{(k−1)/(2d)} n⌉, or ``None`` when d = 0."""
        if self.d == 0 or n <= 1:
            return None
        return n * math.ceil(math.log(n) / math.log((self.k - 1) / (2 * self.d)))


# ---------------------------------------------------------------------------
# Replay and simplification
# ---------------------------------------------------------------------------


def apply_moves(graph: Graph, start: Coloring, moves: Sequence[Move]) -> Coloring:
    """Replay ``moves`` from ``start``, checking properness at every move.

    Raises:
        PathConstructionError: A move disagrees with the current colour,
            leaves the palette, or creates a monochromatic edge (witness is
            the move index).
    """
    colors = list(start.colors)
    for t, (v, old, new) in enumerate(moves):
        if colors[v] != old:
            raise PathConstructionError(
                f"move {t} expects vertex {v} coloured {old}, found {colors[v]}", witness=t
            )
        if not 1 <= new <= start.k:
            raise PathConstructionError(f"move {t} uses colour {new} outside 1..{start.k}", witness=t)
        if any(colors[u] == new for u in graph.adjacency[v]):
            raise PathConstructionError(
                f"move {t} gives vertex {v} colour {new} already on a neighbour", witness=t
            )
        colors[v] = new
    return Coloring(tuple(colors), start.k)


def reverse_moves(moves: Sequence[Move]) -> list[Move]:
    return [Move(v, new, old) for v, old, new in reversed(moves)]


def simplify_moves(graph: Graph, start: Coloring, moves: Sequence[Move]) -> list[Move]:
    """Merge successive moves of the same vertex while the walk stays proper.

    Move ``(v, a→b)`` at time i and the next move ``(v, b→c)`` at time l
    merge into ``(v, a→c)`` when no neighbour of v holds c at time i and no
    neighbour move inside ``(i, l)`` takes c.  Merged no-ops are dropped.
    Repeats until a pass changes nothing.
    """
    current = list(moves)
    changed = True
    while changed:
        changed = False
        alive = [True] * len(current)
        by_vertex: dict[int, list[int]] = {}
        for t, mv in enumerate(current):
            by_vertex.setdefault(mv.vertex, []).append(t)
        cursor = {v: 0 for v in by_vertex}
        colors = list(start.colors)
        out: list[Move] = []
        for i, (v, a, b) in enumerate(current):
            if not alive[i]:
                continue
            cursor[v] += 1
            neigh = set(graph.adjacency[v])
            while cursor[v] < len(by_vertex[v]):
                l = by_vertex[v][cursor[v]]
                c = current[l].new_color
                if any(colors[u] == c for u in neigh):
                    break
                if any(
                    alive[t] and current[t].vertex in neigh and current[t].new_color == c
                    for t in range(i + 1, l)
                ):
                    break
                alive[l] = False
                cursor[v] += 1
                b = c
                changed = True
            if b == a:
                changed = True
                continue
            out.append(Move(v, a, b))
            colors[v] = b
        current = out
    return current


# ---------------------------------------------------------------------------
# Canonical walk
# ---------------------------------------------------------------------------


def canonical_path(
    graph: Graph,
    start: Coloring,
    target: Coloring,
    degen: DegeneracyData | None = None,
) -> list[Move]:
    """Walk from ``start`` to a target coloured with ``{1..d+1}``.

    Raises:
        PathConstructionError: k < 2(d+1), palettes differ, improper input,
            or the target uses a colour above d+1.
        InvariantViolation: A bank ran out of legal colours.
    """
    degen = degeneracy(graph) if degen is None else degen
    d, k, n = degen.d, start.k, graph.n
    if target.k != k:
        raise PathConstructionError(f"palette mismatch: {k} vs {target.k}")
    if k < 2 * (d + 1):
        raise PathConstructionError(f"canonical walk needs k >= 2(d+1) = {2 * (d + 1)}, got k={k}")
    require_proper(graph, start, "start")
    require_proper(graph, target, "target")
    if any(c > d + 1 for c in target.colors):
        raise PathConstructionError(f"target must use only colours 1..{d + 1}")
    if start.colors == target.colors:
        return []

    low = tuple(range(1, d + 2))
    high = tuple(range(d + 2, 2 * d + 3))
    order = degen.order
    colors = list(start.colors)
    moves: list[Move] = []
    for i in range(1, n + 1):
        bank = low if (i - n) % 2 == 0 else high
        for j in range(i - 1, -1, -1):
            v = order[j]
            used = {colors[u] for u in graph.adjacency[v]}
            if i == n:
                new = target[v]
                if new in used:
                    raise InvariantViolation(
                        f"final round blocked at vertex {v} (colour {new})", witness=v
                    )
            elif colors[v] in bank and colors[v] not in used:
                new = colors[v]
            else:
                new = next((c for c in bank if c not in used), None)
                if new is None:
                    raise InvariantViolation(f"bank exhausted at vertex {v} in round {i}", witness=v)
            if new != colors[v]:
                moves.append(Move(v, colors[v], new))
                colors[v] = new
    return moves


def hub_coloring(graph: Graph, k: int, degen: DegeneracyData | None = None) -> Coloring:
    """Greedy (d+1)-colouring in reverse peeling order."""
    degen = degeneracy(graph) if degen is None else degen
    return greedy_coloring(graph, list(reversed(degen.order)), range(1, degen.d + 2), k)


def pinned_hub(
    graph: Graph,
    k: int,
    degen: DegeneracyData,
    pinned: tuple[int, int],
) -> tuple[Coloring, tuple[int, ...]]:
    """Hub for a pair whose last peeled vertex moves from colour a to colour b.

    ``v_1..v_{n-1}`` are coloured greedily in reverse peeling order from the
    bank holding at most one of a, b; neighbours of ``v_n`` avoid both.
    Returns the hub (with ``v_n`` coloured a) and the bank used.
    """
    d, order = degen.d, degen.order
    low = tuple(range(1, d + 2))
    high = tuple(range(d + 2, 2 * d + 3))
    a, b = pinned
    bank = high if a in low and b in low else low
    last = order[-1]
    colors = [0] * graph.n
    colors[last] = a
    for v in reversed(order[:-1]):
        used = {colors[u] for u in graph.adjacency[v] if u != last}
        if last in graph.adjacency[v]:
            used |= {a, b}
        new = next((c for c in bank if c not in used), None)
        if new is None:
            raise InvariantViolation(f"hub bank exhausted at vertex {v}", witness=v)
        colors[v] = new
    return Coloring(tuple(colors), k), bank


def _pinned_walk(
    graph: Graph,
    start: Coloring,
    hub: Coloring,
    bank: tuple[int, ...],
    degen: DegeneracyData,
    avoid: int | None = None,
) -> tuple[list[Move], int]:
    """Walk from ``start`` towards ``hub`` that never moves ``v_n`` nor lands ``v_1``.

    Round i = 2..n recolours ``v_{i-1}, ..., v_1``; the final round writes the
    hub on ``v_{n-1}..v_2``.  In round n−1, ``v_1`` takes any colour clear of
    its neighbours' current and hub colours and of ``avoid``.  Returns the
    moves and the colour left on ``v_1``.  Requires n ≥ 3.
    """
    d, k, n, order = degen.d, start.k, graph.n, degen.order
    low = tuple(range(1, d + 2))
    high = tuple(range(d + 2, 2 * d + 3))
    other = high if bank == low else low
    first = order[0]
    colors = list(start.colors)
    moves: list[Move] = []
    for i in range(2, n + 1):
        round_bank = bank if (n - i) % 2 == 0 else other
        for j in range(i - 2, -1, -1):
            v = order[j]
            if i == n and j == 0:
                continue
            used = {colors[u] for u in graph.adjacency[v]}
            if i == n:
                new = hub[v]
                if new in used:
                    raise InvariantViolation(
                        f"final round blocked at vertex {v} (colour {new})", witness=v
                    )
            elif i == n - 1 and j == 0:
                used |= {hub[u] for u in graph.adjacency[v]}
                if avoid is not None:
                    used.add(avoid)
                if colors[v] not in used:
                    new = colors[v]
                else:
                    free = [c for c in range(1, k + 1) if c not in used]
                    if not free:
                        raise InvariantViolation(f"no free colour for vertex {v}", witness=v)
                    new = next((c for c in free if c in other), free[0])
            elif colors[v] in round_bank and colors[v] not in used:
                new = colors[v]
            else:
                new = next((c for c in round_bank if c not in used), None)
                if new is None:
                    raise InvariantViolation(f"bank exhausted at vertex {v} in round {i}", witness=v)
            if new != colors[v]:
                moves.append(Move(v, colors[v], new))
                colors[v] = new
    return moves, colors[first]


def composed_walk_bound(n: int) -> int:
    """n² − n from three vertices on, n(n+1) below."""
    return n * n - n if n >= 3 else n * (n + 1)


def compose_paths(
    graph: Graph,
    start: Coloring,
    target: Coloring,
    degen: DegeneracyData | None = None,
) -> list[Move]:
    """Walk between two arbitrary proper colourings, simplified.

    From three vertices on, both halves keep ``v_n`` fixed and stop short of
    moving ``v_1`` into the hub; the middle recolours ``v_n`` once and
    ``v_1`` once, so the walk has at most n² − n moves.  Smaller graphs go
    through ``hub_coloring`` with two canonical walks.

    Raises:
        PathConstructionError: Same conditions as ``canonical_path``.
        InvariantViolation: The walk exceeds ``composed_walk_bound``.
    """
    degen = degeneracy(graph) if degen is None else degen
    n, k = graph.n, start.k
    if target.k != k:
        raise PathConstructionError(f"palette mismatch: {k} vs {target.k}")
    if k < 2 * (degen.d + 1):
        raise PathConstructionError(
            f"canonical walk needs k >= 2(d+1) = {2 * (degen.d + 1)}, got k={k}"
        )
    require_proper(graph, start, "start")
    require_proper(graph, target, "target")
    if start.colors == target.colors:
        return []
    if n < 3:
        hub = hub_coloring(graph, k, degen)
        first = canonical_path(graph, start, hub, degen)
        second = canonical_path(graph, target, hub, degen)
        raw = first + reverse_moves(second)
    else:
        first_v, last_v = degen.order[0], degen.order[-1]
        a, b = start[last_v], target[last_v]
        hub_a, bank = pinned_hub(graph, k, degen, (a, b))
        hub_b = Coloring(
            tuple(b if v == last_v else c for v, c in enumerate(hub_a.colors)), k
        )
        there, h_start = _pinned_walk(graph, start, hub_a, bank, degen, avoid=b)
        back, h_target = _pinned_walk(graph, target, hub_b, bank, degen)
        middle = []
        if a != b:
            middle.append(Move(last_v, a, b))
        if h_start != h_target:
            middle.append(Move(first_v, h_start, h_target))
        raw = there + middle + reverse_moves(back)
    moves = simplify_moves(graph, start, raw)
    bound = composed_walk_bound(n)
    if len(moves) > bound:
        raise InvariantViolation(f"composed walk has {len(moves)} > {bound} moves")
    return moves


# ---------------------------------------------------------------------------
# Layered walk
# ---------------------------------------------------------------------------


def layered_schedule(graph: Graph, k: int, degen: DegeneracyData | None = None) -> LayeredSchedule:
    """Greedy sets S_i: every v ∈ S_i has ≤ k/2 − 1 neighbours in S_{≥i}.

    Raises:
        PathConstructionError: k < 2d + 2, or some S_i would be empty.
    """
    degen = degeneracy(graph) if degen is None else degen
    d = degen.d
    if k < 2 * d + 2:
        raise PathConstructionError(f"layered walk needs k >= 2d+2 = {2 * d + 2}, got k={k}")
    remaining = set(range(graph.n))
    limit = k / 2 - 1
    sets: list[tuple[int, ...]] = []
    while remaining:
        layer = tuple(
            sorted(
                v
                for v in remaining
                if sum(1 for u in graph.adjacency[v] if u in remaining) <= limit
            )
        )
        if not layer:
            raise PathConstructionError(
                f"layer {len(sets) + 1} would be empty with {len(remaining)} vertices left; "
                f"k={k} too small for degeneracy {d}",
                witness=min(remaining),
            )
        sets.append(layer)
        remaining.difference_update(layer)
    return LayeredSchedule(sets=tuple(sets), k=k, d=d)


def _layered_walk(
    graph: Graph,
    start: Coloring,
    target: Coloring,
    schedule: LayeredSchedule,
) -> list[Move]:
    """Single walk to a target coloured inside the first half palette."""
    k = start.k
    half = k // 2
    first = tuple(range(1, half + 1))
    second = tuple(range(half + 1, k + 1))
    ell = schedule.ell
    colors = list(start.colors)
    moves: list[Move] = []
    for i in range(1, ell + 2):
        bank = first if (i - (ell + 1)) % 2 == 0 else second
        for j in range(min(i, ell) - 1, -1, -1):
            for v in schedule.sets[j]:
                used = {colors[u] for u in graph.adjacency[v]}
                if i == ell + 1:
                    new = target[v]
                    if new in used:
                        raise InvariantViolation(
                            f"target round blocked at vertex {v} (colour {new})", witness=v
                        )
                elif colors[v] in bank and colors[v] not in used:
                    new = colors[v]
                else:
                    new = next((c for c in bank if c not in used), None)
                    if new is None:
                        raise InvariantViolation(
                            f"half palette exhausted at vertex {v} in round {i}", witness=v
                        )
                if new != colors[v]:
                    moves.append(Move(v, colors[v], new))
                    colors[v] = new
    return moves


def layered_path(graph: Graph, start: Coloring, target: Coloring, k: int | None = None) -> list[Move]:
    """Walk between two arbitrary proper colourings using the layered schedule.

    A target inside ``{1..⌊k/2⌋}`` is reached by one walk; any other target
    is reached through a half-palette hub colouring and the result is
    simplified.

    Raises:
        PathConstructionError: Palette mismatch, improper input, or the
            layered schedule cannot be built.
    """
    k = start.k if k is None else k
    if start.k != k or target.k != k:
        raise PathConstructionError(f"palette mismatch: {start.k}, {target.k} vs k={k}")
    require_proper(graph, start, "start")
    require_proper(graph, target, "target")
    schedule = layered_schedule(graph, k)
    if start.colors == target.colors:
        return []
    half = k // 2
    if all(c <= half for c in target.colors):
        moves = _layered_walk(graph, start, target, schedule)
        bound = schedule.walk_bound
    else:
        order = [v for layer in reversed(schedule.sets) for v in layer]
        hub = greedy_coloring(graph, order, range(1, half + 1), k)
        there = _layered_walk(graph, start, hub, schedule)
        back = _layered_walk(graph, target, hub, schedule)
        moves = simplify_moves(graph, start, there + reverse_moves(back))
        bound = 2 * schedule.walk_bound
    if len(moves) > bound:
        raise InvariantViolation(f"layered walk has {len(moves)} > {bound} moves")
    logger.debug("Layered walk: ℓ=%d, %d moves (bound %d)", schedule.ell, len(moves), bound)
    return moves
