"""
Dynamics service layer.

Proper colourings, single-site Glauber updates and the level-set "set
dynamics" built on top of them.

Design notes
------------
- ``Coloring`` is an immutable snapshot; ``ChainState`` owns a mutable
  colour list plus its ``UniformStream`` and is mutated in place.
- A Glauber step spends exactly two uniforms: one for the vertex, one for
  the colour, indexed into the sorted available set.  Restricted steps draw
  the vertex from the sorted restriction, so a restriction to all of V
  reproduces the unrestricted trajectory.
- A vertex always has its own colour available, so frozen vertices need no
  special case: they resample their own colour.
- Round budget for level ``L_j`` is ``max(1, ⌈|L_j|·ln Δ⌉)``; graphs with
  Δ < 2 spend ``|L_j|`` updates.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass

from app.services.graph_service import Graph, is_independent
from app.services.spectral_service import LevelPartition
from app.utils.constants import MODE_RANDOM, MODE_SWEEP, ROUND_MODES
from app.utils.errors import ColoringError, ColoringLabError
from app.utils.seeding import UniformStream

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Coloring:
    """Assignment of a colour in ``1..k`` to every vertex."""

    colors: tuple[int, ...]
    k: int

    def __len__(self) -> int:
        return len(self.colors)

    def __getitem__(self, v: int) -> int:
        return self.colors[v]

    def __iter__(self):
        return iter(self.colors)

    def to_list(self) -> list[int]:
        return list(self.colors)


class ChainState:
    """Single-owner Glauber chain state.

    Attributes:
        colors: Current colour per vertex (mutated in place).
        k: Palette size.
        steps: Vertex updates performed so far.
        stream: Randomness source.
    """

    def __init__(self, coloring: Coloring, stream: UniformStream | int) -> None:
        self.colors: list[int] = list(coloring.colors)
        self.k = coloring.k
        self.steps = 0
        self.stream = stream if isinstance(stream, UniformStream) else UniformStream(stream)

    @property
    def coloring(self) -> Coloring:
        return Coloring(tuple(self.colors), self.k)

    def __repr__(self) -> str:
        return f"ChainState(n={len(self.colors)}, k={self.k}, steps={self.steps})"


@dataclass(frozen=True)
class RoundStats:
    """Per-round summary of ``run_set_dynamics``."""

    round_index: int
    level: int
    level_size: int
    updates: int
    mode: str


# ---------------------------------------------------------------------------
# Colourings
# ---------------------------------------------------------------------------


def make_coloring(colors: Sequence[int], k: int) -> Coloring:
    """Build a ``Coloring`` after checking every colour lies in ``1..k``.

    Raises:
        ColoringError: ``k < 1`` or a colour out of range (witness vertex).
    """
    if k < 1:
        raise ColoringError(f"palette size must be >= 1, got {k}")
    for v, c in enumerate(colors):
        if not 1 <= c <= k:
            raise ColoringError(f"vertex {v} has colour {c} outside 1..{k}", witness=v)
    return Coloring(tuple(int(c) for c in colors), k)


def is_proper(graph: Graph, coloring: Coloring) -> bool:
    """True iff no edge is monochromatic.

    Raises:
        ColoringError: Length mismatch or colour outside ``1..k``.
    """
    if len(coloring) != graph.n:
        raise ColoringError(f"coloring has {len(coloring)} entries for {graph.n} vertices")
    for v, c in enumerate(coloring.colors):
        if not 1 <= c <= coloring.k:
            raise ColoringError(f"vertex {v} has colour {c} outside 1..{coloring.k}", witness=v)
    colors = coloring.colors
    return all(colors[u] != colors[v] for u, v in graph.edges)


def require_proper(graph: Graph, coloring: Coloring, label: str = "coloring") -> None:
    if not is_proper(graph, coloring):
        bad = next((u, v) for u, v in sorted(graph.edges) if coloring[u] == coloring[v])
        raise ColoringError(f"{label} is not proper: edge {bad} is monochromatic", witness=bad)


def available_from(graph: Graph, colors: Sequence[int], k: int, v: int) -> tuple[int, ...]:
    """Sorted palette colours absent from ``N(v)`` under ``colors``."""
    used = {colors[u] for u in graph.adjacency[v]}
    return tuple(c for c in range(1, k + 1) if c not in used)


def available_colors(graph: Graph, coloring: Coloring, v: int) -> tuple[int, ...]:
    """``A_Y(v) = [k] ∖ Y(N(v))`` in ascending order."""
    return available_from(graph, coloring.colors, coloring.k, v)


def greedy_coloring(
    graph: Graph,
    order: Sequence[int],
    palette: Iterable[int],
    k: int | None = None,
) -> Coloring:
    """Give each vertex, in ``order``, the smallest palette colour unused by
    its already-coloured neighbours.

    Raises:
        ColoringError: Palette exhausted at some vertex (witness), or
            ``order`` is not a permutation of V.
    """
    palette = sorted(set(palette))
    if not palette:
        raise ColoringError("greedy colouring needs a non-empty palette")
    k = max(palette) if k is None else k
    if sorted(order) != list(range(graph.n)):
        raise ColoringError("greedy order must be a permutation of the vertices")
    colors = [0] * graph.n
    for v in order:
        used = {colors[u] for u in graph.adjacency[v]}
        choice = next((c for c in palette if c not in used), None)
        if choice is None:
            raise ColoringError(
                f"palette {palette} exhausted at vertex {v}", witness=v
            )
        colors[v] = choice
    return make_coloring(colors, k)


# ---------------------------------------------------------------------------
# Glauber
# ---------------------------------------------------------------------------


def _recolor(state: ChainState, graph: Graph, v: int) -> None:
    avail = available_from(graph, state.colors, state.k, v)
    state.colors[v] = avail[state.stream.below(len(avail))]
    state.steps += 1


def glauber_step(
    state: ChainState,
    graph: Graph,
    restrict_to: Sequence[int] | None = None,
) -> ChainState:
    """One heat-bath update at a uniform vertex of ``restrict_to`` (default V)."""
    if restrict_to is None:
        v = state.stream.below(graph.n)
    else:
        if not restrict_to:
            raise ColoringLabError("restrict_to must be non-empty")
        v = state.stream.choice(restrict_to)
    _recolor(state, graph, v)
    return state


def run_glauber(state: ChainState, graph: Graph, steps: int) -> ChainState:
    if steps < 0:
        raise ColoringLabError(f"steps must be >= 0, got {steps}")
    for _ in range(steps):
        glauber_step(state, graph)
    return state


# ---------------------------------------------------------------------------
# Set dynamics
# ---------------------------------------------------------------------------


def round_budget(level_size: int, max_degree: int) -> int:
    """Restricted updates spent on a level of ``level_size`` vertices."""
    if max_degree < 2:
        return level_size
    return max(1, math.ceil(level_size * math.log(max_degree)))


def set_dynamics_round(
    state: ChainState,
    graph: Graph,
    partition: LevelPartition,
    j: int,
    mode: str = MODE_RANDOM,
) -> ChainState:
    """One round on level ``L_j``.

    ``random`` performs ``round_budget`` restricted Glauber steps; ``sweep``
    (``MODE_SWEEP``) recolours every vertex of an independent level once in
    id order.

    Raises:
        ColoringLabError: Empty level, unknown mode, or sweep on a level
            that is not independent.
    """
    if mode not in ROUND_MODES:
        raise ColoringLabError(f"unknown round mode '{mode}'")
    level = partition.levels[j]
    if not level:
        raise ColoringLabError(f"level L_{j} is empty")
    if mode == MODE_SWEEP:
        if not is_independent(graph, level):
            raise ColoringLabError(
                f"sweep mode needs an independent level; L_{j} has an internal edge",
                witness=j,
            )
        for v in level:
            _recolor(state, graph, v)
        return state
    for _ in range(round_budget(len(level), graph.max_degree)):
        glauber_step(state, graph, level)
    return state


def run_set_dynamics(
    state: ChainState,
    graph: Graph,
    partition: LevelPartition,
    rounds: int,
    mode: str = MODE_RANDOM,
    observer: Callable[[int, int, ChainState], None] | None = None,
) -> tuple[ChainState, list[RoundStats]]:
    """Cycle ``j = i mod m`` for ``rounds`` rounds.

    In ``sweep-if-independent`` mode each independent level is swept once
    and the others get random rounds.  Empty levels count as a round with
    zero updates.  ``observer(i, j, state)`` runs at every round start.  A
    partition without levels (the empty graph) runs nothing.
    """
    if rounds < 0:
        raise ColoringLabError(f"rounds must be >= 0, got {rounds}")
    if mode not in ROUND_MODES:
        raise ColoringLabError(f"unknown round mode '{mode}'")
    m = partition.m
    if m == 0:
        logger.debug("Set dynamics: partition has no levels; nothing to run")
        return state, []
    sweepable = [
        mode == MODE_SWEEP and bool(level) and is_independent(graph, level)
        for level in partition.levels
    ]
    stats: list[RoundStats] = []
    for i in range(rounds):
        j = i % m
        if observer is not None:
            observer(i, j, state)
        level = partition.levels[j]
        before = state.steps
        used = MODE_SWEEP if sweepable[j] else MODE_RANDOM
        if level:
            set_dynamics_round(state, graph, partition, j, used)
        stats.append(RoundStats(i, j, len(level), state.steps - before, used))
    logger.debug("Set dynamics: %d rounds, %d updates", rounds, state.steps)
    return state, stats
