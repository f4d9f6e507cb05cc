"""
Structure service layer.

Forest covers, the common-neighbourhood subset selection built on them,
and the level-span machinery (descendants, span, level balls).

Design notes
------------
- Each edge is owned by its endpoint that comes earlier in the peeling
  order; a vertex owns at most d edges and puts them in distinct slots.
  Inside a slot every vertex owns at most one edge pointing forward, so
  slots are acyclic.  Acyclicity is still verified per slot and any
  offending edge is moved to a fresh slot.
- Subset selection colours each forest by depth mod 3 from the lowest-id
  root of each tree, keeps the largest colour-vector class of U and then
  verifies the common-neighbourhood bound directly.  A failed check
  triggers a greedy repair (inside the class, then over all of U).
"""

from __future__ import annotations

import logging
import math
from collections import deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from app.services.graph_service import DegeneracyData, Graph, degeneracy
from app.services.spectral_service import LevelPartition
from app.utils.errors import StructureError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForestCover:
    """Edge → forest assignment.

    Attributes:
        assignment: Forest index per edge ``(min, max)``.
        f: Number of forests.
    """

    assignment: dict[tuple[int, int], int]
    f: int

    def forest(self, i: int) -> list[tuple[int, int]]:
        return sorted(e for e, s in self.assignment.items() if s == i)

    def to_dict(self) -> dict:
        return {
            "f": self.f,
            "edges": [[u, v, s] for (u, v), s in sorted(self.assignment.items())],
        }


@dataclass
class SubsetResult:
    subset: list[int]
    f: int
    size_bound: float
    ratio: float
    repaired: bool


# ---------------------------------------------------------------------------
# Forests
# ---------------------------------------------------------------------------


def is_forest(n: int, edges: Sequence[tuple[int, int]]) -> bool:
    """An edge set on ``n`` vertices is acyclic iff |E| = n − #components."""
    if not edges:
        return True
    arr = np.asarray(edges, dtype=np.int64)
    mat = sparse.coo_matrix(
        (np.ones(len(arr)), (arr[:, 0], arr[:, 1])), shape=(n, n)
    ).tocsr()
    components, _ = csgraph.connected_components(mat, directed=False)
    return len(edges) == n - components


def forest_decomposition(graph: Graph, degen: DegeneracyData | None = None) -> ForestCover:
    """Cover E by at most d + 1 forests using the peeling order."""
    degen = degeneracy(graph) if degen is None else degen
    pos = degen.position
    assignment: dict[tuple[int, int], int] = {}
    for v in range(graph.n):
        forward = [u for u in graph.adjacency[v] if pos[u] > pos[v]]
        for slot, u in enumerate(forward):
            assignment[(min(u, v), max(u, v))] = slot
    f = max(assignment.values(), default=-1) + 1

    for slot in range(f):
        edges = sorted(e for e, s in assignment.items() if s == slot)
        if is_forest(graph.n, edges):
            continue
        # keep a spanning forest of the slot, move the rest to a fresh slot
        parent = list(range(graph.n))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for u, v in edges:
            ru, rv = find(u), find(v)
            if ru == rv:
                assignment[(u, v)] = f
            else:
                parent[ru] = rv
        logger.warning("Slot %d contained a cycle; moved edges to slot %d", slot, f)
        f += 1

    cover = ForestCover(assignment=assignment, f=f)
    for i in range(f):
        if not is_forest(graph.n, cover.forest(i)):
            raise StructureError(f"forest {i} is not acyclic", witness=i)
    return cover


def _forest_colors(graph: Graph, cover: ForestCover) -> list[tuple[int, ...]]:
    """Colour vector per vertex: depth mod 3 in each forest."""
    n = graph.n
    vectors: list[list[int]] = [[] for _ in range(n)]
    for i in range(cover.f):
        adj: list[list[int]] = [[] for _ in range(n)]
        for u, v in cover.forest(i):
            adj[u].append(v)
            adj[v].append(u)
        depth = [-1] * n
        for root in range(n):
            if depth[root] != -1:
                continue
            depth[root] = 0
            queue = deque([root])
            while queue:
                x = queue.popleft()
                for y in adj[x]:
                    if depth[y] == -1:
                        depth[y] = depth[x] + 1
                        queue.append(y)
        for v in range(n):
            vectors[v].append(depth[v] % 3)
    return [tuple(vec) for vec in vectors]


def common_neighborhood_sizes(graph: Graph, subset: Iterable[int]) -> dict[int, int]:
    """``|N(u) ∩ N(S ∖ {u})|`` for every u in S."""
    members = list(subset)
    hits: dict[int, int] = {}
    for s in members:
        for x in graph.adjacency[s]:
            hits[x] = hits.get(x, 0) + 1
    return {
        u: sum(1 for x in graph.adjacency[u] if hits[x] >= 2) for u in members
    }


def _greedy_subset(graph: Graph, candidates: Sequence[int], bound: int) -> list[int]:
    """Add candidates in id order while every member keeps ≤ bound common neighbours."""
    hits: dict[int, list[int]] = {}
    common: dict[int, int] = {}
    chosen: list[int] = []
    for c in sorted(candidates):
        own = 0
        bumped: dict[int, int] = {}
        for x in graph.adjacency[c]:
            adj = hits.get(x, [])
            if adj:
                own += 1
            if len(adj) == 1:
                bumped[adj[0]] = bumped.get(adj[0], 0) + 1
        if own > bound or any(common[u] + b > bound for u, b in bumped.items()):
            continue
        for u, b in bumped.items():
            common[u] += b
        common[c] = own
        for x in graph.adjacency[c]:
            hits.setdefault(x, []).append(c)
        chosen.append(c)
    return chosen


def struct_subset(graph: Graph, U: Iterable[int], cover: ForestCover) -> SubsetResult:
    """Largest forest-colour class of U, verified (and repaired if needed).

    Raises:
        StructureError: The verified subset is smaller than |U|·3^{−f}, or
            its common-neighbourhood check fails (witness vertex).
    """
    members = sorted(set(U))
    if not members:
        return SubsetResult(subset=[], f=cover.f, size_bound=0.0, ratio=1.0, repaired=False)
    f = cover.f
    size_bound = len(members) * 3.0 ** (-f)
    vectors = _forest_colors(graph, cover)
    classes: dict[tuple[int, ...], list[int]] = {}
    for u in members:
        classes.setdefault(vectors[u], []).append(u)
    best = min(classes.items(), key=lambda kv: (-len(kv[1]), kv[0]))[1]

    repaired = False
    sizes = common_neighborhood_sizes(graph, best)
    if any(s > f for s in sizes.values()):
        repaired = True
        best = _greedy_subset(graph, best, f)
        if len(best) < size_bound:
            best = _greedy_subset(graph, members, f)
        logger.info("Subset repaired greedily: kept %d of %d", len(best), len(members))

    for u, s in common_neighborhood_sizes(graph, best).items():
        if s > f:
            raise StructureError(
                f"vertex {u} shares {s} > {f} neighbours with the rest of the subset", witness=u
            )
    if len(best) < size_bound:
        raise StructureError(
            f"subset of size {len(best)} below |U|·3^-f = {size_bound:.4f}", witness=len(best)
        )
    return SubsetResult(
        subset=best,
        f=f,
        size_bound=size_bound,
        ratio=len(best) / len(members),
        repaired=repaired,
    )


# ---------------------------------------------------------------------------
# Levels
# ---------------------------------------------------------------------------


def descendants(graph: Graph, partition: LevelPartition, v: int, span: int) -> set[int]:
    """Vertices reachable from v by strictly descending level steps, no more
    than ``span`` levels below ``ℓ(v)``."""
    if span <= 0:
        return set()
    lvl = partition.level_of
    floor = lvl[v] - span
    seen: set[int] = set()
    queue = deque([v])
    while queue:
        x = queue.popleft()
        for u in graph.adjacency[x]:
            if lvl[u] < lvl[x] and lvl[u] >= floor and u not in seen:
                seen.add(u)
                queue.append(u)
    return seen


def level_span(graph: Graph, partition: LevelPartition) -> int:
    """``M = max over edges |ℓ(u) − ℓ(v)|``."""
    lvl = partition.level_of
    return max((abs(lvl[u] - lvl[v]) for u, v in graph.edges), default=0)


def span_bound(epsilon: float) -> int:
    """⌈2/ε⌉."""
    return math.ceil(2 / epsilon)


def level_ball(
    graph: Graph,
    partition: LevelPartition,
    z: int,
    radius: float,
    level: int | None = None,
) -> set[int]:
    """Vertices of ``L_level`` within ``radius`` steps of z along paths whose
    vertices after z all lie in ``L_level`` (default: the level of z)."""
    level = partition.level_of[z] if level is None else level
    lvl = partition.level_of
    dist = {z: 0}
    queue = deque([z])
    ball: set[int] = {z} if lvl[z] == level else set()
    while queue:
        x = queue.popleft()
        if dist[x] + 1 > radius:
            continue
        for u in graph.adjacency[x]:
            if lvl[u] == level and u not in dist:
                dist[u] = dist[x] + 1
                ball.add(u)
                queue.append(u)
    return ball
