"""
Graph service layer.

Holds the immutable ``Graph`` value used by every other service, the
certified-planar generator families, and the degeneracy (minimum-degree
peeling) machinery.

Generators
----------
grid        w×h grid                      planar
tree        complete b-ary tree of depth  planar
tri         random maximal planar graph   planar (face insertion)
path        P_n                           planar
cycle       C_n                           planar
star        K_{1,m}                       planar
complete    K_n                           planar iff n ≤ 4
bipartite   K_{a,b}                       planar iff min(a, b) ≤ 2

Design notes
------------
- Vertices are contiguous 0-based integers; edges are stored as sorted
  ``(min, max)`` pairs so that the canonical edge-list order is simply
  ``sorted(graph.edges)``.
- ``is_certified_planar`` is only ever set by a generator whose family is
  provably planar.  Loaded graphs are never certified.
- Every generator checks its vertex count against ``Settings.MAX_VERTICES``
  before allocating anything.
"""

from __future__ import annotations

import heapq
import logging
from collections.abc import Iterable
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

from app.config import get_settings
from app.utils.errors import (
    BudgetExceededError,
    ColoringLabError,
    GraphFormatError,
    InvariantViolation,
)
from app.utils.seeding import UniformStream

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Graph:
    """Immutable simple undirected graph.

    Attributes:
        n: Vertex count; vertices are ``0..n-1``.
        edges: Unordered edges stored as ``(min, max)`` pairs.
        adjacency: Per-vertex sorted neighbour tuple.
        max_degree: Δ, the longest adjacency tuple (0 for edgeless graphs).
        is_certified_planar: Set only by planar generator families.
    """

    n: int
    edges: frozenset[tuple[int, int]]
    adjacency: tuple[tuple[int, ...], ...]
    max_degree: int
    is_certified_planar: bool = False

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency_matrix(self) -> sparse.csr_matrix:
        """Symmetric 0/1 adjacency matrix in CSR form (float64)."""
        if not self.edges:
            return sparse.csr_matrix((self.n, self.n), dtype=np.float64)
        pairs = np.array(sorted(self.edges), dtype=np.int64)
        rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
        cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
        data = np.ones(len(rows), dtype=np.float64)
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))


@dataclass(frozen=True)
class DegeneracyData:
    """Result of greedy minimum-degree peeling.

    Attributes:
        order: Peeling order ``v_1, ..., v_n`` (first peeled first).
        d: Degeneracy, the largest degree seen at peel time.
        back_degree: Per-vertex count of neighbours peeled after it.
        position: Per-vertex index in ``order``.
    """

    order: tuple[int, ...]
    d: int
    back_degree: tuple[int, ...]
    position: tuple[int, ...]


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def build_graph(
    n: int,
    pairs: Iterable[tuple[int, int]],
    certified_planar: bool = False,
) -> Graph:
    """Build a ``Graph`` from vertex pairs, collapsing duplicates.

    Raises:
        GraphFormatError: Self-loop or vertex id outside ``[0, n)``.
    """
    if n < 0:
        raise GraphFormatError(f"vertex count must be non-negative, got {n}")
    edges: set[tuple[int, int]] = set()
    for u, v in pairs:
        if u == v:
            raise GraphFormatError(f"self-loop at vertex {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(f"edge ({u}, {v}) outside vertex range [0, {n})")
        edges.add((u, v) if u < v else (v, u))

    neigh: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        neigh[u].append(v)
        neigh[v].append(u)
    adjacency = tuple(tuple(sorted(nb)) for nb in neigh)
    max_degree = max((len(nb) for nb in adjacency), default=0)

    graph = Graph(
        n=n,
        edges=frozenset(edges),
        adjacency=adjacency,
        max_degree=max_degree,
        is_certified_planar=certified_planar,
    )
    if certified_planar and n >= 3 and graph.edge_count > 3 * n - 6:
        raise InvariantViolation(
            f"certified planar graph has {graph.edge_count} > 3n-6 edges",
            witness=graph.edge_count,
        )
    return graph


def _check_budget(n: int, family: str) -> None:
    budget = get_settings().MAX_VERTICES
    if n > budget:
        raise BudgetExceededError(
            f"{family} generator would create {n} vertices (budget {budget})",
            partial_count=n,
        )


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def gen_grid(w: int, h: int) -> Graph:
    """w×h grid graph; vertex ``r*w + c`` sits in row r, column c."""
    if w < 1 or h < 1:
        raise ColoringLabError(f"grid dimensions must be >= 1, got {w}x{h}")
    _check_budget(w * h, "grid")
    pairs: list[tuple[int, int]] = []
    for r in range(h):
        for c in range(w):
            v = r * w + c
            if c + 1 < w:
                pairs.append((v, v + 1))
            if r + 1 < h:
                pairs.append((v, v + w))
    return build_graph(w * h, pairs, certified_planar=True)


def gen_complete_tree(branching: int, depth: int) -> Graph:
    """Complete ``branching``-ary tree of the given depth, numbered breadth-first."""
    if branching < 1 or depth < 0:
        raise ColoringLabError(
            f"tree needs branching >= 1 and depth >= 0, got ({branching}, {depth})"
        )
    budget = get_settings().MAX_VERTICES
    total, layer = 1, 1
    for _ in range(depth):
        layer *= branching
        total += layer
        if total > budget:
            raise BudgetExceededError(
                f"tree generator exceeds budget {budget} vertices", partial_count=total
            )
    # breadth-first numbering: children of v are v*b+1 .. v*b+b
    pairs = [((v - 1) // branching, v) for v in range(1, total)]
    return build_graph(total, pairs, certified_planar=True)


def gen_planar_triangulation(n: int, seed: int, max_degree: int | None = None) -> Graph:
    """Random maximal planar graph by repeated insertion into a uniform face.

    Starts from K3 with its two faces; each new vertex is joined to the three
    corners of a face drawn uniformly at random, which is replaced by three
    new faces.  The result always has exactly ``3n - 6`` edges.

    With ``max_degree`` the draw is restricted to faces whose corners are all
    below the cap, and vertex 0 is grown first until it reaches the cap, so
    Δ equals ``max_degree`` exactly.

    Raises:
        ColoringLabError: n < 3, a cap below 3 or above n − 1, or no face
            left under the cap.
    """
    if n < 3:
        raise ColoringLabError(f"triangulation needs n >= 3, got {n}")
    if max_degree is not None and not 3 <= max_degree <= n - 1:
        raise ColoringLabError(f"max_degree must lie in 3..{n - 1}, got {max_degree}")
    _check_budget(n, "triangulation")
    stream = UniformStream(seed)
    pairs: list[tuple[int, int]] = [(0, 1), (1, 2), (0, 2)]
    faces: list[tuple[int, int, int]] = [(0, 1, 2), (0, 1, 2)]
    deg = [2, 2, 2] + [0] * (n - 3)
    for v in range(3, n):
        if max_degree is None:
            idx = stream.below(len(faces))
        else:
            hub_growing = deg[0] < max_degree
            eligible = [
                i
                for i, face in enumerate(faces)
                if all(deg[u] < max_degree for u in face) and (0 in face or not hub_growing)
            ]
            if not eligible:
                raise ColoringLabError(
                    f"no face below degree {max_degree} for vertex {v}", witness=v
                )
            idx = eligible[stream.below(len(eligible))]
        a, b, c = faces[idx]
        pairs.extend(((a, v), (b, v), (c, v)))
        for u in (a, b, c):
            deg[u] += 1
        deg[v] = 3
        faces[idx] = (a, b, v)
        faces.append((b, c, v))
        faces.append((a, c, v))
    graph = build_graph(n, pairs, certified_planar=True)
    if graph.edge_count != 3 * n - 6:
        raise InvariantViolation(
            f"triangulation has {graph.edge_count} edges, expected {3 * n - 6}",
            witness=graph.edge_count,
        )
    if max_degree is not None and graph.max_degree != max_degree:
        raise InvariantViolation(
            f"triangulation has Δ={graph.max_degree}, expected {max_degree}",
            witness=graph.max_degree,
        )
    logger.debug("Triangulation n=%d seed=%d Δ=%d", n, seed, graph.max_degree)
    return graph


def gen_path(n: int) -> Graph:
    if n < 1:
        raise ColoringLabError(f"path needs n >= 1, got {n}")
    _check_budget(n, "path")
    return build_graph(n, [(i, i + 1) for i in range(n - 1)], certified_planar=True)


def gen_cycle(n: int) -> Graph:
    if n < 3:
        raise ColoringLabError(f"cycle needs n >= 3, got {n}")
    _check_budget(n, "cycle")
    return build_graph(n, [(i, (i + 1) % n) for i in range(n)], certified_planar=True)


def gen_star(leaves: int) -> Graph:
    """Star K_{1,leaves}; the centre is vertex 0."""
    if leaves < 0:
        raise ColoringLabError(f"star needs leaves >= 0, got {leaves}")
    _check_budget(leaves + 1, "star")
    return build_graph(
        leaves + 1, [(0, i) for i in range(1, leaves + 1)], certified_planar=True
    )


def gen_complete(n: int) -> Graph:
    if n < 1:
        raise ColoringLabError(f"complete graph needs n >= 1, got {n}")
    _check_budget(n, "complete")
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    return build_graph(n, pairs, certified_planar=n <= 4)


def gen_complete_bipartite(a: int, b: int) -> Graph:
    """K_{a,b}; side A is ``0..a-1``, side B is ``a..a+b-1``."""
    if a < 1 or b < 1:
        raise ColoringLabError(f"bipartite sides must be >= 1, got ({a}, {b})")
    _check_budget(a + b, "bipartite")
    pairs = [(u, a + v) for u in range(a) for v in range(b)]
    return build_graph(a + b, pairs, certified_planar=min(a, b) <= 2)


def generate(family: str, params: list[int], seed: int = 0) -> Graph:
    """Dispatch a generator by family name (``GENERATORS`` vocabulary).

    Raises:
        ColoringLabError: Unknown family or wrong parameter count.
    """
    arity = {
        "grid": 2,
        "tree": 2,
        "tri": (1, 2),
        "path": 1,
        "cycle": 1,
        "star": 1,
        "complete": 1,
        "bipartite": 2,
    }
    if family not in arity:
        raise ColoringLabError(f"unknown generator family '{family}'")
    allowed = arity[family] if isinstance(arity[family], tuple) else (arity[family],)
    if len(params) not in allowed:
        counts = " or ".join(str(a) for a in allowed)
        raise ColoringLabError(
            f"generator '{family}' takes {counts} parameter(s), got {len(params)}"
        )
    if family == "grid":
        return gen_grid(*params)
    if family == "tree":
        return gen_complete_tree(*params)
    if family == "tri":
        return gen_planar_triangulation(params[0], seed, *params[1:])
    if family == "path":
        return gen_path(*params)
    if family == "cycle":
        return gen_cycle(*params)
    if family == "star":
        return gen_star(*params)
    if family == "complete":
        return gen_complete(*params)
    return gen_complete_bipartite(*params)


# ---------------------------------------------------------------------------
# Degeneracy and local queries
# ---------------------------------------------------------------------------


def degeneracy(graph: Graph) -> DegeneracyData:
    """Greedy minimum-degree peeling (ties to the lowest vertex id).

    ``back_degree[v]`` is the degree of ``v`` in the remaining graph at the
    moment it is peeled, i.e. its number of neighbours later in the order.
    """
    n = graph.n
    current = [graph.degree(v) for v in range(n)]
    removed = [False] * n
    heap = [(current[v], v) for v in range(n)]
    heapq.heapify(heap)
    order: list[int] = []
    back = [0] * n
    while heap:
        deg, v = heapq.heappop(heap)
        if removed[v] or deg != current[v]:
            continue
        removed[v] = True
        back[v] = deg
        order.append(v)
        for u in graph.adjacency[v]:
            if not removed[u]:
                current[u] -= 1
                heapq.heappush(heap, (current[u], u))

    position = [0] * n
    for i, v in enumerate(order):
        position[v] = i
    return DegeneracyData(
        order=tuple(order),
        d=max(back, default=0),
        back_degree=tuple(back),
        position=tuple(position),
    )


def verify_degeneracy_order(graph: Graph, degen: DegeneracyData) -> bool:
    """Single scan: every vertex has at most d neighbours later in the order."""
    if sorted(degen.order) != list(range(graph.n)):
        return False
    for v in range(graph.n):
        later = sum(
            1 for u in graph.adjacency[v] if degen.position[u] > degen.position[v]
        )
        if later != degen.back_degree[v] or later > degen.d:
            return False
    return True


def codegree(graph: Graph, u: int, v: int) -> int:
    """|N(u) ∩ N(v)|."""
    if u == v:
        raise ColoringLabError("codegree needs two distinct vertices", witness=u)
    return len(set(graph.adjacency[u]).intersection(graph.adjacency[v]))


def is_independent(graph: Graph, vertices: Iterable[int]) -> bool:
    members = set(vertices)
    return all(
        u not in members for v in members for u in graph.adjacency[v]
    )
