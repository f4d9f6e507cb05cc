"""
Exact oracle service.

Brute-force ground truth on tiny instances: the full state space Ω of
proper colourings, the exact Glauber transition matrix, total variation
distance, exact mixing time and the diameter of the move graph on Ω.

Design notes
------------
- States are enumerated by backtracking in vertex order with an early
  abort once ``budget`` is exceeded; a state's index is found through its
  base-k code ``Σ_v (c_v − 1)·k^v``.
- The transition matrix is assembled as scipy COO and stored as CSR; it is
  densified only for mixing-time powering, and only up to
  ``Settings.ORACLE_DENSE_LIMIT`` states.
- Mixing time is measured against the global uniform law.  Dense: repeated
  squaring finds a power of two past the threshold, binary lifting then
  pins the first step below it.  Sparse: blocks of start rows are stepped
  through P one update at a time; each row's distance to uniform only
  shrinks, so the mixing time is the largest per-start first passage.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from app.config import get_settings
from app.services.dynamics_service import Coloring, available_from
from app.services.graph_service import Graph, degeneracy
from app.utils.constants import (
    DEFAULT_MIXING_THRESHOLD,
    DISCONNECTED,
    DISTRIBUTION_SLACK,
    ROW_SUM_SLACK,
)
from app.utils.errors import BudgetExceededError, InvariantViolation, OracleError
from app.utils.seeding import UniformStream

logger = logging.getLogger(__name__)

_BFS_CHUNK = 256
_STEP_CELLS = 2_000_000  # start rows × |Ω| cells stepped at once on the sparse path


@dataclass(eq=False)
class ExactModel:
    """Enumerated Ω with its (optional) transition matrix.

    Attributes:
        n: Vertex count.
        k: Palette size.
        states: ``|Ω| × n`` array of colours, in enumeration order.
        index: Base-k code → row of ``states``.
        transition: Row-stochastic Glauber matrix once built.
        component_count: Connected components of the move graph on Ω.
        component_labels: Component label per state.
    """

    n: int
    k: int
    states: np.ndarray
    index: dict[int, int] = field(repr=False)
    transition: sparse.csr_matrix | None = None
    component_count: int | None = None
    component_labels: np.ndarray | None = None

    @property
    def size(self) -> int:
        return int(self.states.shape[0])

    @property
    def connected(self) -> bool:
        if self.component_count is None:
            raise OracleError("transition matrix not built")
        return self.component_count == 1

    def code(self, colors: Sequence[int]) -> int:
        code, scale = 0, 1
        for c in colors:
            code += (int(c) - 1) * scale
            scale *= self.k
        return code

    def index_of(self, coloring: Coloring | Sequence[int]) -> int:
        colors = coloring.colors if isinstance(coloring, Coloring) else coloring
        try:
            return self.index[self.code(colors)]
        except KeyError:
            raise OracleError(f"colouring {tuple(colors)} is not in Ω") from None

    def coloring(self, i: int) -> Coloring:
        return Coloring(tuple(int(c) for c in self.states[i]), self.k)


# ---------------------------------------------------------------------------
# Enumeration and transition matrix
# ---------------------------------------------------------------------------


def enumerate_colorings(graph: Graph, k: int, budget: int | None = None) -> ExactModel:
    """All proper k-colourings by backtracking in vertex order.

    Raises:
        BudgetExceededError: More than ``budget`` states (partial count).
        OracleError: ``k < 1``.
    """
    budget = get_settings().ORACLE_BUDGET if budget is None else budget
    if k < 1:
        raise OracleError(f"k must be >= 1, got {k}")
    n = graph.n
    earlier = [tuple(u for u in graph.adjacency[v] if u < v) for v in range(n)]
    found: list[tuple[int, ...]] = []
    colors = [0] * n

    if n == 0:
        found.append(())
    else:
        v = 0
        colors[0] = 0
        while v >= 0:
            colors[v] += 1
            if colors[v] > k:
                colors[v] = 0
                v -= 1
                continue
            if any(colors[u] == colors[v] for u in earlier[v]):
                continue
            if v == n - 1:
                found.append(tuple(colors))
                if len(found) > budget:
                    raise BudgetExceededError(
                        f"|Ω| exceeds enumeration budget {budget}", partial_count=len(found)
                    )
                continue
            v += 1
            colors[v] = 0

    states = np.array(found, dtype=np.int64).reshape(len(found), n)
    model = ExactModel(n=n, k=k, states=states, index={})
    model.index = {model.code(s): i for i, s in enumerate(found)}
    logger.info("Enumerated |Ω|=%d for n=%d, k=%d", model.size, n, k)
    return model


def build_transition_matrix(model: ExactModel, graph: Graph) -> ExactModel:
    """Fill in the Glauber transition matrix and the component structure.

    Raises:
        InvariantViolation: A row does not sum to 1 or the matrix is not
            symmetric.
    """
    n, k, size = model.n, model.k, model.size
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    powers = [k**v for v in range(n)]
    for i in range(size):
        state = model.states[i].tolist()
        code = model.code(state)
        if n == 0:
            rows.append(i)
            cols.append(i)
            vals.append(1.0)
            continue
        for v in range(n):
            avail = available_from(graph, state, k, v)
            p = 1.0 / (n * len(avail))
            for c in avail:
                j = model.index[code + (c - state[v]) * powers[v]]
                rows.append(i)
                cols.append(j)
                vals.append(p)
    P = sparse.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()
    P.sum_duplicates()

    row_err = float(np.abs(np.asarray(P.sum(axis=1)).ravel() - 1.0).max()) if size else 0.0
    if row_err > ROW_SUM_SLACK:
        raise InvariantViolation(f"transition rows deviate from 1 by {row_err:.3e}")
    asym = abs(P - P.T)
    if asym.nnz and float(asym.max()) > ROW_SUM_SLACK:
        raise InvariantViolation("transition matrix is not symmetric")

    count, labels = csgraph.connected_components(P, directed=False)
    model.transition = P
    model.component_count = int(count)
    model.component_labels = labels
    logger.info("Transition matrix built: %d states, %d component(s)", size, count)
    return model


def build_exact_model(graph: Graph, k: int, budget: int | None = None) -> ExactModel:
    return build_transition_matrix(enumerate_colorings(graph, k, budget), graph)


def _require_transition(model: ExactModel) -> sparse.csr_matrix:
    if model.transition is None:
        raise OracleError("transition matrix not built; call build_transition_matrix first")
    return model.transition


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------


def exact_tv(dist1: Sequence[float] | np.ndarray, dist2: Sequence[float] | np.ndarray) -> float:
    """½·Σ|p − q|.

    Raises:
        OracleError: Different supports, negative mass, or a sum away from 1.
    """
    p = np.asarray(dist1, dtype=np.float64)
    q = np.asarray(dist2, dtype=np.float64)
    if p.shape != q.shape:
        raise OracleError(f"support sizes differ: {p.shape} vs {q.shape}")
    for name, d in (("first", p), ("second", q)):
        if np.any(d < 0):
            raise OracleError(f"{name} distribution has negative mass")
        if abs(float(d.sum()) - 1.0) > DISTRIBUTION_SLACK:
            raise OracleError(f"{name} distribution sums to {float(d.sum())}, not 1")
    return 0.5 * float(np.abs(p - q).sum())


def uniform_distribution(model: ExactModel) -> np.ndarray:
    return np.full(model.size, 1.0 / model.size)


def _worst_tv(M: np.ndarray) -> float:
    return 0.5 * float(np.abs(M - 1.0 / M.shape[0]).sum(axis=1).max())


def _sparse_mixing_time(P: sparse.csr_matrix, threshold: float, horizon: int) -> int:
    size = P.shape[0]
    PT = P.T.tocsr()
    block = max(1, min(size, _STEP_CELLS // size))
    worst = 0
    for lo in range(0, size, block):
        hi = min(size, lo + block)
        rows = np.zeros((size, hi - lo))
        rows[np.arange(lo, hi), np.arange(hi - lo)] = 1.0
        t = 0
        while 0.5 * float(np.abs(rows - 1.0 / size).sum(axis=0).max()) > threshold:
            if t >= horizon:
                raise OracleError(f"mixing time exceeds horizon: t > {horizon}", witness=horizon)
            rows = PT @ rows
            t += 1
        worst = max(worst, t)
    return worst


def exact_mixing_time(
    model: ExactModel,
    threshold: float = DEFAULT_MIXING_THRESHOLD,
    dense_limit: int | None = None,
) -> int | str:
    """First t with worst-start TV(P^t(s, ·), uniform) ≤ threshold.

    Ω up to ``dense_limit`` (default ``Settings.ORACLE_DENSE_LIMIT``) is
    powered densely; larger Ω is stepped sparsely.  Returns
    ``"disconnected"`` when Ω is not connected under Glauber.

    Raises:
        OracleError: The horizon ``2^MIXING_HORIZON_LOG2`` was exceeded
            (message carries the lower bound).
    """
    settings = get_settings()
    P = _require_transition(model)
    if not model.connected:
        return DISCONNECTED
    size = model.size
    limit = settings.ORACLE_DENSE_LIMIT if dense_limit is None else dense_limit
    if size > limit:
        t = _sparse_mixing_time(P, threshold, 2**settings.MIXING_HORIZON_LOG2)
        logger.info("Exact mixing time %d (|Ω|=%d, sparse, threshold %.3f)", t, size, threshold)
        return t
    identity = np.eye(size)
    if _worst_tv(identity) <= threshold:
        return 0

    powers = [P.toarray()]
    while _worst_tv(powers[-1]) > threshold:
        if len(powers) > settings.MIXING_HORIZON_LOG2:
            bound = 2**settings.MIXING_HORIZON_LOG2
            raise OracleError(f"mixing time exceeds horizon: t > {bound}", witness=bound)
        powers.append(powers[-1] @ powers[-1])

    # d(2^(j-1)) > threshold ≥ d(2^j); lift the largest t with d(t) > threshold
    t = 0
    current = identity
    for j in range(len(powers) - 1, -1, -1):
        candidate = current @ powers[j]
        if _worst_tv(candidate) > threshold:
            current = candidate
            t += 2**j
    logger.info("Exact mixing time %d (|Ω|=%d, threshold %.3f)", t + 1, size, threshold)
    return t + 1


def exact_diameter(model: ExactModel) -> int | str:
    """Max BFS eccentricity of the move graph on Ω, or ``"disconnected"``."""
    P = _require_transition(model)
    if not model.connected:
        return DISCONNECTED
    size = model.size
    if size == 1:
        return 0
    adj = P.copy()
    adj.setdiag(0)
    adj.eliminate_zeros()
    adj.data[:] = 1.0
    diameter = 0
    for start in range(0, size, _BFS_CHUNK):
        idx = np.arange(start, min(start + _BFS_CHUNK, size))
        dist = csgraph.shortest_path(adj, directed=False, unweighted=True, indices=idx)
        diameter = max(diameter, int(dist.max()))
    return diameter


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def exact_sampler(model: ExactModel, stream: UniformStream) -> Coloring:
    """One uniform draw from Ω."""
    if model.size == 0:
        raise OracleError("Ω is empty")
    return model.coloring(stream.below(model.size))


def distribution_from_samples(
    model: ExactModel, colorings: Sequence[Coloring | Sequence[int]]
) -> np.ndarray:
    """Empirical law over Ω's index."""
    if not colorings:
        raise OracleError("no samples")
    counts = np.zeros(model.size)
    for col in colorings:
        counts[model.index_of(col)] += 1
    return counts / counts.sum()


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


def _has_everywhere_different_pair(model: ExactModel) -> bool:
    states = model.states
    for start in range(0, model.size, _BFS_CHUNK):
        block = states[start:start + _BFS_CHUNK]
        differ = (block[:, None, :] != states[None, :, :]).all(axis=2)
        if differ.any():
            return True
    return False


def oracle_report(
    graph: Graph,
    k: int,
    budget: int | None = None,
    threshold: float = DEFAULT_MIXING_THRESHOLD,
) -> dict[str, Any]:
    """Full exact summary of Ω for ``(graph, k)``."""
    settings = get_settings()
    model = build_exact_model(graph, k, budget)
    P = model.transition
    size = model.size
    col_sums = np.asarray(P.sum(axis=0)).ravel()
    stationary_ok = bool(np.abs(col_sums / size - 1.0 / size).max() <= ROW_SUM_SLACK) if size else False
    d = degeneracy(graph).d
    lower = float(max(k - d, 0)) ** graph.n

    diameter = exact_diameter(model)
    mixing: int | str | None
    try:
        mixing = exact_mixing_time(model, threshold)
    except OracleError as exc:
        logger.warning("Mixing time unavailable: %s", exc)
        mixing = None

    diameter_ge_n: bool | None = None
    if diameter != DISCONNECTED and size <= settings.ORACLE_DENSE_LIMIT:
        if _has_everywhere_different_pair(model):
            diameter_ge_n = int(diameter) >= graph.n

    # vertices with a single available colour in every state of Ω
    frozen: list[int] | None = None
    if 0 < size <= settings.ORACLE_DENSE_LIMIT:
        frozen = [
            v
            for v in range(graph.n)
            if all(len(available_from(graph, model.states[i], k, v)) == 1 for i in range(size))
        ]
    identity = bool(size) and P.diagonal().min() == 1.0

    return {
        "n": graph.n,
        "k": k,
        "omega_size": size,
        "connected": model.connected,
        "components": model.component_count,
        "diameter": diameter,
        "mixing_time": mixing,
        "stationary_ok": stationary_ok,
        "omega_lower_bound": lower,
        "omega_lower_bound_ok": size >= lower,
        "diameter_at_least_n": diameter_ge_n,
        "frozen_vertices": frozen,
        "identity_transition": bool(identity),
    }
