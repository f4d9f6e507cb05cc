"""
Uniformity service layer.

Local-uniformity diagnostics: available-colour statistics, frozen and
nearly-frozen sets, the sequential recolouring experiment and the
low-codegree neighbour split.

Thresholds
----------
nearly frozen   a(v) < 2·Δ^{1−ε/4}        (per level, at round start)
uniform event   a(v) < Δ^{1−ε/2}
proof events    a(v) < f·k·e^{−Δ/k}       f ∈ {½, 9/10, 8/10}
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

from app.services.dynamics_service import (
    ChainState,
    Coloring,
    available_from,
    require_proper,
    run_set_dynamics,
)
from app.services.graph_service import Graph, codegree
from app.services.sampler_service import certified_source, make_stationary_source
from app.services.spectral_service import LevelPartition
from app.utils.constants import MODE_RANDOM, UNIFORMITY_FACTORS
from app.utils.errors import ColoringLabError, LevelPartitionError
from app.utils.seeding import UniformStream

logger = logging.getLogger(__name__)


@dataclass
class UniformityReport:
    """Availability statistics over a batch of colourings.

    ``histogram[a]`` counts (vertex, sample) pairs with ``a(v) = a``.
    """

    samples: int
    n: int
    k: int
    histogram: list[int]
    min_available: int
    mean_available: float
    frozen_total: int
    nearly_frozen_total: int
    threshold: float | None
    degree_floor_ok: bool
    proof_thresholds: dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def nearly_frozen_threshold(max_degree: int, epsilon: float, exponent: float | None = None) -> float:
    """2·Δ^{1−x} with x = ε/4 unless overridden."""
    x = epsilon / 4 if exponent is None else exponent
    return 2 * max(max_degree, 1) ** (1 - x)


def proof_thresholds(max_degree: int, k: int) -> dict[str, float]:
    base = k * math.exp(-max_degree / k)
    return {name: factor * base for name, factor in UNIFORMITY_FACTORS.items()}


def availability_report(
    graph: Graph,
    colorings: Sequence[Coloring],
    partition: LevelPartition | None = None,
    threshold: float | None = None,
) -> UniformityReport:
    """Histogram of a(v) over all vertices and samples."""
    if not colorings:
        raise ColoringLabError("availability report needs at least one colouring")
    k = colorings[0].k
    if threshold is None and partition is not None and partition.epsilon is not None:
        threshold = nearly_frozen_threshold(graph.max_degree, partition.epsilon)
    hist = [0] * (k + 1)
    floor_ok = True
    frozen = nearly = 0
    for col in colorings:
        for v in range(graph.n):
            a = len(available_from(graph, col.colors, k, v))
            hist[a] += 1
            if a < max(1, k - graph.degree(v)):
                floor_ok = False
            if a == 1:
                frozen += 1
            if threshold is not None and a < threshold:
                nearly += 1
    total = sum(hist)
    present = [a for a, c in enumerate(hist) if c]
    return UniformityReport(
        samples=len(colorings),
        n=graph.n,
        k=k,
        histogram=hist,
        min_available=min(present) if present else 0,
        mean_available=sum(a * c for a, c in enumerate(hist)) / total if total else 0.0,
        frozen_total=frozen,
        nearly_frozen_total=nearly,
        threshold=threshold,
        degree_floor_ok=floor_ok,
        proof_thresholds=proof_thresholds(graph.max_degree, k),
    )


def frozen_sets(
    graph: Graph,
    coloring: Coloring,
    partition: LevelPartition,
    level: int,
    threshold_exponent: float | None = None,
) -> set[int]:
    """``F_i = {v ∈ L_i : a(v) < 2Δ^{1−ε/4}}``.

    Raises:
        LevelPartitionError: Level out of range, or neither ε nor an
            exponent override is available.
    """
    if not 0 <= level < partition.m:
        raise LevelPartitionError(f"level {level} outside 0..{partition.m - 1}")
    if partition.epsilon is None and threshold_exponent is None:
        raise LevelPartitionError("partition has no ε; pass threshold_exponent")
    eps = partition.epsilon if partition.epsilon is not None else 0.0
    threshold = nearly_frozen_threshold(graph.max_degree, eps, threshold_exponent)
    return {
        v
        for v in partition.levels[level]
        if len(available_from(graph, coloring.colors, coloring.k, v)) < threshold
    }


def stationary_availability_check(
    graph: Graph,
    k: int,
    samples: int,
    epsilon: float,
    seed: int = 0,
    source=None,
    budget: int | None = None,
) -> dict[str, Any]:
    """Frequency of ``∃v: a_Y(v) < Δ^{1−ε/2}`` over stationary samples, plus
    the three ``f·k·e^{−Δ/k}`` events.

    Without an explicit ``source`` the samples come from ``certified_source``.

    Raises:
        ColoringLabError: ``samples < 1``, or no exact or certified sampler
            exists for this (graph, k) (sampler unavailable).
    """
    if samples < 1:
        raise ColoringLabError(f"samples must be >= 1, got {samples}")
    source = certified_source(graph, k, budget) if source is None else source
    stream = UniformStream(seed)
    delta = graph.max_degree
    uniform_bound = max(delta, 1) ** (1 - epsilon / 2)
    proof = proof_thresholds(delta, k)
    violations = 0
    proof_any = {name: 0 for name in proof}
    proof_vertex = {name: 0 for name in proof}
    for _ in range(samples):
        Y = source(stream)
        counts = [len(available_from(graph, Y.colors, k, v)) for v in range(graph.n)]
        if any(a < uniform_bound for a in counts):
            violations += 1
        for name, t in proof.items():
            below = sum(1 for a in counts if a < t)
            proof_vertex[name] += below
            if below:
                proof_any[name] += 1
    n = max(graph.n, 1)
    result = {
        "samples": samples,
        "provenance": getattr(source, "provenance", "custom"),
        "epsilon": epsilon,
        "uniform_bound": uniform_bound,
        "violation_frequency": violations / samples,
        "target": float(n) ** -4,
        "proof_thresholds": proof,
        "proof_any_frequency": {name: c / samples for name, c in proof_any.items()},
        "proof_vertex_frequency": {name: c / (samples * n) for name, c in proof_vertex.items()},
    }
    logger.info(
        "Availability check k=%d: violation frequency %.4f over %d samples",
        k,
        result["violation_frequency"],
        samples,
    )
    return result


def recolor_experiment(
    graph: Graph,
    Y: Coloring,
    S: Sequence[int],
    seed: int | UniformStream = 0,
) -> tuple[Coloring, list[int]]:
    """Redraw each ``s_j`` uniformly from its current available set, in order.

    Returns:
        Final colouring and the trace of ``a(s_j)`` at each redraw.
    """
    if len(set(S)) != len(S):
        raise ColoringLabError("recolouring sequence contains duplicates")
    require_proper(graph, Y, "Y")
    stream = seed if isinstance(seed, UniformStream) else UniformStream(seed)
    colors = list(Y.colors)
    trace: list[int] = []
    for s in S:
        avail = available_from(graph, colors, Y.k, s)
        trace.append(len(avail))
        colors[s] = avail[stream.below(len(avail))]
    return Coloring(tuple(colors), Y.k), trace


def select_low_codegree_set(
    graph: Graph,
    v: int,
    partition: LevelPartition,
    level: int,
    rho: float | None = None,
) -> tuple[list[int], list[int]]:
    """Split N(v) into S (levels ≤ i, codegree ≤ ρΔ^{ε/2}) and the rest.

    Raises:
        LevelPartitionError: v not in ``L_{level+1}``, missing ε/ρ, or
            |S̄| > 2Δ^{1−ε/2} (witness v).
    """
    if partition.level_of[v] != level + 1:
        raise LevelPartitionError(f"vertex {v} is not in L_{level + 1}", witness=v)
    rho = partition.rho_hat if rho is None else rho
    if partition.epsilon is None or rho is None:
        raise LevelPartitionError("low-codegree split needs ε and ρ")
    delta = max(graph.max_degree, 1)
    eps = partition.epsilon
    limit = rho * delta ** (eps / 2)
    S: list[int] = []
    rest: list[int] = []
    for u in graph.adjacency[v]:
        if partition.level_of[u] <= level and codegree(graph, u, v) <= limit:
            S.append(u)
        else:
            rest.append(u)
    bound = 2 * delta ** (1 - eps / 2)
    if len(rest) > bound:
        raise LevelPartitionError(
            f"vertex {v}: |S̄|={len(rest)} exceeds 2Δ^(1−ε/2)={bound:.3f}", witness=v
        )
    return S, rest


def nearly_frozen_profile(
    graph: Graph,
    k: int,
    partition: LevelPartition,
    rounds: int,
    seed: int = 0,
    start: Coloring | None = None,
) -> dict[str, Any]:
    """Empirical Pr[v ∈ F_i] snapshotted at each round start during set
    dynamics, plus the drift of F_i within its round."""
    if partition.epsilon is None:
        raise LevelPartitionError("nearly-frozen profile needs a partition with ε")
    stream = UniformStream(seed)
    if start is None:
        start = make_stationary_source(graph, k)(stream)
    require_proper(graph, start, "start")
    state = ChainState(start, stream)
    threshold = nearly_frozen_threshold(graph.max_degree, partition.epsilon)

    hits = [0] * graph.n
    seen = [0] * graph.n
    drifts: list[int] = []
    pending: dict[str, Any] = {}

    def close_round(current: ChainState) -> None:
        if pending:
            end = frozen_sets(graph, current.coloring, partition, pending["level"])
            drifts.append(len(end ^ pending["frozen"]))
            pending.clear()

    def observer(i: int, j: int, current: ChainState) -> None:
        close_round(current)
        if not partition.levels[j]:
            return
        frozen = frozen_sets(graph, current.coloring, partition, j)
        for v in partition.levels[j]:
            seen[v] += 1
            if v in frozen:
                hits[v] += 1
        pending.update(level=j, frozen=frozen)

    run_set_dynamics(state, graph, partition, rounds, MODE_RANDOM, observer)
    close_round(state)

    probs = [h / s for h, s in zip(hits, seen) if s]
    delta = max(graph.max_degree, 1)
    return {
        "rounds": rounds,
        "updates": state.steps,
        "threshold": threshold,
        "mean_probability": sum(probs) / len(probs) if probs else 0.0,
        "max_probability": max(probs, default=0.0),
        "target": math.exp(-(delta ** (1 - partition.epsilon / 3))),
        "mean_drift": sum(drifts) / len(drifts) if drifts else 0.0,
        "per_vertex": [h / s if s else None for h, s in zip(hits, seen)],
    }
