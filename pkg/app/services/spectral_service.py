"""
Spectral service layer.

Computes the principal eigenvector of the perturbed adjacency matrix
``Ã = A + (ρ̂/n)·J`` and the level-set partition it induces.

Pipeline
--------
power_iterate     → EigenData (w, ρ̂, ρ̃, residual)
choose_epsilon    → largest ε with ρ̂ ≤ Δ^{1−ε}
build_levels      → LevelPartition (L_0 .. L_{m−1})
fit_levels        → build_levels at the largest ε it accepts
verify_partition  → PartitionReport (local density, level count, w(N(u)) bound)

Design notes
------------
- Phase 1 iterates ``A + I`` from a strictly positive random start.  The
  unit shift keeps bipartite graphs from oscillating and leaves the Perron
  vector unchanged; ``rho_hat`` is the Rayleigh quotient on ``A``.
- Phase 2 iterates ``Ã + ρ̂·I``; since every eigenvalue of ``Ã`` is at least
  ``−ρ``, the shifted operator has a strictly dominant Perron root.
  ``J·x`` is never materialised: it is ``sum(x)`` broadcast.
- The local-density condition is enforced whenever ρ̂ ≤ Δ^{1−ε}, which
  ``choose_epsilon`` guarantees.  It is only implied when ρ̃ ≤ Δ^{1−ε}, so
  the largest ε can still be rejected (5×5 grid); ``fit_levels`` then
  halves ε.  Outside the ρ̂ regime (regular graphs with an explicit ε) it
  is not checked.
- Edgeless graphs short-circuit to ρ̂ = ρ̃ = 0 and a uniform ``w``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from app.config import get_settings
from app.services.graph_service import Graph
from app.utils.constants import EPSILON_HALVINGS, SPECTRAL_SANDWICH_SLACK
from app.utils.errors import LevelPartitionError, SpectralError

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EigenData:
    """Principal eigenpair of ``Ã`` plus the phase-1 estimate of ρ.

    Attributes:
        w: Positive weights with unit 1-norm.
        rho_tilde: Rayleigh value of ``w`` under ``Ã``.
        rho_hat: Rayleigh value of the phase-1 iterate under ``A``.
        iterations: Total power-iteration steps over both phases.
        residual: ``‖Ãw − ρ̃w‖∞ / ‖w‖∞`` at exit.
    """

    w: np.ndarray
    rho_tilde: float
    rho_hat: float
    iterations: int
    residual: float

    @property
    def w_min(self) -> float:
        return float(self.w.min()) if self.w.size else 0.0


@dataclass(frozen=True, eq=False)
class LevelPartition:
    """Ordered partition of V into levels.

    Attributes:
        epsilon: ε used to build the levels; ``None`` for the trivial and
            singleton partitions.
        levels: ``L_0 .. L_{m-1}`` as sorted vertex tuples (may be empty).
        level_of: Level index per vertex.
        max_degree: Δ of the graph the partition was built for.
        weights: Eigenvector weights when built from ``EigenData``.
        rho_hat: ρ̂ of that eigenvector, when available.
    """

    epsilon: float | None
    levels: tuple[tuple[int, ...], ...]
    level_of: tuple[int, ...]
    max_degree: int
    weights: np.ndarray | None = None
    rho_hat: float | None = None

    @property
    def m(self) -> int:
        return len(self.levels)


@dataclass
class PartitionReport:
    """Outcome of ``verify_partition``; failures carry witness vertices."""

    passed: bool
    m: int
    epsilon: float | None
    level_count_bound: float | None
    level_count_ok: bool
    local_density_checked: bool
    local_density_implied: bool
    local_density_bound: float | None
    local_density_witnesses: list[dict[str, float]] = field(default_factory=list)
    neighbor_weight_witnesses: list[dict[str, float]] = field(default_factory=list)
    max_within_level_degree: int = 0
    eigen_failures: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "m": self.m,
            "epsilon": self.epsilon,
            "level_count_bound": self.level_count_bound,
            "level_count_ok": self.level_count_ok,
            "local_density_checked": self.local_density_checked,
            "local_density_implied": self.local_density_implied,
            "local_density_bound": self.local_density_bound,
            "local_density_witnesses": self.local_density_witnesses,
            "neighbor_weight_witnesses": self.neighbor_weight_witnesses,
            "max_within_level_degree": self.max_within_level_degree,
            "eigen_failures": self.eigen_failures,
        }


# ---------------------------------------------------------------------------
# Power iteration
# ---------------------------------------------------------------------------


def _run_phase(
    apply_op,
    rayleigh_op,
    x: np.ndarray,
    tolerance: float,
    max_iters: int,
    phase: str,
) -> tuple[np.ndarray, float, int, float]:
    """Power-iterate ``apply_op`` until the relative ∞-norm residual of
    ``rayleigh_op`` drops to ``tolerance``.

    Returns:
        ``(x, rayleigh_value, iterations, residual)`` with ``x`` 1-normalised.
    """
    x = x / x.sum()
    residual = math.inf
    for it in range(1, max_iters + 1):
        y = apply_op(x)
        x = y / y.sum()
        ax = rayleigh_op(x)
        lam = float(x @ ax) / float(x @ x)
        residual = float(np.abs(ax - lam * x).max() / np.abs(x).max())
        if residual <= tolerance:
            logger.debug("%s converged in %d iterations (residual %.3e)", phase, it, residual)
            return x, lam, it, residual
    raise SpectralError(
        f"{phase} did not converge in {max_iters} iterations "
        f"(residual {residual:.3e} > tolerance {tolerance:.1e})",
        residual=residual,
    )


def power_iterate(
    graph: Graph,
    tolerance: float | None = None,
    max_iters: int | None = None,
    seed: int = 0,
) -> EigenData:
    """Two-phase power iteration for the principal eigenvector of ``Ã``.

    Args:
        graph: Input graph (n ≥ 1).
        tolerance: Relative ∞-norm residual target; defaults to
            ``Settings.POWER_TOLERANCE``.
        max_iters: Per-phase iteration cap; defaults to
            ``Settings.POWER_MAX_ITERS``.
        seed: Seed of the positive start vector.

    Raises:
        SpectralError: A phase failed to converge (carries the residual).
    """
    settings = get_settings()
    tolerance = settings.POWER_TOLERANCE if tolerance is None else tolerance
    max_iters = settings.POWER_MAX_ITERS if max_iters is None else max_iters
    n = graph.n
    if n < 1:
        raise SpectralError("power iteration needs at least one vertex")
    if tolerance <= 0:
        raise SpectralError(f"tolerance must be positive, got {tolerance}")

    if graph.edge_count == 0:
        return EigenData(
            w=np.full(n, 1.0 / n), rho_tilde=0.0, rho_hat=0.0, iterations=0, residual=0.0
        )

    A = graph.adjacency_matrix
    rng = np.random.default_rng(seed)
    start = 1.0 + rng.random(n)

    # Phase 1: ρ̂ from A + I
    x, rho_hat, it1, _ = _run_phase(
        lambda v: A @ v + v,
        lambda v: A @ v,
        start,
        tolerance,
        max_iters,
        "phase-1 (A)",
    )

    # Phase 2: w from Ã + ρ̂·I
    c = rho_hat / n

    def perturbed(v: np.ndarray) -> np.ndarray:
        return A @ v + c * v.sum()

    w, rho_tilde, it2, residual = _run_phase(
        lambda v: perturbed(v) + rho_hat * v,
        perturbed,
        x,
        tolerance,
        max_iters,
        "phase-2 (Ã)",
    )
    if not np.all(w > 0):
        raise SpectralError("principal eigenvector has non-positive entries", residual=residual)
    logger.info(
        "Power iteration n=%d: ρ̂=%.6f ρ̃=%.6f (%d iterations, residual %.2e)",
        n,
        rho_hat,
        rho_tilde,
        it1 + it2,
        residual,
    )
    return EigenData(
        w=w, rho_tilde=rho_tilde, rho_hat=rho_hat, iterations=it1 + it2, residual=residual
    )


def eigen_invariant_failures(graph: Graph, eigen: EigenData) -> list[str]:
    """Check positivity, the w_min floor and the ρ̂ < ρ̃ ≤ 2ρ̂ sandwich."""
    slack = get_settings().INVARIANT_SLACK
    failures: list[str] = []
    w = eigen.w
    n = graph.n
    if not np.all(w > 0):
        failures.append("w has non-positive entries")
    floor = w.sum() / (2 * n)
    if eigen.w_min < floor * (1 - slack):
        failures.append(f"w_min {eigen.w_min:.6e} below ‖w‖₁/(2n) = {floor:.6e}")
    if graph.edge_count > 0:
        if not eigen.rho_hat < eigen.rho_tilde:
            failures.append(f"ρ̂ {eigen.rho_hat:.6f} not below ρ̃ {eigen.rho_tilde:.6f}")
        upper = 2 * eigen.rho_hat + eigen.residual + slack
        if eigen.rho_tilde > upper * (1 + SPECTRAL_SANDWICH_SLACK):
            failures.append(f"ρ̃ {eigen.rho_tilde:.6f} above 2ρ̂ + tol = {upper:.6f}")
    return failures


# ---------------------------------------------------------------------------
# ε and levels
# ---------------------------------------------------------------------------


def choose_epsilon(graph: Graph, eigen: EigenData, tolerance: float | None = None) -> float:
    """Largest ε with ρ̂·(1+tol) ≤ Δ^{1−ε}.

    Raises:
        SpectralError: Δ < 2, or no spectral gap.
    """
    tolerance = get_settings().POWER_TOLERANCE if tolerance is None else tolerance
    delta = graph.max_degree
    if delta < 2:
        raise SpectralError(f"choosing ε needs Δ >= 2, got Δ={delta}")
    rho = eigen.rho_hat * (1 + tolerance)
    if rho >= delta:
        raise SpectralError(
            f"no spectral gap: graph outside ρ ≤ Δ^(1−ε) regime (ρ̂={eigen.rho_hat:.6f}, Δ={delta})",
            residual=eigen.residual,
        )
    epsilon = math.log(delta / rho) / math.log(delta)
    logger.info("Chose ε=%.6f (Δ=%d, ρ̂=%.6f)", epsilon, delta, eigen.rho_hat)
    return epsilon


def partition_regime_holds(rho: float | None, max_degree: int, epsilon: float | None) -> bool:
    """Whether ρ ≤ Δ^{1−ε}.

    Called with ρ̂ to decide whether the local-density condition applies,
    and with ρ̃ to report whether it is implied by the eigenvector bound.
    """
    if rho is None or epsilon is None or max_degree < 2:
        return False
    return rho <= max_degree ** (1 - epsilon) * (1 + SPECTRAL_SANDWICH_SLACK)


def _level_index(ratio: float, base: float) -> int:
    """i with base^i ≤ ratio < base^(i+1); closed on the left."""
    i = max(0, int(math.floor(math.log(ratio) / math.log(base))))
    while base ** (i + 1) <= ratio:
        i += 1
    while i > 0 and base**i > ratio:
        i -= 1
    return i


def local_density_bound(max_degree: int, epsilon: float) -> float:
    """Δ^{1−ε/2}."""
    return max_degree ** (1 - epsilon / 2)


def level_count_bound(n: int, max_degree: int, epsilon: float) -> float:
    """(2/ε)·ln(2n)/ln Δ."""
    return (2 / epsilon) * math.log(2 * n) / math.log(max_degree)


def _local_density_witnesses(graph: Graph, partition: LevelPartition) -> list[dict[str, float]]:
    bound = local_density_bound(partition.max_degree, partition.epsilon)
    witnesses: list[dict[str, float]] = []
    for v in range(graph.n):
        lv = partition.level_of[v]
        count = sum(1 for u in graph.adjacency[v] if partition.level_of[u] >= lv)
        if count >= bound:
            witnesses.append({"vertex": v, "level": lv, "count": count, "bound": bound})
    return witnesses


def _from_level_indices(
    idx: list[int],
    epsilon: float | None,
    max_degree: int,
    weights: np.ndarray | None = None,
    rho_hat: float | None = None,
) -> LevelPartition:
    m = max(idx, default=-1) + 1
    buckets: list[list[int]] = [[] for _ in range(m)]
    for v, i in enumerate(idx):
        buckets[i].append(v)
    return LevelPartition(
        epsilon=epsilon,
        levels=tuple(tuple(b) for b in buckets),
        level_of=tuple(idx),
        max_degree=max_degree,
        weights=weights,
        rho_hat=rho_hat,
    )


def build_levels(graph: Graph, eigen: EigenData, epsilon: float) -> LevelPartition:
    """Level sets ``L_i = {v : Δ^{iε/2} ≤ w(v)/w_min < Δ^{(i+1)ε/2}}``.

    Empty intermediate levels are kept so that ``level_of`` indices match
    the definition.  Graphs with Δ ≤ 1 get a single level.

    Raises:
        LevelPartitionError: ε outside (0, 1), or the local-density
            condition fails while ρ̂ ≤ Δ^{1−ε} (witness vertex).
    """
    if not 0 < epsilon < 1:
        raise LevelPartitionError(f"ε must lie in (0, 1), got {epsilon}")
    delta = graph.max_degree
    if graph.n == 0:
        return _from_level_indices([], epsilon, delta, eigen.w, eigen.rho_hat)
    if delta <= 1:
        idx = [0] * graph.n
    else:
        base = delta ** (epsilon / 2)
        w_min = eigen.w_min
        idx = [_level_index(float(wv) / w_min, base) for wv in eigen.w]
    partition = _from_level_indices(idx, epsilon, delta, eigen.w, eigen.rho_hat)

    if partition_regime_holds(eigen.rho_hat, delta, epsilon):
        witnesses = _local_density_witnesses(graph, partition)
        if witnesses:
            first = witnesses[0]
            raise LevelPartitionError(
                f"vertex {first['vertex']} in L_{first['level']} has {first['count']} "
                f"neighbours outside lower levels (bound {first['bound']:.4f})",
                witness=int(first["vertex"]),
            )
    logger.info("Built %d level(s) for n=%d with ε=%.4f", partition.m, graph.n, epsilon)
    return partition


def fit_levels(
    graph: Graph, eigen: EigenData, epsilon: float | None = None
) -> LevelPartition:
    """Levels for an explicit ε, or for the largest workable ε.

    Without ``epsilon`` the search starts at ``choose_epsilon`` and halves ε
    each time ``build_levels`` rejects it; finer levels separate a vertex
    from neighbours of slightly smaller weight.

    Raises:
        SpectralError: No spectral gap.
        LevelPartitionError: Still rejected after ``EPSILON_HALVINGS`` halvings.
    """
    if epsilon is not None:
        return build_levels(graph, eigen, epsilon)
    eps = choose_epsilon(graph, eigen)
    for _ in range(EPSILON_HALVINGS):
        try:
            return build_levels(graph, eigen, eps)
        except LevelPartitionError as exc:
            logger.warning("ε=%.6f rejected at vertex %s; halving", eps, exc.witness)
            eps /= 2
    return build_levels(graph, eigen, eps)


def partition_from_levels(
    graph: Graph,
    levels: list[list[int]],
    epsilon: float | None,
    eigen: EigenData | None = None,
) -> LevelPartition:
    """Wrap an explicit list of levels (for adversarial checks and replays).

    Raises:
        LevelPartitionError: The lists do not partition V.
    """
    idx = [-1] * graph.n
    for i, level in enumerate(levels):
        for v in level:
            if not 0 <= v < graph.n or idx[v] != -1:
                raise LevelPartitionError(f"vertex {v} missing from range or repeated", witness=v)
            idx[v] = i
    if -1 in idx:
        v = idx.index(-1)
        raise LevelPartitionError(f"vertex {v} not assigned to any level", witness=v)
    return LevelPartition(
        epsilon=epsilon,
        levels=tuple(tuple(sorted(level)) for level in levels),
        level_of=tuple(idx),
        max_degree=graph.max_degree,
        weights=None if eigen is None else eigen.w,
        rho_hat=None if eigen is None else eigen.rho_hat,
    )


def trivial_partition(graph: Graph) -> LevelPartition:
    """Single level holding every vertex (plain Glauber)."""
    return _from_level_indices([0] * graph.n, None, graph.max_degree)


def singleton_partition(graph: Graph) -> LevelPartition:
    """One level per vertex in id order (systematic scan)."""
    return _from_level_indices(list(range(graph.n)), None, graph.max_degree)


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def verify_partition(
    partition: LevelPartition, graph: Graph, eigen: EigenData
) -> PartitionReport:
    """Check the level-count bound, local density and w(N(u)) ≤ ρ̃·w(u).

    Never raises; failures are reported with witnesses.
    """
    settings = get_settings()
    epsilon = partition.epsilon
    delta = graph.max_degree
    gated = epsilon is not None and delta >= 2

    count_bound = level_count_bound(graph.n, delta, epsilon) if gated else None
    count_ok = True if count_bound is None else partition.m <= count_bound

    checked = gated and partition_regime_holds(eigen.rho_hat, delta, epsilon)
    implied = gated and partition_regime_holds(eigen.rho_tilde, delta, epsilon)
    density_bound = local_density_bound(delta, epsilon) if gated else None
    density_witnesses = _local_density_witnesses(graph, partition) if checked else []

    w = eigen.w
    A = graph.adjacency_matrix
    neighbor_sum = A @ w
    slack = (eigen.residual + settings.INVARIANT_SLACK) * float(w.max()) * max(1.0, eigen.rho_tilde)
    weight_witnesses = [
        {"vertex": v, "neighbor_weight": float(neighbor_sum[v]), "bound": float(eigen.rho_tilde * w[v])}
        for v in range(graph.n)
        if neighbor_sum[v] > eigen.rho_tilde * w[v] + slack
    ]

    within = 0
    for v in range(graph.n):
        lv = partition.level_of[v]
        within = max(within, sum(1 for u in graph.adjacency[v] if partition.level_of[u] == lv))

    eigen_failures = eigen_invariant_failures(graph, eigen)
    passed = count_ok and not density_witnesses and not weight_witnesses and not eigen_failures
    if not passed:
        logger.warning(
            "Partition verification failed: m=%d count_ok=%s density=%d weight=%d eigen=%d",
            partition.m,
            count_ok,
            len(density_witnesses),
            len(weight_witnesses),
            len(eigen_failures),
        )
    return PartitionReport(
        passed=passed,
        m=partition.m,
        epsilon=epsilon,
        level_count_bound=count_bound,
        level_count_ok=count_ok,
        local_density_checked=checked,
        local_density_implied=implied,
        local_density_bound=density_bound,
        local_density_witnesses=density_witnesses,
        neighbor_weight_witnesses=weight_witnesses,
        max_within_level_degree=within,
        eigen_failures=eigen_failures,
    )


def partition_to_dict(partition: LevelPartition) -> dict:
    """JSON-ready ``{epsilon, m, levels, weights}``."""
    return {
        "epsilon": partition.epsilon,
        "m": partition.m,
        "levels": [list(level) for level in partition.levels],
        "weights": None if partition.weights is None else [float(x) for x in partition.weights],
    }
