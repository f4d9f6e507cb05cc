"""
Coupling service layer.

Jerrum's one-site coupling of two Glauber chains, weighted disagreement
tracking and empirical contraction measurements.

Design notes
------------
- Both chains update the same vertex; the colour pair is drawn from the
  maximal coupling of the two uniform laws on ``A_X(v)`` and ``A_Y(v)``.
  Common colours get mass ``min(1/a, 1/b)`` on the diagonal; the residual
  masses are paired by the north-west corner rule over ascending colours.
  The joint table is deterministic and one uniform selects an entry.
- ``D`` and ``w(D)`` are maintained incrementally; ``check_invariants``
  re-derives both by a full scan.
- Origins: a newborn disagreement inherits the lowest-id origin among its
  disagreeing neighbours; disagreements with no attributed neighbour stay
  unattributed.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from app.config import get_settings
from app.services.dynamics_service import (
    Coloring,
    available_from,
    require_proper,
    round_budget,
)
from app.services.graph_service import Graph, is_independent
from app.services.spectral_service import LevelPartition
from app.services.structure_service import level_ball
from app.utils.constants import (
    CHAIN_GLAUBER,
    CHAIN_SET_DYNAMICS,
    MIN_CONTRACTION_SAMPLES,
    MODE_RANDOM,
    MODE_SWEEP,
    WEIGHT_SUM_SLACK,
)
from app.utils.errors import CouplingError, InvariantViolation
from app.utils.seeding import UniformStream

logger = logging.getLogger(__name__)

StationarySource = Callable[[UniformStream], Coloring]


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DriftRecord:
    t: int
    vertex: int
    wD_before: float
    wD_after: float
    created: bool
    destroyed: bool


class CoupledState:
    """Two colourings evolving under the coupling, plus ``D`` and ``w(D)``.

    Args:
        X, Y: Proper colourings on the same palette.
        stream: Shared randomness (or an integer seed).
        weights: Per-vertex weights; all ones when omitted.
    """

    def __init__(
        self,
        X: Coloring,
        Y: Coloring,
        stream: UniformStream | int,
        weights: np.ndarray | Sequence[float] | None = None,
    ) -> None:
        if X.k != Y.k:
            raise CouplingError(f"palette mismatch: {X.k} vs {Y.k}")
        if len(X) != len(Y):
            raise CouplingError("colourings have different lengths")
        n = len(X)
        self.X: list[int] = list(X.colors)
        self.Y: list[int] = list(Y.colors)
        self.k = X.k
        self.stream = stream if isinstance(stream, UniformStream) else UniformStream(stream)
        self.weights = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
        if self.weights.shape != (n,):
            raise CouplingError(f"weights have shape {self.weights.shape}, expected ({n},)")
        self.D: set[int] = {v for v in range(n) if self.X[v] != self.Y[v]}
        self.wD = float(sum(self.weights[v] for v in self.D))
        self.steps = 0

    @property
    def coalesced(self) -> bool:
        return not self.D

    def snapshot(self) -> tuple[Coloring, Coloring]:
        return Coloring(tuple(self.X), self.k), Coloring(tuple(self.Y), self.k)

    def check_invariants(self) -> None:
        """Re-derive ``D`` and ``w(D)`` by full scan.

        Raises:
            InvariantViolation: Incremental state drifted from the scan.
        """
        full = {v for v in range(len(self.X)) if self.X[v] != self.Y[v]}
        if full != self.D:
            raise InvariantViolation("incremental disagreement set differs from full scan")
        scan = float(sum(self.weights[v] for v in full))
        if abs(scan - self.wD) > WEIGHT_SUM_SLACK * max(1.0, abs(scan)):
            raise InvariantViolation(f"w(D) drifted: incremental {self.wD} vs scan {scan}")


@dataclass
class CouplingTrajectory:
    """Recorded run of a coupled pair."""

    initial_disagreements: tuple[int, ...]
    wD: list[float]
    records: list[DriftRecord] = field(default_factory=list)
    coalesced_at: int | None = None

    @property
    def steps(self) -> int:
        return len(self.wD) - 1


@dataclass(frozen=True)
class CouplingSchedule:
    """Either ``steps`` Glauber updates or ``rounds`` set-dynamics rounds."""

    kind: str = CHAIN_GLAUBER
    steps: int = 0
    partition: LevelPartition | None = None
    rounds: int = 0
    mode: str = MODE_RANDOM


@dataclass
class OriginAttribution:
    by_origin: dict[int, set[int]]
    unattributed: set[int]


@dataclass
class ContractionReport:
    method: str
    samples: int
    mean: float
    stderr: float
    analytic_mean: float
    frozen_samples: int
    mean_all: float = 0.0

    @property
    def measured(self) -> int:
        return self.samples - self.frozen_samples

    @property
    def contracting(self) -> bool:
        """Drift below zero at three standard errors over the non-frozen samples."""
        return self.measured >= 2 and self.mean + 3 * self.stderr < 0

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "samples": self.samples,
            "mean": self.mean,
            "stderr": self.stderr,
            "analytic_mean": self.analytic_mean,
            "frozen_samples": self.frozen_samples,
            "mean_all": self.mean_all,
            "contracting": self.contracting,
        }


# ---------------------------------------------------------------------------
# Maximal coupling of two uniform colour laws
# ---------------------------------------------------------------------------


def coupling_joint(
    avail_x: Sequence[int], avail_y: Sequence[int]
) -> list[tuple[int, int, float]]:
    """Joint law ``[(cx, cy, p), ...]`` of the maximal coupling.

    Diagonal entries come first in ascending colour order, followed by the
    residual pairs.  Zero-mass entries are omitted.
    """
    a, b = len(avail_x), len(avail_y)
    if a == 0 or b == 0:
        raise CouplingError("available sets must be non-empty")
    px, py = 1.0 / a, 1.0 / b
    diag = min(px, py)
    in_x, in_y = set(avail_x), set(avail_y)
    common = sorted(in_x & in_y)
    joint = [(c, c, diag) for c in common]

    rx = [(c, px - (diag if c in in_y else 0.0)) for c in sorted(avail_x)]
    ry = [(c, py - (diag if c in in_x else 0.0)) for c in sorted(avail_y)]
    rx = [(c, m) for c, m in rx if m > 1e-15]
    ry = [(c, m) for c, m in ry if m > 1e-15]
    i = j = 0
    left_x = rx[0][1] if rx else 0.0
    left_y = ry[0][1] if ry else 0.0
    while i < len(rx) and j < len(ry):
        mass = min(left_x, left_y)
        if mass > 1e-15:
            joint.append((rx[i][0], ry[j][0], mass))
        left_x -= mass
        left_y -= mass
        if left_x <= 1e-15:
            i += 1
            left_x = rx[i][1] if i < len(rx) else 0.0
        if left_y <= 1e-15:
            j += 1
            left_y = ry[j][1] if j < len(ry) else 0.0
    return joint


def mismatch_probability(avail_x: Sequence[int], avail_y: Sequence[int]) -> float:
    """Pr[cx ≠ cy] under the maximal coupling: 1 − |C| / max(a, b)."""
    common = len(set(avail_x) & set(avail_y))
    return 1.0 - common / max(len(avail_x), len(avail_y))


def _sample_joint(joint: list[tuple[int, int, float]], u: float) -> tuple[int, int]:
    acc = 0.0
    for cx, cy, p in joint:
        acc += p
        if u < acc:
            return cx, cy
    return joint[-1][0], joint[-1][1]


# ---------------------------------------------------------------------------
# Coupled steps and runs
# ---------------------------------------------------------------------------


def _update_vertex(cs: CoupledState, graph: Graph, v: int) -> DriftRecord:
    ax = available_from(graph, cs.X, cs.k, v)
    ay = available_from(graph, cs.Y, cs.k, v)
    cx, cy = _sample_joint(coupling_joint(ax, ay), cs.stream.uniform())
    before = cs.wD
    was = v in cs.D
    cs.X[v], cs.Y[v] = cx, cy
    now = cx != cy
    if now and not was:
        cs.D.add(v)
        cs.wD += float(cs.weights[v])
    elif was and not now:
        cs.D.discard(v)
        cs.wD -= float(cs.weights[v])
        if not cs.D:
            cs.wD = 0.0
    cs.steps += 1
    return DriftRecord(
        t=cs.steps,
        vertex=v,
        wD_before=before,
        wD_after=cs.wD,
        created=now and not was,
        destroyed=was and not now,
    )


def jerrum_coupled_step(
    cs: CoupledState,
    graph: Graph,
    restrict_to: Sequence[int] | None = None,
) -> DriftRecord:
    """One coupled update at a shared uniform vertex; mutates ``cs``."""
    if restrict_to is None:
        v = cs.stream.below(graph.n)
    else:
        if not restrict_to:
            raise CouplingError("restrict_to must be non-empty")
        v = cs.stream.choice(restrict_to)
    return _update_vertex(cs, graph, v)


def coupling_with_stationarity_horizon(n: int) -> int:
    """Default Glauber horizon ⌈2n·ln(2en)⌉ for coupling runs."""
    if n < 1:
        return 0
    return math.ceil(2 * n * math.log(2 * math.e * n))


def _coupled_level_round(cs: CoupledState, graph: Graph, level: tuple[int, ...], mode: str, sink) -> None:
    if mode == MODE_SWEEP:
        for v in level:
            sink(_update_vertex(cs, graph, v))
        return
    for _ in range(round_budget(len(level), graph.max_degree)):
        sink(jerrum_coupled_step(cs, graph, level))


def run_coupling(
    X0: Coloring,
    Y0: Coloring,
    graph: Graph,
    schedule: CouplingSchedule,
    weights: np.ndarray | Sequence[float] | None = None,
    seed: UniformStream | int = 0,
    record: bool = True,
    stop_when_coalesced: bool = False,
) -> CouplingTrajectory:
    """Run a coupled pair under ``schedule`` and record ``w(D_t)``.

    Raises:
        ColoringError: Either start is improper.
        CouplingError: Palette mismatch or malformed schedule.
    """
    require_proper(graph, X0, "X0")
    require_proper(graph, Y0, "Y0")
    cs = CoupledState(X0, Y0, seed, weights)
    traj = CouplingTrajectory(
        initial_disagreements=tuple(sorted(cs.D)),
        wD=[cs.wD],
        coalesced_at=0 if cs.coalesced else None,
    )

    class _Stop(Exception):
        pass

    def sink(rec: DriftRecord) -> None:
        traj.wD.append(rec.wD_after)
        if record:
            traj.records.append(rec)
        if traj.coalesced_at is None and cs.coalesced:
            traj.coalesced_at = cs.steps
            if stop_when_coalesced:
                raise _Stop

    if stop_when_coalesced and traj.coalesced_at is not None:
        return traj
    try:
        if schedule.kind == CHAIN_GLAUBER:
            for _ in range(schedule.steps):
                sink(jerrum_coupled_step(cs, graph))
        elif schedule.kind == CHAIN_SET_DYNAMICS:
            partition = schedule.partition
            if partition is None:
                raise CouplingError("set-dynamics schedule needs a partition")
            if partition.m == 0:
                raise _Stop
            sweepable = [
                schedule.mode == MODE_SWEEP and bool(level) and is_independent(graph, level)
                for level in partition.levels
            ]
            for i in range(schedule.rounds):
                j = i % partition.m
                level = partition.levels[j]
                if level:
                    _coupled_level_round(
                        cs, graph, level, MODE_SWEEP if sweepable[j] else MODE_RANDOM, sink
                    )
        else:
            raise CouplingError(f"unknown schedule kind '{schedule.kind}'")
    except _Stop:
        pass
    logger.debug(
        "Coupling run: %d steps, coalesced_at=%s", cs.steps, traj.coalesced_at
    )
    return traj


# ---------------------------------------------------------------------------
# Origins
# ---------------------------------------------------------------------------


def track_disagreement_origins(
    trajectory: CouplingTrajectory,
    graph: Graph,
    sources: Sequence[int] | None = None,
    within: Sequence[int] | None = None,
) -> OriginAttribution:
    """Partition the final disagreement set by origin.

    ``sources`` defaults to the initial disagreements.  ``within`` (e.g. a
    level ``L_i``) restricts the reported sets.

    Raises:
        CouplingError: Trajectory was recorded without drift records.
    """
    if trajectory.steps and not trajectory.records:
        raise CouplingError("origin tracking needs a trajectory recorded with drift records")
    initial = set(trajectory.initial_disagreements)
    src = initial if sources is None else set(sources) & initial
    origin: dict[int, int | None] = {v: (v if v in src else None) for v in initial}
    for rec in trajectory.records:
        v = rec.vertex
        if rec.created:
            causes = [
                origin[u] for u in graph.adjacency[v] if u in origin and origin[u] is not None
            ]
            origin[v] = min(causes) if causes else None
        elif rec.destroyed:
            origin.pop(v, None)

    keep = None if within is None else set(within)
    by_origin: dict[int, set[int]] = {}
    unattributed: set[int] = set()
    for v, z in origin.items():
        if keep is not None and v not in keep:
            continue
        if z is None:
            unattributed.add(v)
        else:
            by_origin.setdefault(z, set()).add(v)
    return OriginAttribution(by_origin=by_origin, unattributed=unattributed)


# ---------------------------------------------------------------------------
# Drift
# ---------------------------------------------------------------------------


def exact_one_step_drift(
    graph: Graph,
    X: Coloring,
    Y: Coloring,
    weights: np.ndarray | Sequence[float] | None = None,
) -> float:
    """E[w(D_{t+1}) − w(D_t) | X, Y] by enumerating every (vertex, colour pair)."""
    w = np.ones(graph.n) if weights is None else np.asarray(weights, dtype=np.float64)
    total = 0.0
    for v in range(graph.n):
        joint = coupling_joint(
            available_from(graph, X.colors, X.k, v), available_from(graph, Y.colors, Y.k, v)
        )
        differ = sum(p for cx, cy, p in joint if cx != cy)
        total += w[v] * (differ - (1.0 if X[v] != Y[v] else 0.0))
    return total / graph.n


def analytic_drift_bound(
    graph: Graph,
    X: Coloring,
    Y: Coloring,
    weights: np.ndarray | Sequence[float] | None = None,
) -> float:
    """(1/n)·Σ_v w(v)|N(v) ∩ D|/a_t(v) − (1/n)·w(D), with a_t = min(a_X, a_Y)."""
    w = np.ones(graph.n) if weights is None else np.asarray(weights, dtype=np.float64)
    D = {v for v in range(graph.n) if X[v] != Y[v]}
    spread = 0.0
    for v in range(graph.n):
        hits = sum(1 for u in graph.adjacency[v] if u in D)
        if hits:
            a_t = min(
                len(available_from(graph, X.colors, X.k, v)),
                len(available_from(graph, Y.colors, Y.k, v)),
            )
            spread += w[v] * hits / a_t
    return (spread - sum(w[v] for v in D)) / graph.n


def single_disagreement_pair(
    graph: Graph, X: Coloring, stream: UniformStream, vertex: int | None = None
) -> Coloring | None:
    """Y equal to X except at one vertex u with ``a_X(u) ≥ 2``.

    ``u`` is uniform among eligible vertices unless given; returns ``None``
    when no vertex can be recoloured.
    """
    if vertex is None:
        eligible = [v for v in range(graph.n) if len(available_from(graph, X.colors, X.k, v)) >= 2]
        if not eligible:
            return None
        vertex = stream.choice(eligible)
    choices = [c for c in available_from(graph, X.colors, X.k, vertex) if c != X[vertex]]
    if not choices:
        return None
    colors = list(X.colors)
    colors[vertex] = stream.choice(choices)
    return Coloring(tuple(colors), X.k)


def contraction_estimate(
    graph: Graph,
    weights: np.ndarray | Sequence[float] | None,
    k: int,
    samples: int,
    stationary_source: StationarySource,
    seed: int = 0,
    method: str = "exact",
) -> ContractionReport:
    """Estimate one-step drift from single-disagreement stationary starts.

    ``exact`` averages the exact conditional drift of each pair; ``sampled``
    simulates one coupled step per pair.  Frozen samples (no vertex can be
    recoloured) have drift 0 and are left out of ``mean``; ``mean_all``
    counts them as zeros.

    Raises:
        CouplingError: Fewer than the minimum sample count, or unknown method.
    """
    if samples < MIN_CONTRACTION_SAMPLES:
        raise CouplingError(
            f"contraction estimate needs >= {MIN_CONTRACTION_SAMPLES} samples, got {samples}"
        )
    if method not in ("exact", "sampled"):
        raise CouplingError(f"unknown contraction method '{method}'")
    stream = UniformStream(seed)
    drifts = np.zeros(samples)
    bounds = np.zeros(samples)
    active = np.ones(samples, dtype=bool)
    frozen = 0
    for s in range(samples):
        X = stationary_source(stream)
        if X.k != k:
            raise CouplingError(f"stationary source produced k={X.k}, expected {k}")
        Y = single_disagreement_pair(graph, X, stream)
        if Y is None:
            frozen += 1
            active[s] = False
            continue
        bounds[s] = analytic_drift_bound(graph, X, Y, weights)
        if method == "exact":
            drifts[s] = exact_one_step_drift(graph, X, Y, weights)
        else:
            cs = CoupledState(X, Y, stream, weights)
            rec = jerrum_coupled_step(cs, graph)
            drifts[s] = rec.wD_after - rec.wD_before
    measured = drifts[active]
    mean = float(measured.mean()) if measured.size else 0.0
    stderr = float(measured.std(ddof=1) / math.sqrt(measured.size)) if measured.size >= 2 else 0.0
    if frozen:
        logger.warning("%d of %d contraction samples frozen; excluded from the mean", frozen, samples)
    report = ContractionReport(
        method=method,
        samples=samples,
        mean=mean,
        stderr=stderr,
        analytic_mean=float(bounds[active].mean()) if measured.size else 0.0,
        frozen_samples=frozen,
        mean_all=float(drifts.mean()),
    )
    logger.info(
        "Contraction (%s, k=%d): mean drift %.3e ± %.1e, analytic %.3e",
        method,
        k,
        mean,
        stderr,
        report.analytic_mean,
    )
    return report


# ---------------------------------------------------------------------------
# Per-level contraction
# ---------------------------------------------------------------------------


@dataclass
class LevelContractionReport:
    level: int
    source: int
    samples: int
    skipped: int
    mean_ratio: float
    stderr: float
    target: float
    eta: float
    within_slack: bool
    ball_radius: float
    escaped_ball: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def boundary_vertex(graph: Graph, partition: LevelPartition, level: int) -> int | None:
    """Lowest-id vertex outside ``L_level`` with a neighbour inside it."""
    members = set(partition.levels[level])
    for v in range(graph.n):
        if v not in members and any(u in members for u in graph.adjacency[v]):
            return v
    return None


def level_contraction_report(
    graph: Graph,
    partition: LevelPartition,
    level: int,
    k: int,
    samples: int,
    stationary_source: StationarySource,
    source: int | None = None,
    seed: int = 0,
    eta: float | None = None,
) -> LevelContractionReport:
    """One coupled round on ``L_level`` from a single boundary disagreement.

    Measures ``E[w(D^T ∩ L_level)] / w(z)`` against ``Δ^{−ε/4}`` and counts
    runs whose disagreements of origin z left the ball ``B_r(z)`` with
    ``r = Δ^{1−ε/3}/ln²Δ``.  The comparison is reported, never enforced.

    Raises:
        CouplingError: Partition lacks weights or ε, empty level, or no
            boundary vertex.
    """
    eta = get_settings().DIAGNOSTIC_ETA if eta is None else eta
    if partition.weights is None or partition.epsilon is None:
        raise CouplingError("level contraction needs an eigenvector partition")
    if samples < MIN_CONTRACTION_SAMPLES:
        raise CouplingError(f"need >= {MIN_CONTRACTION_SAMPLES} samples, got {samples}")
    members = partition.levels[level]
    if not members:
        raise CouplingError(f"level L_{level} is empty")
    member_set = set(members)
    z = boundary_vertex(graph, partition, level) if source is None else source
    if z is None or z in member_set:
        raise CouplingError(f"no boundary source outside L_{level}")

    delta = max(graph.max_degree, 2)
    eps = partition.epsilon
    target = delta ** (-eps / 4)
    radius = delta ** (1 - eps / 3) / math.log(delta) ** 2
    ball = level_ball(graph, partition, z, radius, level)
    w = partition.weights
    stream = UniformStream(seed)
    ratios: list[float] = []
    skipped = escaped = 0
    for _ in range(samples):
        X = stationary_source(stream)
        Y = single_disagreement_pair(graph, X, stream, vertex=z)
        if Y is None:
            skipped += 1
            continue
        cs = CoupledState(X, Y, stream, w)
        records: list[DriftRecord] = []
        _coupled_level_round(cs, graph, members, MODE_RANDOM, records.append)
        traj = CouplingTrajectory(
            initial_disagreements=(z,),
            wD=[float(w[z])] + [rec.wD_after for rec in records],
            records=records,
        )
        attribution = track_disagreement_origins(traj, graph, [z], within=members)
        reached = attribution.by_origin.get(z, set())
        ratios.append(float(sum(w[v] for v in cs.D if v in member_set)) / float(w[z]))
        if reached - ball:
            escaped += 1
    if not ratios:
        raise CouplingError(f"source {z} is frozen in every sample")
    arr = np.asarray(ratios)
    mean = float(arr.mean())
    stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    report = LevelContractionReport(
        level=level,
        source=z,
        samples=len(arr),
        skipped=skipped,
        mean_ratio=mean,
        stderr=stderr,
        target=target,
        eta=eta,
        within_slack=mean <= target * (1 + eta),
        ball_radius=radius,
        escaped_ball=escaped,
    )
    logger.info(
        "Level %d contraction from %d: ratio %.4f vs target %.4f (η=%.2f)",
        level,
        z,
        mean,
        target,
        eta,
    )
    return report
