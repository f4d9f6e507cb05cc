"""
Experiment service layer.

Drives every command of the CLI and the HTTP API: loads the graph, calls
the domain services, runs verifications and assembles an
``ExperimentReport`` per seed.

Commands
--------
gen         canonical edge list of a generated graph
levels      spectral data, ε, level sets and their verification
sample      Glauber / set-dynamics samples (optional exact TV cross-check)
couple      coupled runs to coalescence (optional contraction estimates)
oracle      exact Ω summary: size, connectivity, diameter, mixing time
uniformity  available-colour statistics and nearly-frozen profiles
path        canonical and layered walks on Ω with their length bounds
struct      forest cover, common-neighbourhood subsets, level span

Design notes
------------
- A report is a pure function of (config, seed): each replica gets the
  seed ``replica_seed(seed, i)`` and results are aggregated in replica
  order, whatever the worker count.
- ``passed`` covers only the checks that hold by construction or by
  a proven bound at the given parameters; desk-scale comparisons (level-count
  bound, n² − n, Δ^{−ε/4} contraction ...) are reported, never enforced.
- Replicas run in a ``ProcessPoolExecutor`` when more than one worker is
  configured; tasks carry only immutable inputs.
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError
from sqlalchemy.orm import Session

from app.config import get_settings
from app.exporters.report_exporter import ReportExporter
from app.models.experiment_run import ExperimentRun
from app.parsers.coloring_parser import load_coloring
from app.parsers.edge_list_parser import load_edge_list, save_edge_list
from app.schemas.experiment import ExperimentConfig, ExperimentReport, GraphSource, ReportMeta
from app.services.coupling_service import (
    CouplingSchedule,
    contraction_estimate,
    coupling_with_stationarity_horizon,
    level_contraction_report,
    run_coupling,
)
from app.services.dynamics_service import (
    ChainState,
    Coloring,
    greedy_coloring,
    is_proper,
    round_budget,
    run_glauber,
    run_set_dynamics,
)
from app.services.graph_service import Graph, degeneracy, generate, verify_degeneracy_order
from app.services.oracle_service import (
    ExactModel,
    build_exact_model,
    build_transition_matrix,
    distribution_from_samples,
    enumerate_colorings,
    exact_diameter,
    exact_mixing_time,
    exact_sampler,
    exact_tv,
    oracle_report,
    uniform_distribution,
)
from app.services.path_service import (
    apply_moves,
    canonical_path,
    compose_paths,
    hub_coloring,
    layered_path,
    layered_schedule,
)
from app.services.sampler_service import certified_source, make_stationary_source, sample_colorings
from app.services.spectral_service import (
    EigenData,
    LevelPartition,
    choose_epsilon,
    fit_levels,
    partition_to_dict,
    power_iterate,
    trivial_partition,
    verify_partition,
)
from app.services.structure_service import (
    forest_decomposition,
    level_span,
    span_bound,
    struct_subset,
)
from app.services.uniformity_service import (
    availability_report,
    stationary_availability_check,
    nearly_frozen_profile,
    recolor_experiment,
)
from app.utils.constants import (
    CHAIN_GLAUBER,
    CHAIN_SET_DYNAMICS,
    DISCONNECTED,
    EXIT_ERROR,
    MIN_CONTRACTION_SAMPLES,
    PATH_ALL_PAIRS_LIMIT,
    PATH_EXHAUSTIVE_LIMIT,
    SPECTRAL_SANDWICH_SLACK,
    STATUS_ERROR,
    STATUS_FAILED,
    STATUS_PASSED,
)
from app.utils.errors import (
    BudgetExceededError,
    ColoringError,
    ColoringLabError,
    OracleError,
    PathConstructionError,
    SpectralError,
    StructureError,
)
from app.utils.seeding import UniformStream, replica_seed, replica_stream

logger = logging.getLogger(__name__)


@dataclass
class CommandResult:
    summary: dict[str, Any]
    rows: list[dict[str, Any]] = field(default_factory=list)
    passed: bool = True
    artifact: str | None = None


# ---------------------------------------------------------------------------
# Inputs
# ---------------------------------------------------------------------------


def load_config(path: Path | None, overrides: dict[str, Any]) -> ExperimentConfig:
    """Config file (optional) with non-``None`` overrides applied on top.

    Raises:
        ColoringLabError: Unreadable file or invalid config.
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ColoringLabError(f"cannot read config {path}: {exc}") from exc
    data.update({key: value for key, value in overrides.items() if value is not None})
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ColoringLabError(f"invalid config: {exc}") from exc


def load_graph(source: GraphSource, seed: int) -> Graph:
    if source.generator is not None:
        return generate(source.generator, list(source.params), seed)
    return load_edge_list(source.file, n=source.n)


def _require_k(cfg: ExperimentConfig) -> int:
    if cfg.k is None:
        raise ColoringLabError(f"command '{cfg.command}' needs k")
    return cfg.k


def _start_coloring(cfg: ExperimentConfig, graph: Graph, k: int) -> Coloring:
    """Configured start colouring, or the greedy colouring in reverse peeling order."""
    if cfg.start is not None:
        return load_coloring(cfg.start, k=k, n=graph.n)
    degen = degeneracy(graph)
    return greedy_coloring(graph, list(reversed(degen.order)), range(1, k + 1), k)


def _levels(graph: Graph, epsilon: float | None, seed: int) -> tuple[EigenData, LevelPartition]:
    """Eigenvector and level sets; graphs with Δ ≤ 1 and no ε get one level."""
    eigen = power_iterate(graph, seed=seed)
    if epsilon is None and graph.max_degree < 2:
        return eigen, trivial_partition(graph)
    return eigen, fit_levels(graph, eigen, epsilon)


def _workers(cfg: ExperimentConfig) -> int:
    return cfg.workers if cfg.workers is not None else get_settings().WORKERS


def fan_out(func: Callable[[Any], Any], tasks: Sequence[Any], workers: int) -> list[Any]:
    """Order-preserving map over replica tasks."""
    if workers <= 1 or len(tasks) <= 1:
        return [func(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks))


def _update_budget(n: int, max_degree: int) -> int:
    """10·n·(ln n)²·ln Δ vertex updates."""
    if n < 2 or max_degree < 2:
        return max(n, 1)
    return math.ceil(10 * n * math.log(n) ** 2 * math.log(max_degree))


def _rounds_for_updates(graph: Graph, partition: LevelPartition, updates: int) -> int:
    """Whole level cycles whose random-mode updates cover ``updates``."""
    per_cycle = sum(round_budget(len(level), graph.max_degree) for level in partition.levels if level)
    if per_cycle == 0:
        return partition.m
    return partition.m * math.ceil(updates / per_cycle)


# ---------------------------------------------------------------------------
# gen / levels
# ---------------------------------------------------------------------------


def cmd_gen(cfg: ExperimentConfig, graph: Graph, seed: int) -> CommandResult:
    degen = degeneracy(graph)
    n, edges = graph.n, graph.edge_count
    checks = {"degeneracy_order_ok": verify_degeneracy_order(graph, degen)}
    if cfg.graph.generator == "tri" and n >= 3:
        checks["triangulation_edges_ok"] = edges == 3 * n - 6
    summary = {
        "generator": cfg.graph.generator,
        "params": list(cfg.graph.params),
        "n": n,
        "edges": edges,
        "max_degree": graph.max_degree,
        "degeneracy": degen.d,
        "certified_planar": graph.is_certified_planar,
        **checks,
    }
    return CommandResult(summary=summary, passed=all(checks.values()), artifact=save_edge_list(graph))


def cmd_levels(cfg: ExperimentConfig, graph: Graph, seed: int) -> CommandResult:
    eigen, partition = _levels(graph, cfg.epsilon, seed)
    verification = verify_partition(partition, graph, eigen)
    d = degeneracy(graph).d
    delta = graph.max_degree
    slack = 1 + SPECTRAL_SANDWICH_SLACK
    checks = {
        "degeneracy_below_rho": d <= eigen.rho_hat * slack,
        "rho_below_delta": eigen.rho_hat <= delta * slack,
    }
    if graph.is_certified_planar:
        checks["planar_rho_bound"] = eigen.rho_hat <= 2 * math.sqrt(6 * delta) * slack
    summary = {
        "n": graph.n,
        "edges": graph.edge_count,
        "max_degree": delta,
        "degeneracy": d,
        "rho_hat": eigen.rho_hat,
        "rho_tilde": eigen.rho_tilde,
        "iterations": eigen.iterations,
        "residual": eigen.residual,
        "epsilon": partition.epsilon,
        "epsilon_max": (
            choose_epsilon(graph, eigen) if cfg.epsilon is None and delta >= 2 else cfg.epsilon
        ),
        "m": partition.m,
        "level_sizes": [len(level) for level in partition.levels],
        "verification": verification.as_dict(),
        "partition": partition_to_dict(partition),
        **checks,
    }
    rows = [
        {
            "vertex": v,
            "degree": graph.degree(v),
            "level": partition.level_of[v],
            "weight": float(eigen.w[v]),
        }
        for v in range(graph.n)
    ]
    return CommandResult(
        summary=summary, rows=rows, passed=verification.passed and all(checks.values())
    )


# ---------------------------------------------------------------------------
# sample
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _SampleTask:
    graph: Graph
    start: Coloring
    chain: str
    partition: LevelPartition | None
    mode: str
    burn_in: int
    thinning: int
    samples: int
    seed: int


def _sample_replica(task: _SampleTask) -> list[tuple[int, ...]]:
    state = ChainState(task.start, UniformStream(task.seed))

    def advance(amount: int) -> None:
        if task.chain == CHAIN_GLAUBER:
            run_glauber(state, task.graph, amount)
        else:
            run_set_dynamics(state, task.graph, task.partition, amount, task.mode)

    advance(task.burn_in)
    draws: list[tuple[int, ...]] = []
    for _ in range(task.samples):
        advance(task.thinning)
        draws.append(tuple(state.colors))
    return draws


def cmd_sample(cfg: ExperimentConfig, graph: Graph, seed: int) -> CommandResult:
    k = _require_k(cfg)
    n = graph.n
    start = _start_coloring(cfg, graph, k)
    partition: LevelPartition | None = None
    if cfg.chain == CHAIN_SET_DYNAMICS:
        _, partition = _levels(graph, cfg.epsilon, seed)

    model: ExactModel | None = None
    mixing: int | str | None = None
    if cfg.oracle_crosscheck:
        model = build_exact_model(graph, k)
        try:
            mixing = exact_mixing_time(model)
        except OracleError as exc:
            logger.warning("No exact burn-in available: %s", exc)

    if cfg.chain == CHAIN_GLAUBER:
        if cfg.steps is not None:
            burn_in = cfg.steps
        elif isinstance(mixing, int):
            # d(l·t_mix) ≤ 2^-l
            burn_in = mixing * math.ceil(math.log2(1 / cfg.tv_tolerance))
        else:
            burn_in = math.ceil(get_settings().BURN_IN_FACTOR * n * math.log(n)) if n > 1 else 1
        thinning = max(1, n)
    else:
        burn_in = (
            cfg.rounds
            if cfg.rounds is not None
            else _rounds_for_updates(graph, partition, _update_budget(n, graph.max_degree))
        )
        thinning = partition.m

    tasks = [
        _SampleTask(
            graph=graph,
            start=start,
            chain=cfg.chain,
            partition=partition,
            mode=cfg.mode,
            burn_in=burn_in,
            thinning=thinning,
            samples=cfg.samples,
            seed=replica_seed(seed, i),
        )
        for i in range(cfg.replicas)
    ]
    results = fan_out(_sample_replica, tasks, _workers(cfg))
    colorings = [Coloring(draw, k) for draws in results for draw in draws]
    all_proper = all(is_proper(graph, c) for c in colorings)
    availability = availability_report(graph, colorings, partition)

    summary: dict[str, Any] = {
        "n": n,
        "k": k,
        "chain": cfg.chain,
        "replicas": cfg.replicas,
        "samples_per_replica": cfg.samples,
        "burn_in": burn_in,
        "thinning": thinning,
        "levels": None if partition is None else partition.m,
        "all_proper": all_proper,
        "availability": availability.as_dict(),
    }
    passed = all_proper and availability.degree_floor_ok
    if model is not None:
        tv = (
            exact_tv(distribution_from_samples(model, colorings), uniform_distribution(model))
            if model.size
            else 1.0
        )
        summary.update(
            omega_size=model.size,
            exact_mixing_time=mixing,
            tv_to_uniform=tv,
            tv_tolerance=cfg.tv_tolerance,
            crosscheck_ok=tv <= cfg.tv_tolerance,
        )
        passed = passed and tv <= cfg.tv_tolerance

    rows = [
        {
            "replica": i,
            "replica_seed": task.seed,
            "samples": len(draws),
            "distinct": len(set(draws)),
            "last": list(draws[-1]) if draws else [],
        }
        for i, (task, draws) in enumerate(zip(tasks, results))
    ]
    return CommandResult(summary=summary, rows=rows, passed=passed)


# ---------------------------------------------------------------------------
# couple
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _CoupleTask:
    graph: Graph
    X0: Coloring
    Y0: Coloring
    schedule: CouplingSchedule
    weights: Any
    seed: int


def _couple_replica(task: _CoupleTask) -> dict[str, Any]:
    traj = run_coupling(
        task.X0,
        task.Y0,
        task.graph,
        task.schedule,
        weights=task.weights,
        seed=task.seed,
        record=False,
        stop_when_coalesced=True,
    )
    return {
        "initial_disagreements": len(traj.initial_disagreements),
        "initial_wD": traj.wD[0],
        "final_wD": traj.wD[-1],
        "coalesced_at": traj.coalesced_at,
        "updates": traj.steps,
    }


def cmd_couple(cfg: ExperimentConfig, graph: Graph, seed: int) -> CommandResult:
    k = _require_k(cfg)
    n, delta = graph.n, graph.max_degree
    partition: LevelPartition | None = None
    if cfg.chain == CHAIN_GLAUBER:
        steps = cfg.steps if cfg.steps is not None else coupling_with_stationarity_horizon(n)
        schedule = CouplingSchedule(kind=CHAIN_GLAUBER, steps=steps)
        weights = None
        horizon = steps
    else:
        _, partition = _levels(graph, cfg.epsilon, seed)
        rounds = (
            cfg.rounds
            if cfg.rounds is not None
            else _rounds_for_updates(graph, partition, _update_budget(n, delta))
        )
        schedule = CouplingSchedule(
            kind=CHAIN_SET_DYNAMICS, partition=partition, rounds=rounds, mode=cfg.mode
        )
        weights = partition.weights
        horizon = rounds

    # unset endpoints are drawn per replica from the stationary source
    fixed_start = None if cfg.start is None else load_coloring(cfg.start, k=k, n=n)
    fixed_target = None if cfg.target is None else load_coloring(cfg.target, k=k, n=n)
    source = None
    if fixed_start is None or fixed_target is None:
        source = make_stationary_source(graph, k)
    stream = UniformStream(seed)
    pairs: list[tuple[Coloring, Coloring]] = []
    for _ in range(cfg.replicas):
        X0 = fixed_start if fixed_start is not None else source(stream)
        Y0 = fixed_target if fixed_target is not None else source(stream)
        pairs.append((X0, Y0))

    tasks = [
        _CoupleTask(graph, X0, Y0, schedule, weights, replica_seed(seed, i))
        for i, (X0, Y0) in enumerate(pairs)
    ]
    results = fan_out(_couple_replica, tasks, _workers(cfg))
    budget = _update_budget(n, delta)
    times = [r["coalesced_at"] for r in results if r["coalesced_at"] is not None]
    summary: dict[str, Any] = {
        "n": n,
        "k": k,
        "max_degree": delta,
        "chain": cfg.chain,
        "horizon": horizon,
        "replicas": cfg.replicas,
        "start_provenance": "fixed" if fixed_start is not None else source.provenance,
        "target_provenance": "fixed" if fixed_target is not None else source.provenance,
        "coalesced_fraction": len(times) / len(results),
        "mean_coalescence": sum(times) / len(times) if times else None,
        "update_budget": budget,
        "within_budget_fraction": sum(1 for t in times if t <= budget) / len(results),
    }
    passed = True

    if cfg.coupling:
        source = make_stationary_source(graph, k) if source is None else source
        samples = max(cfg.samples, MIN_CONTRACTION_SAMPLES)
        contraction = contraction_estimate(graph, None, k, samples, source, seed=seed)
        classical = k >= 2 * delta + 1
        summary["contraction"] = contraction.as_dict()
        summary["classical_regime"] = classical
        if classical:
            passed = contraction.contracting
        if partition is not None and cfg.level is not None:
            summary["level_contraction"] = level_contraction_report(
                graph, partition, cfg.level, k, samples, source, seed=seed
            ).as_dict()

    rows = [
        {"replica": i, "replica_seed": task.seed, **result}
        for i, (task, result) in enumerate(zip(tasks, results))
    ]
    return CommandResult(summary=summary, rows=rows, passed=passed)


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------


def cmd_oracle(cfg: ExperimentConfig, graph: Graph, seed: int) -> CommandResult:
    k = _require_k(cfg)
    report = oracle_report(graph, k)
    n = graph.n
    d = degeneracy(graph).d
    checks = {
        "stationary_ok": report["stationary_ok"],
        "omega_lower_bound_ok": report["omega_lower_bound_ok"],
        "diameter_at_least_n_ok": report["diameter_at_least_n"] is not False,
    }
    diameter = report["diameter"]
    if k >= 2 * (d + 1) and diameter != DISCONNECTED:
        if n >= 3:
            checks["diameter_within_n2_minus_n"] = int(diameter) <= n * n - n
        else:
            checks["diameter_within_n_n_plus_1"] = int(diameter) <= n * (n + 1)
    report["degeneracy"] = d
    return CommandResult(summary={**report, **checks}, passed=all(checks.values()))


# ---------------------------------------------------------------------------
# uniformity
# ---------------------------------------------------------------------------


def cmd_uniformity(cfg: ExperimentConfig, graph: Graph, seed: int) -> CommandResult:
    k = _require_k(cfg)
    partition: LevelPartition | None = None
    if cfg.chain == CHAIN_SET_DYNAMICS or cfg.epsilon is None:
        _, partition = _levels(graph, cfg.epsilon, seed)
    epsilon = cfg.epsilon if cfg.epsilon is not None else partition.epsilon
    if epsilon is None:
        raise ColoringLabError("uniformity checks need ε (pass --epsilon)")

    source = certified_source(graph, k)
    check = stationary_availability_check(graph, k, cfg.samples, epsilon, seed=seed, source=source)
    colorings, provenance = sample_colorings(graph, k, cfg.samples, replica_seed(seed, 1), source)
    availability = availability_report(graph, colorings, partition)
    summary: dict[str, Any] = {
        "n": graph.n,
        "k": k,
        "epsilon": epsilon,
        "provenance": provenance,
        "availability_event": check,
        "availability": availability.as_dict(),
    }
    passed = availability.degree_floor_ok

    if cfg.chain == CHAIN_SET_DYNAMICS and partition.epsilon is not None:
        rounds = cfg.rounds if cfg.rounds is not None else 4 * partition.m
        profile = nearly_frozen_profile(graph, k, partition, rounds, seed=replica_seed(seed, 3))
        profile.pop("per_vertex")
        summary["nearly_frozen_profile"] = profile

    if cfg.oracle_crosscheck:
        model = enumerate_colorings(graph, k)
        if model.size == 0:
            raise ColoringError(f"no proper {k}-colouring exists")
        stream = replica_stream(seed, 2)
        if partition is not None and cfg.level is not None and cfg.level < partition.m:
            order = list(partition.levels[cfg.level])
        else:
            order = list(range(graph.n))
        outputs = [
            recolor_experiment(graph, exact_sampler(model, stream), order, stream)[0]
            for _ in range(cfg.samples)
        ]
        tv = exact_tv(distribution_from_samples(model, outputs), uniform_distribution(model))
        summary["recolor_tv"] = tv
        summary["recolor_ok"] = tv <= cfg.tv_tolerance
        passed = passed and tv <= cfg.tv_tolerance

    rows = [
        {"available": a, "count": count}
        for a, count in enumerate(availability.histogram)
        if a >= 1
    ]
    return CommandResult(summary=summary, rows=rows, passed=passed)


# ---------------------------------------------------------------------------
# path
# ---------------------------------------------------------------------------


def _walk_pairs(
    cfg: ExperimentConfig, graph: Graph, k: int, seed: int, model: ExactModel | None
) -> list[tuple[Coloring, Coloring]]:
    if cfg.start is not None and cfg.target is not None:
        return [
            (load_coloring(cfg.start, k=k, n=graph.n), load_coloring(cfg.target, k=k, n=graph.n))
        ]
    if model is not None and model.size <= PATH_ALL_PAIRS_LIMIT:
        return [
            (model.coloring(i), model.coloring(j))
            for i in range(model.size)
            for j in range(i + 1, model.size)
        ]
    stream = UniformStream(seed)
    if model is not None:
        draw = lambda: exact_sampler(model, stream)  # noqa: E731
    else:
        source = make_stationary_source(graph, k)
        draw = lambda: source(stream)  # noqa: E731
    return [(draw(), draw()) for _ in range(cfg.pairs)]


def cmd_path(cfg: ExperimentConfig, graph: Graph, seed: int) -> CommandResult:
    k = _require_k(cfg)
    degen = degeneracy(graph)
    n, d = graph.n, degen.d
    if k < 2 * (d + 1):
        raise PathConstructionError(f"path experiments need k >= 2(d+1) = {2 * (d + 1)}, got {k}")

    model: ExactModel | None
    try:
        model = enumerate_colorings(graph, k, PATH_EXHAUSTIVE_LIMIT)
    except BudgetExceededError:
        model = None
        logger.info("|Ω| above %d; sampling walk pairs", PATH_EXHAUSTIVE_LIMIT)

    hub = hub_coloring(graph, k, degen)
    canonical_bound = n * (n + 1) // 2
    summary: dict[str, Any] = {"n": n, "k": k, "degeneracy": d, "omega_size": None}
    checks: dict[str, bool] = {}

    if model is not None:
        lengths = []
        for i in range(model.size):
            start = model.coloring(i)
            moves = canonical_path(graph, start, hub, degen)
            if apply_moves(graph, start, moves).colors != hub.colors:
                raise PathConstructionError(f"canonical walk from state {i} missed the target")
            lengths.append(len(moves))
        top = sorted(lengths, reverse=True)[:2]
        summary.update(
            omega_size=model.size,
            exhaustive=True,
            max_canonical=top[0] if top else 0,
            composed_upper=sum(top),
        )
        checks["canonical_within_bound"] = (top[0] if top else 0) <= canonical_bound
        if model.size <= get_settings().ORACLE_DENSE_LIMIT:
            diameter = exact_diameter(build_transition_matrix(model, graph))
            summary["diameter"] = diameter
            if diameter != DISCONNECTED:
                if n >= 3:
                    checks["diameter_within_n2_minus_n"] = int(diameter) <= n * n - n
    else:
        summary["exhaustive"] = False

    schedule = layered_schedule(graph, k, degen)
    rows: list[dict[str, Any]] = []
    composed_max = layered_max = 0
    for a, b in _walk_pairs(cfg, graph, k, seed, model):
        composed = compose_paths(graph, a, b, degen)
        layered = layered_path(graph, a, b, k)
        reached = (
            apply_moves(graph, a, composed).colors == b.colors
            and apply_moves(graph, a, layered).colors == b.colors
        )
        if not reached:
            checks["walks_reach_target"] = False
        composed_max = max(composed_max, len(composed))
        layered_max = max(layered_max, len(layered))
        rows.append(
            {"start": a.to_list(), "target": b.to_list(), "composed": len(composed), "layered": len(layered)}
        )
    checks.setdefault("walks_reach_target", True)
    if n >= 3:
        checks["composed_within_n2_minus_n"] = composed_max <= n * n - n
    else:
        checks["composed_within_n_n_plus_1"] = composed_max <= n * (n + 1)
    checks["layered_within_walk_bound"] = layered_max <= 2 * schedule.walk_bound

    diameter_cap = schedule.diameter_bound(n)
    summary.update(
        pairs_checked=len(rows),
        max_composed=composed_max,
        layers=schedule.ell,
        layer_sizes=[len(s) for s in schedule.sets],
        walk_bound=schedule.walk_bound,
        max_layered=layered_max,
        diameter_bound=diameter_cap,
        layered_within_diameter_bound=None if diameter_cap is None else layered_max <= diameter_cap,
        **checks,
    )
    return CommandResult(summary=summary, rows=rows, passed=all(checks.values()))


# ---------------------------------------------------------------------------
# struct
# ---------------------------------------------------------------------------


def cmd_struct(cfg: ExperimentConfig, graph: Graph, seed: int) -> CommandResult:
    degen = degeneracy(graph)
    cover = forest_decomposition(graph, degen)
    partition_ok = set(cover.assignment) == set(graph.edges)
    stream = UniformStream(seed)
    rows: list[dict[str, Any]] = []
    failures = 0
    for trial in range(cfg.pairs):
        U = [v for v in range(graph.n) if stream.uniform() < 0.5]
        try:
            result = struct_subset(graph, U, cover)
        except StructureError as exc:
            failures += 1
            rows.append({"trial": trial, "size": len(U), "error": str(exc), "witness": exc.witness})
            continue
        rows.append(
            {
                "trial": trial,
                "size": len(U),
                "subset": len(result.subset),
                "size_bound": result.size_bound,
                "ratio": result.ratio,
                "repaired": result.repaired,
            }
        )

    summary: dict[str, Any] = {
        "n": graph.n,
        "edges": graph.edge_count,
        "degeneracy": degen.d,
        "forests": cover.f,
        "forests_within_d_plus_1": cover.f <= degen.d + 1,
        "edge_partition_ok": partition_ok,
        "subset_trials": cfg.pairs,
        "subset_failures": failures,
    }
    try:
        _, partition = _levels(graph, cfg.epsilon, seed)
    except SpectralError as exc:
        logger.info("Level span skipped: %s", exc)
    else:
        span = level_span(graph, partition)
        summary["level_span"] = span
        if partition.epsilon is not None:
            summary["span_bound"] = span_bound(partition.epsilon)
            summary["span_within_bound"] = span <= span_bound(partition.epsilon)
    return CommandResult(summary=summary, rows=rows, passed=partition_ok and failures == 0)


_COMMANDS: dict[str, Callable[[ExperimentConfig, Graph, int], CommandResult]] = {
    "gen": cmd_gen,
    "levels": cmd_levels,
    "sample": cmd_sample,
    "couple": cmd_couple,
    "oracle": cmd_oracle,
    "uniformity": cmd_uniformity,
    "path": cmd_path,
    "struct": cmd_struct,
}


# ---------------------------------------------------------------------------
# Running, exporting and recording
# ---------------------------------------------------------------------------


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serialisable")


def _plain(data: Any) -> Any:
    """JSON-native copy of a summary (numpy scalars and arrays unwrapped)."""
    return json.loads(json.dumps(data, default=_json_default))


def run_experiment(cfg: ExperimentConfig) -> list[tuple[ExperimentReport, str | None]]:
    """One report (plus optional text artifact) per configured seed.

    Raises:
        ColoringLabError: Any domain error; the caller maps it to exit code 2.
    """
    config_hash = cfg.config_hash()
    handler = _COMMANDS[cfg.command]
    out: list[tuple[ExperimentReport, str | None]] = []
    for seed in cfg.seeds:
        graph = load_graph(cfg.graph, seed)
        logger.info("Running %s (seed=%d, n=%d, hash=%s)", cfg.command, seed, graph.n, config_hash[:12])
        result = handler(cfg, graph, seed)
        report = ExperimentReport(
            meta=ReportMeta(command=cfg.command, config_hash=config_hash, seed=seed),
            passed=result.passed,
            summary=_plain(result.summary),
            rows=_plain(result.rows),
        )
        if not result.passed:
            logger.warning("%s (seed=%d): verification failed", cfg.command, seed)
        out.append((report, result.artifact))
    return out


def output_path(out: Path, seed: int, many: bool) -> Path:
    """``out`` itself, or ``<stem>_seed<seed><suffix>`` when several seeds share it."""
    return out.with_name(f"{out.stem}_seed{seed}{out.suffix}") if many else out


def render_report(report: ExperimentReport, fmt: str) -> bytes:
    return ReportExporter(report.export_payload()).render(fmt)


def record_report(db: Session, report: ExperimentReport) -> ExperimentRun:
    run = ExperimentRun(
        command=report.meta.command,
        config_hash=report.meta.config_hash,
        seed=report.meta.seed,
        status=STATUS_PASSED if report.passed else STATUS_FAILED,
        exit_code=report.exit_code,
        summary_json=json.dumps(report.summary, sort_keys=True, default=str),
    )
    db.add(run)
    db.commit()
    db.refresh(run)
    return run


def record_error(db: Session, cfg: ExperimentConfig, message: str) -> ExperimentRun:
    run = ExperimentRun(
        command=cfg.command,
        config_hash=cfg.config_hash(),
        seed=cfg.seeds[0],
        status=STATUS_ERROR,
        exit_code=EXIT_ERROR,
        summary_json=json.dumps({"error": message}),
    )
    db.add(run)
    db.commit()
    db.refresh(run)
    return run
