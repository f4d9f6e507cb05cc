"""Desk-scale acceptance runs.

Deselected by default; run with ``pytest -m slow``.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from app.schemas.experiment import ExperimentConfig
from app.services.coupling_service import (
    CoupledState,
    contraction_estimate,
    exact_one_step_drift,
    jerrum_coupled_step,
)
from app.services.dynamics_service import Coloring
from app.services.experiment_service import run_experiment
from app.services.graph_service import (
    degeneracy,
    gen_complete,
    gen_cycle,
    gen_grid,
    gen_path,
    gen_planar_triangulation,
    gen_star,
    generate,
)
from app.services.oracle_service import (
    build_exact_model,
    distribution_from_samples,
    enumerate_colorings,
    exact_mixing_time,
    exact_sampler,
    exact_tv,
    oracle_report,
    uniform_distribution,
)
from app.services.sampler_service import GlauberSource, make_stationary_source
from app.services.spectral_service import power_iterate
from app.services.uniformity_service import recolor_experiment
from app.utils.constants import SPECTRAL_SANDWICH_SLACK
from app.utils.seeding import UniformStream

pytestmark = pytest.mark.slow

TV_TOLERANCE = 0.02


def _config(command: str, generator: str, params: list[int], **extra) -> ExperimentConfig:
    return ExperimentConfig.model_validate(
        {"command": command, "graph": {"generator": generator, "params": params}, **extra}
    )


def _burn_in(mixing: int) -> int:
    # d(l·t_mix) ≤ 2^-l
    return mixing * math.ceil(math.log2(1 / TV_TOLERANCE))


# ---------------------------------------------------------------------------
# Sampling against the exact oracle
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(("graph", "k", "omega"), [(gen_path(3), 3, 12), (gen_cycle(4), 3, 18)])
def test_glauber_samples_match_uniform(graph, k, omega) -> None:
    model = build_exact_model(graph, k)
    assert model.size == omega
    mixing = exact_mixing_time(model)
    source = GlauberSource(graph, k, burn_in=_burn_in(mixing), thinning=2 * graph.n)
    stream = UniformStream(2024)
    draws = [source(stream) for _ in range(200_000)]
    law = distribution_from_samples(model, draws)
    assert exact_tv(law, uniform_distribution(model)) <= TV_TOLERANCE


def test_glauber_law_on_small_grid_after_burn_in() -> None:
    graph = gen_grid(2, 3)
    model = build_exact_model(graph, 4)
    assert model.size == 588
    source = GlauberSource(graph, 4)
    law = np.zeros(model.size)
    law[model.index_of(source.start)] = 1.0
    P_T = model.transition.T.tocsr()
    for _ in range(_burn_in(exact_mixing_time(model))):
        law = P_T @ law
    assert exact_tv(law, uniform_distribution(model)) <= TV_TOLERANCE


def test_recolouring_preserves_uniformity() -> None:
    graph = gen_path(3)
    model = enumerate_colorings(graph, 3)
    stream = UniformStream(9)
    outputs = [
        recolor_experiment(graph, exact_sampler(model, stream), [0, 1, 2], stream)[0]
        for _ in range(100_000)
    ]
    law = distribution_from_samples(model, outputs)
    assert exact_tv(law, uniform_distribution(model)) <= TV_TOLERANCE


# ---------------------------------------------------------------------------
# Walks on Ω
# ---------------------------------------------------------------------------

SUITE = [
    ("path", [3]),
    ("path", [4]),
    ("cycle", [4]),
    ("cycle", [5]),
    ("star", [4]),
    ("tree", [2, 2]),
    ("grid", [2, 3]),
    ("complete", [3]),
]


@pytest.mark.parametrize(("family", "params"), SUITE)
def test_walks_on_small_suite(family, params) -> None:
    graph = generate(family, params)
    k = 2 * (degeneracy(graph).d + 1)
    report, _ = run_experiment(_config("path", family, params, k=k))[0]
    assert report.passed
    assert report.summary["walks_reach_target"] is True
    assert report.summary["composed_within_n2_minus_n"] is True
    assert report.summary["max_composed"] <= graph.n * graph.n - graph.n
    assert report.summary["layered_within_walk_bound"] is True
    if "diameter" in report.summary:
        assert report.summary["diameter_within_n2_minus_n"] is True


# ---------------------------------------------------------------------------
# Spectra and levels
# ---------------------------------------------------------------------------


def test_degeneracy_and_planar_spectral_sandwich() -> None:
    slack = 1 + SPECTRAL_SANDWICH_SLACK
    for n in range(10, 501, 10):
        graph = gen_planar_triangulation(n, seed=n)
        rho = power_iterate(graph, seed=n).rho_hat
        assert degeneracy(graph).d <= rho * slack
        assert rho <= 2 * math.sqrt(6 * graph.max_degree) * slack


@pytest.mark.parametrize(
    ("family", "params"),
    [("star", [16]), ("grid", [5, 5]), ("tree", [3, 3]), ("bipartite", [2, 8]), ("tri", [100])],
)
def test_level_sets_verify(family, params) -> None:
    report, _ = run_experiment(_config("levels", family, params, seeds=[1]))[0]
    verification = report.summary["verification"]
    assert verification["passed"] is True
    assert verification["local_density_checked"] is True
    assert verification["local_density_witnesses"] == []
    assert verification["neighbor_weight_witnesses"] == []


# ---------------------------------------------------------------------------
# Coupling
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(("graph", "k"), [(gen_grid(5, 5), 9), (gen_star(8), 17)])
def test_contraction_in_classical_regime(graph, k) -> None:
    assert k >= 2 * graph.max_degree + 1
    source = make_stationary_source(graph, k)
    report = contraction_estimate(graph, None, k, 10_000, source, seed=5)
    assert report.contracting


def test_sampled_drift_matches_exact_drift() -> None:
    graph = gen_star(8)
    X = Coloring((1,) + (2,) * 8, 4)
    Y = Coloring((3,) + (2,) * 8, 4)
    exact = exact_one_step_drift(graph, X, Y)
    assert exact == pytest.approx(5 / 27)
    stream = UniformStream(17)
    changes = np.empty(20_000)
    for i in range(changes.size):
        rec = jerrum_coupled_step(CoupledState(X, Y, stream), graph)
        changes[i] = rec.wD_after - rec.wD_before
    stderr = changes.std(ddof=1) / math.sqrt(changes.size)
    assert abs(changes.mean() - exact) <= 3 * stderr


@pytest.mark.parametrize(("n", "delta"), [(150, 16), (300, 32)])
def test_set_dynamics_coalesce_on_triangulations(n, delta) -> None:
    graph = generate("tri", [n, delta], seed=0)
    assert graph.max_degree == delta
    k = math.ceil(4 * delta / math.log(delta))
    cfg = _config(
        "couple", "tri", [n, delta], k=k, chain="set-dynamics", replicas=100, seeds=[0]
    )
    report, _ = run_experiment(cfg)[0]
    assert report.summary["start_provenance"] != "fixed"
    assert report.summary["target_provenance"] != "fixed"
    assert report.summary["replicas"] == 100
    assert report.summary["within_budget_fraction"] >= 0.95


# ---------------------------------------------------------------------------
# Frozen edge cases and structure
# ---------------------------------------------------------------------------


def test_frozen_edge_cases() -> None:
    triangle = oracle_report(gen_complete(3), 3)
    assert triangle["frozen_vertices"] == [0, 1, 2]
    assert triangle["identity_transition"] is True
    assert triangle["mixing_time"] == "disconnected"
    single = oracle_report(generate("path", [1]), 2)
    assert single["mixing_time"] == 1


@pytest.mark.parametrize(
    ("family", "params"),
    SUITE + [("grid", [5, 5]), ("tree", [3, 3]), ("tri", [100]), ("star", [8])],
)
def test_structure_self_checks(family, params) -> None:
    report, _ = run_experiment(_config("struct", family, params, pairs=100))[0]
    assert report.summary["edge_partition_ok"] is True
    assert report.summary["forests_within_d_plus_1"] is True
    assert report.summary["subset_failures"] == 0
