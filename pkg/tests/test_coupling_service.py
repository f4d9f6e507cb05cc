from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from app.services import coupling_service
from app.services.coupling_service import (
    CoupledState,
    CouplingSchedule,
    CouplingTrajectory,
    DriftRecord,
    analytic_drift_bound,
    boundary_vertex,
    contraction_estimate,
    coupling_joint,
    coupling_with_stationarity_horizon,
    exact_one_step_drift,
    jerrum_coupled_step,
    level_contraction_report,
    mismatch_probability,
    run_coupling,
    track_disagreement_origins,
)
from app.services.dynamics_service import Coloring, available_colors, is_proper
from app.services.graph_service import build_graph, gen_grid
from app.services.oracle_service import build_exact_model, exact_tv
from app.services.sampler_service import make_stationary_source
from app.services.spectral_service import partition_from_levels
from app.utils.constants import CHAIN_SET_DYNAMICS
from app.utils.errors import ColoringError, CouplingError
from app.utils.seeding import UniformStream


# ---------------------------------------------------------------------------
# Maximal coupling
# ---------------------------------------------------------------------------


def test_equal_sets_couple_on_the_diagonal() -> None:
    joint = coupling_joint((1, 2, 3), (1, 2, 3))
    assert all(cx == cy for cx, cy, _ in joint)
    assert sum(p for *_, p in joint) == pytest.approx(1.0)


def test_joint_has_uniform_marginals() -> None:
    ax, ay = (1, 2, 4, 5), (2, 3, 5)
    joint = coupling_joint(ax, ay)
    for c in ax:
        assert sum(p for cx, _, p in joint if cx == c) == pytest.approx(1 / len(ax))
    for c in ay:
        assert sum(p for _, cy, p in joint if cy == c) == pytest.approx(1 / len(ay))
    differ = sum(p for cx, cy, p in joint if cx != cy)
    assert differ == pytest.approx(mismatch_probability(ax, ay))


def test_disjoint_residuals_are_paired() -> None:
    assert coupling_joint((1, 2), (2, 3)) == [(2, 2, 0.5), (1, 3, 0.5)]


def test_mismatch_probability_on_path(path4) -> None:
    X = Coloring((1, 2, 3, 4), 5)
    Y = Coloring((5, 2, 3, 4), 5)
    ax, ay = available_colors(path4, X, 1), available_colors(path4, Y, 1)
    assert ax == (2, 4, 5)
    assert ay == (1, 2, 4)
    assert mismatch_probability(ax, ay) == pytest.approx(1 / 3)


def test_empty_available_set_raises() -> None:
    with pytest.raises(CouplingError):
        coupling_joint((), (1,))


# ---------------------------------------------------------------------------
# Coupled runs
# ---------------------------------------------------------------------------


def test_identical_starts_coalesce_at_zero(path3) -> None:
    X = Coloring((1, 2, 1), 5)
    traj = run_coupling(X, X, path3, CouplingSchedule(steps=50), seed=1)
    assert traj.coalesced_at == 0
    assert traj.wD[0] == 0.0
    assert all(w == 0.0 for w in traj.wD)


def test_incremental_disagreements_match_full_scan(grid33) -> None:
    X = Coloring((1, 2, 1, 2, 1, 2, 1, 2, 1), 7)
    Y = Coloring((3, 4, 3, 4, 3, 4, 3, 4, 3), 7)
    cs = CoupledState(X, Y, 8, weights=[float(v + 1) for v in range(9)])
    for _ in range(300):
        jerrum_coupled_step(cs, grid33)
        cs.check_invariants()
        x, y = cs.snapshot()
        assert is_proper(grid33, x)
        assert is_proper(grid33, y)


def test_coupling_coalesces_in_the_classical_regime(path3) -> None:
    X = Coloring((1, 2, 1), 5)
    Y = Coloring((3, 4, 5), 5)
    traj = run_coupling(X, Y, path3, CouplingSchedule(steps=2000), seed=3, stop_when_coalesced=True)
    assert traj.coalesced_at is not None
    assert traj.steps == traj.coalesced_at
    assert traj.wD[-1] == 0.0


def test_run_coupling_rejects_improper_start(path3) -> None:
    X = Coloring((1, 1, 2), 3)
    with pytest.raises(ColoringError):
        run_coupling(X, X, path3, CouplingSchedule(steps=1))


def test_palette_mismatch_raises(path3) -> None:
    with pytest.raises(CouplingError, match="palette"):
        CoupledState(Coloring((1, 2, 1), 3), Coloring((1, 2, 1), 4), 0)


def test_set_dynamics_schedule_needs_partition(path3) -> None:
    X = Coloring((1, 2, 1), 4)
    Y = Coloring((3, 2, 1), 4)
    with pytest.raises(CouplingError, match="partition"):
        run_coupling(X, Y, path3, CouplingSchedule(kind=CHAIN_SET_DYNAMICS, rounds=3))


def test_set_dynamics_coupling_on_empty_graph() -> None:
    empty = build_graph(0, [])
    schedule = CouplingSchedule(
        kind=CHAIN_SET_DYNAMICS, partition=partition_from_levels(empty, [], None), rounds=3
    )
    traj = run_coupling(Coloring((), 3), Coloring((), 3), empty, schedule)
    assert traj.steps == 0
    assert traj.coalesced_at == 0


def test_set_dynamics_coupling_uses_level_weights(star4, star4_levels) -> None:
    X = Coloring((1, 2, 2, 2, 2), 9)
    Y = Coloring((1, 3, 2, 2, 2), 9)
    schedule = CouplingSchedule(kind=CHAIN_SET_DYNAMICS, partition=star4_levels, rounds=4)
    traj = run_coupling(X, Y, star4, schedule, weights=star4_levels.weights, seed=2)
    assert traj.wD[0] == pytest.approx(float(star4_levels.weights[1]))
    assert traj.steps > 0


def test_horizon() -> None:
    assert coupling_with_stationarity_horizon(0) == 0
    assert coupling_with_stationarity_horizon(10) == math.ceil(20 * math.log(20 * math.e))


def test_coupled_x_marginal_is_the_glauber_kernel(path3) -> None:
    k, n = 3, path3.n
    model = build_exact_model(path3, k)
    P = model.transition.toarray()
    states = [model.coloring(i) for i in range(model.size)]
    for y in states:
        for i, x in enumerate(states):
            row = np.zeros(model.size)
            for v in range(n):
                joint = coupling_joint(available_colors(path3, x, v), available_colors(path3, y, v))
                for cx, _, p in joint:
                    colors = list(x.colors)
                    colors[v] = cx
                    row[model.index_of(colors)] += p / n
            assert row == pytest.approx(P[i])


def test_sampled_coupled_step_matches_the_glauber_row(path3) -> None:
    model = build_exact_model(path3, 3)
    x, y = Coloring((1, 2, 1), 3), Coloring((2, 3, 2), 3)
    stream = UniformStream(11)
    counts = np.zeros(model.size)
    trials = 20_000
    for _ in range(trials):
        cs = CoupledState(x, y, stream)
        jerrum_coupled_step(cs, path3)
        counts[model.index_of(cs.X)] += 1
    row = model.transition.toarray()[model.index_of(x)]
    assert exact_tv(counts / trials, row) < 0.02


# ---------------------------------------------------------------------------
# Origins and drift
# ---------------------------------------------------------------------------


def test_origin_tracking_attributes_every_disagreement(grid33) -> None:
    X = Coloring((1, 2, 1, 2, 1, 2, 1, 2, 1), 5)
    Y = Coloring((3, 2, 1, 2, 1, 2, 1, 2, 1), 5)
    traj = run_coupling(X, Y, grid33, CouplingSchedule(steps=40), seed=6)
    attribution = track_disagreement_origins(traj, grid33)
    tracked = set().union(*attribution.by_origin.values()) | attribution.unattributed
    final_D = {0}
    for rec in traj.records:
        if rec.created:
            final_D.add(rec.vertex)
        elif rec.destroyed:
            final_D.discard(rec.vertex)
    assert set(attribution.by_origin) <= {0}
    assert tracked == final_D
    assert traj.wD[-1] == pytest.approx(len(final_D))


def test_origin_tracking_needs_records(path3) -> None:
    X = Coloring((1, 2, 1), 5)
    Y = Coloring((3, 2, 1), 5)
    traj = run_coupling(X, Y, path3, CouplingSchedule(steps=5), record=False)
    with pytest.raises(CouplingError, match="drift records"):
        track_disagreement_origins(traj, path3)


def _record(t: int, vertex: int, created: bool) -> DriftRecord:
    return DriftRecord(
        t=t, vertex=vertex, wD_before=0.0, wD_after=0.0, created=created, destroyed=not created
    )


def test_two_seed_disagreements_keep_separate_origins() -> None:
    grid = gen_grid(6, 6)
    records = [
        _record(1, 1, True),
        _record(2, 34, True),
        _record(3, 2, True),
        _record(4, 0, False),
        _record(5, 20, True),
        _record(6, 33, True),
    ]
    traj = CouplingTrajectory(initial_disagreements=(0, 35), wD=[2.0] * 7, records=records)
    attribution = track_disagreement_origins(traj, grid)
    assert attribution.by_origin == {0: {1, 2}, 35: {33, 34, 35}}
    assert attribution.unattributed == {20}
    row0 = track_disagreement_origins(traj, grid, within=range(6))
    assert row0.by_origin == {0: {1, 2}}
    only_35 = track_disagreement_origins(traj, grid, sources=[35])
    assert only_35.by_origin == {35: {33, 34, 35}}
    assert only_35.unattributed == {1, 2, 20}


def test_two_seed_run_attributes_to_the_seeds() -> None:
    grid = gen_grid(6, 6)
    base = [1 + (r + c) % 2 for r in range(6) for c in range(6)]
    X = Coloring(tuple(base), 9)
    swapped = list(base)
    swapped[0], swapped[35] = 3, 4
    Y = Coloring(tuple(swapped), 9)
    traj = run_coupling(X, Y, grid, CouplingSchedule(steps=80), seed=12)
    attribution = track_disagreement_origins(traj, grid)
    final_D = {0, 35}
    for rec in traj.records:
        if rec.created:
            final_D.add(rec.vertex)
        elif rec.destroyed:
            final_D.discard(rec.vertex)
    tracked = set().union(*attribution.by_origin.values()) | attribution.unattributed
    assert set(attribution.by_origin) <= {0, 35}
    assert tracked == final_D
    assert not attribution.unattributed


def test_exact_drift_of_single_disagreement(path3) -> None:
    X = Coloring((1, 2, 1), 5)
    Y = Coloring((3, 2, 1), 5)
    assert exact_one_step_drift(path3, X, Y) == pytest.approx(-0.25)
    assert analytic_drift_bound(path3, X, Y) == pytest.approx(-2 / 9)
    assert exact_one_step_drift(path3, X, X) == 0.0


def test_drift_is_zero_on_a_frozen_triangle(triangle) -> None:
    colourings = [Coloring(p, 3) for p in itertools.permutations((1, 2, 3))]
    for X, Y in itertools.product(colourings, repeat=2):
        assert exact_one_step_drift(triangle, X, Y) == pytest.approx(0.0)
    traj = run_coupling(colourings[0], colourings[1], triangle, CouplingSchedule(steps=60), seed=5)
    assert set(traj.wD) == {float(traj.wD[0])}
    assert traj.coalesced_at is None


def test_contraction_estimate_when_every_sample_is_frozen(triangle) -> None:
    source = make_stationary_source(triangle, 3)
    report = contraction_estimate(triangle, None, 3, 20, source, seed=1)
    assert report.frozen_samples == 20
    assert report.measured == 0
    assert report.mean == 0.0
    assert not report.contracting


def test_frozen_samples_do_not_dilute_the_mean(path3, monkeypatch) -> None:
    real = coupling_service.single_disagreement_pair
    calls = {"n": 0}

    def every_other(graph, X, stream, vertex=None):
        calls["n"] += 1
        return None if calls["n"] % 2 else real(graph, X, stream, vertex)

    monkeypatch.setattr(coupling_service, "single_disagreement_pair", every_other)
    source = make_stationary_source(path3, 5)
    report = contraction_estimate(path3, None, 5, 40, source, seed=4)
    assert report.frozen_samples == 20
    assert report.measured == 20
    assert report.mean < 0
    assert report.mean_all == pytest.approx(report.mean / 2)
    assert report.as_dict()["mean_all"] == report.mean_all


def test_contraction_estimate_in_classical_regime(path3) -> None:
    source = make_stationary_source(path3, 5)
    report = contraction_estimate(path3, None, 5, 50, source, seed=4)
    assert report.samples == 50
    assert report.frozen_samples == 0
    assert report.mean < 0
    assert report.contracting
    assert report.as_dict()["method"] == "exact"


def test_sampled_contraction_estimate_runs(path3) -> None:
    source = make_stationary_source(path3, 5)
    report = contraction_estimate(path3, None, 5, 20, source, seed=4, method="sampled")
    assert report.method == "sampled"
    assert -1.0 <= report.mean <= 1.0


def test_contraction_estimate_validates_inputs(path3) -> None:
    source = make_stationary_source(path3, 5)
    with pytest.raises(CouplingError, match="samples"):
        contraction_estimate(path3, None, 5, 3, source)
    with pytest.raises(CouplingError, match="method"):
        contraction_estimate(path3, None, 5, 20, source, method="guess")


# ---------------------------------------------------------------------------
# Per-level contraction
# ---------------------------------------------------------------------------


def test_boundary_vertex(star4, star4_levels) -> None:
    assert boundary_vertex(star4, star4_levels, 1) == 1
    assert boundary_vertex(star4, star4_levels, 0) == 0


def test_level_contraction_report(star4, star4_levels) -> None:
    source = make_stationary_source(star4, 9)
    report = level_contraction_report(star4, star4_levels, 1, 9, 20, source, seed=5)
    assert report.level == 1
    assert report.source == 1
    assert report.samples + report.skipped == 20
    assert report.mean_ratio >= 0
    assert report.target == pytest.approx(4 ** (-star4_levels.epsilon / 4))
    assert set(report.as_dict()) >= {"mean_ratio", "within_slack", "escaped_ball"}
