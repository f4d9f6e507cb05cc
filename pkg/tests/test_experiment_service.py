from __future__ import annotations

import json
from pathlib import Path

import pytest

from app.schemas.experiment import ExperimentConfig
from app.services.experiment_service import (
    fan_out,
    load_config,
    output_path,
    render_report,
    run_experiment,
)
from app.utils.errors import ColoringLabError, PathConstructionError, SpectralError


def _config(command: str, generator: str, params: list[int], **extra) -> ExperimentConfig:
    return ExperimentConfig.model_validate(
        {"command": command, "graph": {"generator": generator, "params": params}, **extra}
    )


def _run_one(cfg: ExperimentConfig):
    [(report, artifact)] = run_experiment(cfg)
    return report, artifact


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def test_config_hash_ignores_output_fields() -> None:
    base = _config("oracle", "path", [3], k=3)
    other = _config("oracle", "path", [3], k=3, out="elsewhere.csv", format="csv", workers=4)
    assert base.config_hash() == other.config_hash()
    assert base.config_hash() != _config("oracle", "path", [3], k=4).config_hash()


def test_load_config_applies_overrides(tmp_path: Path) -> None:
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"command": "oracle", "graph": {"generator": "path", "params": [3]}, "k": 3}))
    cfg = load_config(path, {"k": 4, "epsilon": None})
    assert cfg.k == 4
    assert cfg.epsilon is None


def test_load_config_rejects_bad_input(tmp_path: Path) -> None:
    with pytest.raises(ColoringLabError, match="cannot read config"):
        load_config(tmp_path / "missing.json", {})
    with pytest.raises(ColoringLabError, match="invalid config"):
        load_config(None, {"command": "oracle", "graph": {"generator": "path", "params": [3]}, "k": 1})
    with pytest.raises(ColoringLabError, match="invalid config"):
        load_config(None, {"command": "oracle", "graph": {"generator": "moebius", "params": [3]}})


def test_output_path() -> None:
    assert output_path(Path("out/report.csv"), 3, many=False) == Path("out/report.csv")
    assert output_path(Path("out/report.csv"), 3, many=True) == Path("out/report_seed3.csv")


def test_fan_out_preserves_order() -> None:
    assert fan_out(abs, [-3, 2, -1], workers=1) == [3, 2, 1]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def test_gen_triangulation() -> None:
    report, artifact = _run_one(_config("gen", "tri", [50], seeds=[7]))
    assert report.passed
    assert report.summary["edges"] == 144
    assert report.summary["triangulation_edges_ok"] is True
    assert artifact.startswith("# vertices: 50\n")


def test_gen_one_report_per_seed() -> None:
    results = run_experiment(_config("gen", "tri", [20], seeds=[1, 2]))
    assert [report.meta.seed for report, _ in results] == [1, 2]
    assert results[0][1] != results[1][1]


def test_levels_on_star() -> None:
    report, _ = _run_one(_config("levels", "star", [16]))
    assert report.passed
    assert report.summary["m"] == 2
    assert report.summary["level_sizes"] == [16, 1]
    assert report.summary["epsilon"] == report.summary["epsilon_max"]
    assert report.summary["verification"]["local_density_checked"] is True
    assert len(report.rows) == 17


def test_levels_without_gap_is_an_error() -> None:
    with pytest.raises(SpectralError):
        run_experiment(_config("levels", "complete", [5]))


def test_oracle_on_path() -> None:
    report, _ = _run_one(_config("oracle", "path", [3], k=3))
    assert report.passed
    assert report.summary["omega_size"] == 12
    assert report.exit_code == 0


def test_oracle_on_frozen_triangle_still_passes() -> None:
    report, _ = _run_one(_config("oracle", "complete", [3], k=3))
    assert report.passed
    assert report.summary["identity_transition"] is True


def test_oracle_needs_k() -> None:
    with pytest.raises(ColoringLabError, match="needs k"):
        run_experiment(_config("oracle", "path", [3]))


def test_sample_is_independent_of_worker_count() -> None:
    extra = {"k": 4, "steps": 50, "samples": 5, "replicas": 2}
    serial, _ = _run_one(_config("sample", "path", [4], workers=1, **extra))
    parallel, _ = _run_one(_config("sample", "path", [4], workers=2, **extra))
    assert serial.rows == parallel.rows
    assert serial.summary == parallel.summary
    assert serial.summary["all_proper"] is True


def test_couple_on_path() -> None:
    report, _ = _run_one(_config("couple", "path", [3], k=5, replicas=3))
    assert report.passed
    assert len(report.rows) == 3
    assert 0.0 <= report.summary["coalesced_fraction"] <= 1.0


def test_couple_contraction_in_classical_regime() -> None:
    report, _ = _run_one(_config("couple", "path", [3], k=5, coupling=True, samples=50))
    assert report.summary["classical_regime"] is True
    assert report.summary["contraction"]["contracting"] is True
    assert report.passed


def test_path_on_small_path() -> None:
    report, _ = _run_one(_config("path", "path", [3], k=4))
    assert report.passed
    assert report.summary["omega_size"] == 36
    assert report.summary["pairs_checked"] == 36 * 35 // 2
    assert report.summary["max_canonical"] <= 6


def test_path_needs_enough_colours() -> None:
    with pytest.raises(PathConstructionError):
        run_experiment(_config("path", "grid", [3, 3], k=5))


def test_struct_on_grid() -> None:
    report, _ = _run_one(_config("struct", "grid", [3, 3], pairs=10))
    assert report.passed
    assert report.summary["forests_within_d_plus_1"] is True
    assert report.summary["subset_failures"] == 0
    assert len(report.rows) == 10


def test_uniformity_on_path() -> None:
    report, _ = _run_one(_config("uniformity", "path", [4], k=5, epsilon=0.5, samples=100))
    assert report.passed
    assert report.summary["provenance"] == "exact"
    assert sum(row["count"] for row in report.rows) == 4 * 100


def test_render_report_formats() -> None:
    report, _ = _run_one(_config("oracle", "path", [3], k=3))
    assert json.loads(render_report(report, "json"))["meta"]["command"] == "oracle"
    assert render_report(report, "csv").startswith(b"config_hash,seed,")
