from __future__ import annotations

import json
from pathlib import Path

from app.cli import main
from app.utils.constants import EXIT_ERROR, EXIT_OK, EXIT_VERIFICATION_FAILED


def test_gen_writes_edge_list(tmp_path: Path) -> None:
    target = tmp_path / "grid.txt"
    assert main(["gen", "grid", "3", "3", "--out", str(target)]) == EXIT_OK
    assert target.read_text().startswith("# vertices: 9\n")


def test_oracle_prints_json_report(capsys) -> None:
    assert main(["oracle", "path", "3", "--k", "3"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["summary"]["omega_size"] == 12
    assert report["meta"]["command"] == "oracle"


def test_levels_from_edge_list_file(tmp_path: Path) -> None:
    graph = tmp_path / "star.txt"
    graph.write_text("".join(f"0 {i}\n" for i in range(1, 17)))
    out = tmp_path / "levels.csv"
    assert main(["levels", str(graph), "--format", "csv", "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0].startswith("config_hash,seed,vertex,")
    assert len(lines) == 18


def test_config_file_supplies_fields(tmp_path: Path, capsys) -> None:
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"graph": {"generator": "path", "params": [3]}, "k": 3}))
    assert main(["oracle", "--config", str(config), "--seed", "4"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["meta"]["seed"] == 4


def test_several_seeds_write_separate_files(tmp_path: Path) -> None:
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"graph": {"generator": "tri", "params": [12]}, "seeds": [1, 2]}))
    out = tmp_path / "tri.txt"
    assert main(["gen", "--config", str(config), "--out", str(out)]) == EXIT_OK
    assert (tmp_path / "tri_seed1.txt").is_file()
    assert (tmp_path / "tri_seed2.txt").is_file()


def test_failed_crosscheck_exits_with_one(capsys) -> None:
    argv = ["sample", "path", "3", "--k", "3", "--steps", "10", "--samples", "2", "--oracle-crosscheck"]
    assert main(argv) == EXIT_VERIFICATION_FAILED
    report = json.loads(capsys.readouterr().out)
    assert report["summary"]["crosscheck_ok"] is False


def test_domain_errors_exit_with_two(capsys) -> None:
    assert main(["levels", "complete", "5"]) == EXIT_ERROR
    assert "no spectral gap" in capsys.readouterr().err


def test_invalid_input_exits_with_two(capsys) -> None:
    assert main(["oracle", "path", "3"]) == EXIT_ERROR
    assert main(["oracle", "path", "x", "--k", "3"]) == EXIT_ERROR
    assert main(["oracle", "--k", "3"]) == EXIT_ERROR
    assert "error:" in capsys.readouterr().err
