"""
Command-line driver.

Usage::

    python -m app gen grid 3 3 --out grid.txt
    python -m app gen tri 50 --seed 7
    python -m app levels grid.txt --format csv --out levels.csv
    python -m app oracle path 3 --k 3
    python -m app couple grid 5 5 --k 9 --replicas 20 --workers 4

The graph is either an edge-list file or a generator spec
(``<family> <params...>``).  Every other field can come from ``--config``
(a JSON ``ExperimentConfig``); flags override it.

Exit codes: 0 all enabled verifications passed, 1 a verification failed,
2 invalid input or a domain error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any

from app.config import get_settings
from app.services import experiment_service
from app.utils.constants import (
    CHAIN_TYPES,
    COMMANDS,
    EXIT_ERROR,
    EXIT_OK,
    EXIT_VERIFICATION_FAILED,
    FORMATS,
    GENERATORS,
    ROUND_MODES,
)
from app.utils.errors import ColoringLabError

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("source", nargs="*", help="edge-list file, or <family> <params...>")
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--seed", type=int, help="experiment seed (replaces config seeds)")
    common.add_argument("--k", type=int, help="palette size")
    common.add_argument("--steps", type=int, help="Glauber updates")
    common.add_argument("--rounds", type=int, help="set-dynamics rounds")
    common.add_argument("--epsilon", type=float, help="override the spectral ε")
    common.add_argument("--out", type=Path, help="output file")
    common.add_argument("--format", choices=FORMATS, help="report format")
    common.add_argument("--workers", type=int, help="worker processes for replicas")
    common.add_argument("--replicas", type=int, help="independent replicas per seed")
    common.add_argument("--samples", type=int, help="samples per replica / trials")
    common.add_argument("--chain", choices=CHAIN_TYPES)
    common.add_argument("--mode", choices=ROUND_MODES, help="set-dynamics round mode")
    common.add_argument("--level", type=int, help="level index for per-level diagnostics")
    common.add_argument("--pairs", type=int, help="random pairs / subset trials")
    common.add_argument("--start", type=Path, help="colouring file (X0 or walk start)")
    common.add_argument("--target", type=Path, help="colouring file (Y0 or walk target)")
    common.add_argument("--vertices", type=int, help="vertex count for edge-list files")
    common.add_argument("--tv-tolerance", type=float, dest="tv_tolerance")
    common.add_argument("--uniformity", action="store_true", default=None)
    common.add_argument("--coupling", action="store_true", default=None)
    common.add_argument("--oracle-crosscheck", action="store_true", default=None, dest="oracle_crosscheck")
    common.add_argument("--record", action="store_true", default=None, help="store the run in the registry")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m app",
        description="Glauber and set dynamics experiments on proper k-colourings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_flags()
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _graph_source(tokens: list[str], vertices: int | None) -> dict[str, Any] | None:
    """Generator spec or file path from the positional tokens.

    Raises:
        ColoringLabError: Non-integer generator parameters or extra tokens
            after a file name.
    """
    if not tokens:
        return None
    head = tokens[0]
    if head in GENERATORS and not Path(head).is_file():
        try:
            params = [int(t) for t in tokens[1:]]
        except ValueError as exc:
            raise ColoringLabError(f"generator parameters must be integers: {tokens[1:]}") from exc
        return {"generator": head, "params": params}
    if len(tokens) != 1:
        raise ColoringLabError(f"expected one edge-list file, got {tokens}")
    return {"file": head, "n": vertices}


def config_from_args(args: argparse.Namespace) -> experiment_service.ExperimentConfig:
    overrides: dict[str, Any] = {
        "command": args.command,
        "graph": _graph_source(args.source, args.vertices),
        "seeds": None if args.seed is None else [args.seed],
    }
    for name in (
        "k",
        "steps",
        "rounds",
        "epsilon",
        "out",
        "format",
        "workers",
        "replicas",
        "samples",
        "chain",
        "mode",
        "level",
        "pairs",
        "start",
        "target",
        "tv_tolerance",
        "uniformity",
        "coupling",
        "oracle_crosscheck",
        "record",
    ):
        overrides[name] = getattr(args, name)
    return experiment_service.load_config(args.config, overrides)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _emit(
    cfg: experiment_service.ExperimentConfig,
    results: list[tuple[experiment_service.ExperimentReport, str | None]],
) -> None:
    many = len(results) > 1
    for report, artifact in results:
        seed = report.meta.seed
        if cfg.command == "gen":
            data = (artifact or "").encode("utf-8")
        else:
            data = experiment_service.render_report(report, cfg.format)
        out = cfg.out
        if out is None and cfg.format == "xlsx" and cfg.command != "gen":
            out = get_settings().OUTPUT_DIR / f"{cfg.command}.xlsx"
        if out is None:
            sys.stdout.write(data.decode("utf-8"))
            continue
        target = experiment_service.output_path(out, seed, many)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)
        status = "PASSED" if report.passed else "FAILED"
        print(f"{cfg.command} seed={seed} {status} -> {target}")


def _record(cfg, results=None, error: str | None = None) -> None:
    from app.database import SessionLocal, init_db

    init_db()
    db = SessionLocal()
    try:
        if error is not None:
            experiment_service.record_error(db, cfg, error)
        for report, _ in results or []:
            experiment_service.record_report(db, report)
    finally:
        db.close()


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    settings = get_settings()
    logging.basicConfig(
        level=settings.LOG_LEVEL,
        format="%(asctime)s %(levelname)s [%(name)s] %(message)s",
        stream=sys.stderr,
    )
    args = build_parser().parse_args(argv)
    cfg = None
    try:
        cfg = config_from_args(args)
        results = experiment_service.run_experiment(cfg)
    except (ColoringLabError, OSError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        print(f"error: {exc}", file=sys.stderr)
        if cfg is not None and (cfg.record or settings.RECORD_RUNS):
            _record(cfg, error=str(exc))
        return EXIT_ERROR

    _emit(cfg, results)
    if cfg.record or settings.RECORD_RUNS:
        _record(cfg, results)
    return EXIT_OK if all(report.passed for report, _ in results) else EXIT_VERIFICATION_FAILED


if __name__ == "__main__":
    sys.exit(main())
