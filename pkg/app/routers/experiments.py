"""
Experiments router.

Mounts under ``/api/experiments`` (prefix set in ``main.py``).

Endpoints
---------
POST /{command}         Run a command from a JSON ``ExperimentConfig`` body;
                          returns one report per seed.
POST /{command}/export  Same run, streamed as a CSV, JSON or XLSX file
                          (first seed only).

Every run is stored in the run registry, including failed ones.
"""

from __future__ import annotations

import io
import logging
from typing import Annotated, Any

from fastapi import APIRouter, Body, Depends, HTTPException, Path, status
from fastapi.responses import StreamingResponse
from sqlalchemy.orm import Session

from app.database import get_db
from app.schemas.experiment import ExperimentConfig, ExperimentReport
from app.services import experiment_service
from app.utils.constants import COMMANDS
from app.utils.errors import ColoringLabError

logger = logging.getLogger(__name__)

router = APIRouter(tags=["Experiments"])

_MEDIA_TYPES = {
    "csv": "text/csv",
    "json": "application/json",
    "xlsx": "application/vnd.openxmlformats-officedocument.spreadsheetml.sheet",
}


def _config(command: str, body: dict[str, Any]) -> ExperimentConfig:
    """Validate the body with the path's command; HTTP 404/422 on failure."""
    if command not in COMMANDS:
        raise HTTPException(
            status_code=status.HTTP_404_NOT_FOUND,
            detail=f"Unknown command '{command}'. Valid commands: {', '.join(COMMANDS)}.",
        )
    try:
        return ExperimentConfig.model_validate({**body, "command": command})
    except ValueError as exc:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(exc)) from exc


def _run(cfg: ExperimentConfig, db: Session) -> list[tuple[ExperimentReport, str | None]]:
    try:
        results = experiment_service.run_experiment(cfg)
    except ColoringLabError as exc:
        logger.warning("Experiment %s rejected: %s", cfg.command, exc)
        experiment_service.record_error(db, cfg, str(exc))
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(exc)) from exc
    for report, _ in results:
        experiment_service.record_report(db, report)
    return results


# ---------------------------------------------------------------------------
# POST /{command}
# ---------------------------------------------------------------------------


@router.post(
    "/{command}",
    response_model=list[ExperimentReport],
    summary="Run an experiment command",
    responses={
        400: {"description": "Domain error (bad graph, no spectral gap, budget exceeded ...)."},
        404: {"description": "Unknown command."},
        422: {"description": "Invalid config."},
    },
)
def run_command(
    command: Annotated[str, Path(description="Command name, e.g. 'levels'.")],
    body: Annotated[dict[str, Any], Body(description="ExperimentConfig without 'command'.")],
    db: Annotated[Session, Depends(get_db)],
) -> list[ExperimentReport]:
    cfg = _config(command, body)
    return [report for report, _ in _run(cfg, db)]


# ---------------------------------------------------------------------------
# POST /{command}/export
# ---------------------------------------------------------------------------


@router.post(
    "/{command}/export",
    summary="Run an experiment command and download the report",
    response_class=StreamingResponse,
)
def export_command(
    command: Annotated[str, Path(description="Command name, e.g. 'oracle'.")],
    body: Annotated[dict[str, Any], Body(description="ExperimentConfig without 'command'.")],
    db: Annotated[Session, Depends(get_db)],
) -> StreamingResponse:
    cfg = _config(command, body)
    report, artifact = _run(cfg, db)[0]
    if command == "gen":
        data, media, suffix = (artifact or "").encode("utf-8"), "text/plain", "txt"
    else:
        data, media, suffix = experiment_service.render_report(report, cfg.format), _MEDIA_TYPES[cfg.format], cfg.format
    filename = f"{command}_seed{report.meta.seed}.{suffix}"
    logger.info("Export %s: %d bytes", filename, len(data))
    return StreamingResponse(
        io.BytesIO(data),
        media_type=media,
        headers={"Content-Disposition": f'attachment; filename="{filename}"'},
    )
