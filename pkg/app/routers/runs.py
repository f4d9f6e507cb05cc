"""
Run registry router.

Mounts under ``/api/runs`` (prefix set in ``main.py``).

Endpoints
---------
GET /       Most-recent-first list of runs, filterable by command.
GET /{id}   One run.
"""

from __future__ import annotations

from typing import Annotated

from fastapi import APIRouter, Depends, HTTPException, Query, status
from sqlalchemy.orm import Session

from app.database import get_db
from app.models.experiment_run import ExperimentRun
from app.schemas.experiment import ExperimentRunRead

router = APIRouter(tags=["Runs"])


@router.get("", response_model=list[ExperimentRunRead], summary="List recorded runs")
def list_runs(
    db: Annotated[Session, Depends(get_db)],
    command: Annotated[str | None, Query(description="Filter by command.")] = None,
    limit: Annotated[int, Query(ge=1, le=500)] = 50,
) -> list[ExperimentRun]:
    query = db.query(ExperimentRun)
    if command is not None:
        query = query.filter(ExperimentRun.command == command)
    return query.order_by(ExperimentRun.id.desc()).limit(limit).all()


@router.get("/{run_id}", response_model=ExperimentRunRead, summary="Get one run")
def get_run(
    run_id: int,
    db: Annotated[Session, Depends(get_db)],
) -> ExperimentRun:
    run = db.get(ExperimentRun, run_id)
    if run is None:
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail=f"Run {run_id} not found")
    return run
