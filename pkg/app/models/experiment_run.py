"""Run registry model: one row per experiment executed through the API or CLI."""

import json
from typing import Any

from sqlalchemy import BigInteger, Column, DateTime, Integer, String, Text
from sqlalchemy.sql import func

from app.database import Base


class ExperimentRun(Base):
    """One row per (command, seed) run.

    Attributes:
        id: Primary key.
        command: Subcommand name, e.g. ``"levels"``.
        config_hash: sha256 of the canonical config JSON.
        seed: Experiment seed of this report.
        status: ``"PASSED"``, ``"FAILED"`` (verification) or ``"ERROR"``.
        exit_code: 0, 1 or 2, as the CLI would return.
        summary_json: JSON-serialised report summary (text, no join table).
        created_at: UTC timestamp of the run.
    """

    __tablename__ = "experiment_run"

    id = Column(Integer, primary_key=True, autoincrement=True)
    command = Column(String(20), nullable=False, index=True)
    config_hash = Column(String(64), nullable=False, index=True)
    seed = Column(BigInteger, nullable=False)
    status = Column(String(10), nullable=False)  # PASSED | FAILED | ERROR
    exit_code = Column(Integer, nullable=False)
    summary_json = Column(Text, nullable=True)
    created_at = Column(DateTime, default=func.now(), nullable=False)

    @property
    def summary(self) -> dict[str, Any] | None:
        return None if self.summary_json is None else json.loads(self.summary_json)
