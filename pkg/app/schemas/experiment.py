"""
Pydantic v2 schemas for experiment runs.

Covers:
- ``ExperimentConfig``: the JSON config file / request body of every command.
- ``ExperimentReport``: what every command returns and exports.
- ``ExperimentRunRead``: one row of the run registry.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.utils.constants import CHAIN_GLAUBER, COMMANDS, GENERATORS, MODE_RANDOM

# Fields that never influence the numbers in a report.
_HASH_EXCLUDE = {"out", "format", "workers", "record"}


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------


class GraphSource(BaseModel):
    """Either a generator spec or an edge-list file, never both."""

    generator: str | None = Field(
        default=None, description=f"Generator family, one of {', '.join(GENERATORS)}."
    )
    params: list[int] = Field(default_factory=list, description="Generator size parameters.")
    file: Path | None = Field(default=None, description="Edge-list file.")
    n: int | None = Field(default=None, ge=0, description="Vertex count override for files.")

    @model_validator(mode="after")
    def _one_source(self) -> GraphSource:
        if (self.generator is None) == (self.file is None):
            raise ValueError("graph source needs exactly one of 'generator' or 'file'")
        if self.generator is not None and self.generator not in GENERATORS:
            raise ValueError(f"unknown generator '{self.generator}'")
        if self.file is not None and not self.file.is_file():
            raise ValueError(f"graph file not found: {self.file}")
        return self


class ExperimentConfig(BaseModel):
    """Everything a command needs; CLI flags override individual fields.

    Attributes:
        seeds: One report per seed; replicas split each seed further.
        k: Palette size (``k ≥ 2``); required by every command except gen
            and levels.
        epsilon: Overrides the ε chosen from the spectrum.
        uniformity / coupling / oracle_crosscheck: Optional analyses that
            commands run on top of their main result.
    """

    command: str = Field(..., description=f"One of {', '.join(COMMANDS)}.")
    graph: GraphSource
    k: int | None = Field(default=None, ge=2)
    chain: Literal["glauber", "set-dynamics"] = CHAIN_GLAUBER
    mode: Literal["random", "sweep-if-independent"] = MODE_RANDOM
    steps: int | None = Field(default=None, ge=0)
    rounds: int | None = Field(default=None, ge=0)
    samples: int = Field(default=1000, ge=1)
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)
    epsilon: float | None = Field(default=None, gt=0, lt=1)
    replicas: int = Field(default=1, ge=1)
    workers: int | None = Field(default=None, ge=1)
    level: int | None = Field(default=None, ge=0)
    pairs: int = Field(default=100, ge=1, description="Random pairs when Ω is too big to sweep.")
    tv_tolerance: float = Field(default=0.02, gt=0, lt=1, description="TV bound for oracle cross-checks.")
    start: Path | None = Field(default=None, description="Colouring file for X₀ / the walk start.")
    target: Path | None = Field(default=None, description="Colouring file for Y₀ / the walk target.")
    uniformity: bool = False
    coupling: bool = False
    oracle_crosscheck: bool = False
    out: Path | None = None
    format: Literal["csv", "json", "xlsx"] = "json"
    record: bool = False

    @field_validator("command")
    @classmethod
    def _known_command(cls, value: str) -> str:
        if value not in COMMANDS:
            raise ValueError(f"unknown command '{value}'")
        return value

    @field_validator("seeds")
    @classmethod
    def _seed_range(cls, value: list[int]) -> list[int]:
        for seed in value:
            if not 0 <= seed < 2**63:
                raise ValueError(f"seed {seed} outside [0, 2^63)")
        return value

    @field_validator("start", "target")
    @classmethod
    def _file_exists(cls, value: Path | None) -> Path | None:
        if value is not None and not value.is_file():
            raise ValueError(f"colouring file not found: {value}")
        return value

    def config_hash(self) -> str:
        """sha256 over the canonical JSON of the result-determining fields."""
        payload = self.model_dump(mode="json", exclude=_HASH_EXCLUDE)
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


class ReportMeta(BaseModel):
    command: str
    config_hash: str
    seed: int


class ExperimentReport(BaseModel):
    """Result of one command for one seed."""

    meta: ReportMeta
    passed: bool = Field(..., description="All enabled verifications passed.")
    summary: dict[str, Any] = Field(default_factory=dict)
    rows: list[dict[str, Any]] = Field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def export_payload(self) -> dict[str, Any]:
        return {
            "meta": self.meta.model_dump(),
            "passed": self.passed,
            "summary": self.summary,
            "rows": self.rows,
        }


class ExperimentRunRead(BaseModel):
    """Registry row for GET /api/runs."""

    id: int
    command: str
    config_hash: str
    seed: int
    status: str
    exit_code: int
    summary: dict[str, Any] | None = None
    created_at: datetime

    model_config = ConfigDict(from_attributes=True)
