from pathlib import Path

from pydantic_settings import BaseSettings
from functools import lru_cache

# Repository root (works both from a checkout and from an installed copy run in place)
_REPO_ROOT = Path(__file__).resolve().parent.parent


class Settings(BaseSettings):
    # App
    APP_NAME: str = "Coloring Dynamics Lab"
    DEBUG: bool = False
    API_PREFIX: str = "/api"
    LOG_LEVEL: str = "INFO"

    # Run registry
    DATABASE_URL: str = f"sqlite:///{_REPO_ROOT / 'coloring_runs.db'}"
    RECORD_RUNS: bool = False

    # CORS: override with env var CORS_ORIGINS as a JSON array
    CORS_ORIGINS: list[str] = [
        "http://localhost:3000",
        "http://localhost:8000",
    ]

    # Graph generators
    MAX_VERTICES: int = 2_000_000  # size budget for every generator

    # Spectral
    POWER_TOLERANCE: float = 1e-8
    POWER_MAX_ITERS: int = 100_000
    INVARIANT_SLACK: float = 1e-9

    # Oracle
    ORACLE_BUDGET: int = 1_000_000
    ORACLE_DENSE_LIMIT: int = 2_000  # largest |Ω| powered as a dense matrix
    MIXING_HORIZON_LOG2: int = 20

    # Uniformity / sampling
    BURN_IN_FACTOR: float = 50.0  # burn-in = factor · n · ln n updates
    DIAGNOSTIC_ETA: float = 0.05

    # Experiment driver
    WORKERS: int = 1
    OUTPUT_DIR: Path = _REPO_ROOT / "reports"

    model_config = {"env_file": ".env", "extra": "ignore"}


@lru_cache
def get_settings() -> Settings:
    return Settings()
