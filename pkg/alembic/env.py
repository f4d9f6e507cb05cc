"""Alembic environment for the run registry.

The URL and log level always come from ``Settings``; SQLite databases are
migrated in batch mode so column changes work without native ALTER.
"""

import logging
import sys
from pathlib import Path

from sqlalchemy import engine_from_config, pool
from alembic import context

# Repository root on sys.path so 'app' is importable from the alembic/ dir
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from app.config import get_settings  # noqa: E402
from app.database import Base  # noqa: E402
from app.models import ExperimentRun  # noqa: E402, F401

config = context.config
settings = get_settings()
database_url = settings.DATABASE_URL
config.set_main_option("sqlalchemy.url", database_url)

logging.basicConfig(
    level=settings.LOG_LEVEL,
    format="%(asctime)s %(levelname)s [%(name)s] %(message)s",
    stream=sys.stderr,
)

target_metadata = Base.metadata
render_as_batch = database_url.startswith("sqlite")


def run_migrations_offline() -> None:
    context.configure(
        url=database_url,
        target_metadata=target_metadata,
        literal_binds=True,
        dialect_opts={"paramstyle": "named"},
        render_as_batch=render_as_batch,
    )
    with context.begin_transaction():
        context.run_migrations()


def run_migrations_online() -> None:
    connectable = engine_from_config(
        config.get_section(config.config_ini_section, {}),
        prefix="sqlalchemy.",
        poolclass=pool.NullPool,
    )
    with connectable.connect() as connection:
        context.configure(
            connection=connection,
            target_metadata=target_metadata,
            render_as_batch=render_as_batch,
        )
        with context.begin_transaction():
            context.run_migrations()


if context.is_offline_mode():
    run_migrations_offline()
else:
    run_migrations_online()
