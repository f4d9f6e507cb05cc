"""SQLAlchemy models package for the Coloring Dynamics Lab.

Importing all models here ensures that SQLAlchemy's mapper registry is
populated before ``Base.metadata.create_all()`` or Alembic migrations run.

Usage from other modules:
    from app.models import ExperimentRun
"""

from app.models.experiment_run import ExperimentRun  # noqa: F401

__all__ = ["ExperimentRun"]
