"""
Exception hierarchy for the Coloring Dynamics Lab.

Every error raised on purpose by a service derives from ``ColoringLabError``,
itself a ``ValueError`` so that dispatch code written against ``ValueError``
keeps working.  Routers translate these into ``HTTPException`` and the CLI
into exit code 2.
"""

from __future__ import annotations

from typing import Any


class ColoringLabError(ValueError):
    """Base class for domain errors.

    Attributes:
        witness: Optional offending object (vertex, line number, ...) that a
            caller can surface in a report.
    """

    def __init__(self, message: str, witness: Any = None) -> None:
        super().__init__(message)
        self.witness = witness


class GraphFormatError(ColoringLabError):
    """Malformed edge-list or coloring document."""

    def __init__(self, message: str, line_number: int | None = None) -> None:
        prefix = f"line {line_number}: " if line_number is not None else ""
        super().__init__(prefix + message, witness=line_number)
        self.line_number = line_number


class BudgetExceededError(ColoringLabError):
    """A size budget (generator or enumeration) was exceeded."""

    def __init__(self, message: str, partial_count: int | None = None) -> None:
        super().__init__(message, witness=partial_count)
        self.partial_count = partial_count


class SpectralError(ColoringLabError):
    """No spectral gap, or power iteration failed to converge."""

    def __init__(self, message: str, residual: float | None = None) -> None:
        super().__init__(message, witness=residual)
        self.residual = residual


class LevelPartitionError(ColoringLabError):
    """A level-set invariant failed for a witness vertex."""


class ColoringError(ColoringLabError):
    """Improper coloring, colour out of range, or palette exhaustion."""


class PathConstructionError(ColoringLabError):
    """A constructive walk on Ω could not be built for the given inputs."""


class CouplingError(ColoringLabError):
    """Invalid coupling input (mismatched palettes, too few samples, ...)."""


class StructureError(ColoringLabError):
    """A structural postcondition failed for a witness vertex."""


class OracleError(ColoringLabError):
    """Exact oracle could not answer within its limits."""


class InvariantViolation(ColoringLabError):
    """An internal invariant that the preconditions guarantee was broken."""
