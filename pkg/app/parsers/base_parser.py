"""Abstract base class for the text document parsers.

Provides shared infrastructure for reading a document from a path, raw
bytes, a string or an open file object, iterating its meaningful lines,
and collecting errors and warnings before the format-specific subclasses
do their domain logic.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from collections.abc import Iterator
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any

from app.utils.errors import GraphFormatError

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Result container
# ---------------------------------------------------------------------------


@dataclass
class ParseResult:
    """Container returned by every parser after processing a document.

    Attributes:
        records: Parsed items (edge pairs, colours ...), in document order.
        errors: Fatal problems, each prefixed with its 1-based line number.
        warnings: Non-fatal oddities (duplicate edges, blank documents ...).
        metadata: Header values found in ``# key: value`` comment lines.
        format_name: Identifier of the parser that produced the result.
        error_lines: Line numbers of ``errors``, aligned by index.
    """

    records: list[Any] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)
    format_name: str = "UNKNOWN"
    error_lines: list[int | None] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        """True when no fatal errors were collected."""
        return len(self.errors) == 0

    @property
    def record_count(self) -> int:
        return len(self.records)

    def summary(self) -> str:
        """One-line human-readable summary of the parse run."""
        status = "OK" if self.ok else "ERROR"
        return (
            f"[{status}] format={self.format_name} "
            f"records={self.record_count} "
            f"errors={len(self.errors)} "
            f"warnings={len(self.warnings)}"
        )

    def add_error(self, message: str, line_number: int | None = None) -> None:
        prefix = f"line {line_number}: " if line_number is not None else ""
        self.errors.append(prefix + message)
        self.error_lines.append(line_number)

    def raise_first_error(self) -> None:
        """Raise ``GraphFormatError`` for the first collected error, if any."""
        if self.ok:
            return
        line = self.error_lines[0]
        message = self.errors[0]
        prefix = f"line {line}: "
        if line is not None and message.startswith(prefix):
            message = message[len(prefix):]
        raise GraphFormatError(message, line_number=line)


# ---------------------------------------------------------------------------
# Base parser
# ---------------------------------------------------------------------------


class BaseParser(ABC):
    """Abstract base for the text document parsers.

    Subclasses must implement:
        * ``validate_structure()``: document-level checks after line parsing.
        * ``parse()``: extract domain records.

    The constructor accepts document text (``str``), a ``Path``, raw bytes,
    or an open file object so it works both from the filesystem and from
    request bodies.

    Attributes:
        source: The original argument passed to the constructor.
        text: Decoded document text.
        result: Accumulated ``ParseResult`` (populated during ``parse()``).
    """

    FORMAT_NAME: str = "UNKNOWN"

    def __init__(self, source: str | bytes | Path | IO[Any]) -> None:
        self.source = source
        self.text: str = self._read_source(source)
        self.result: ParseResult = ParseResult(format_name=self.FORMAT_NAME)

    # ------------------------------------------------------------------
    # Internal helpers
    # ------------------------------------------------------------------

    @staticmethod
    def _read_source(source: str | bytes | Path | IO[Any]) -> str:
        """Normalise any input type to text.

        Raises:
            GraphFormatError: The bytes are not valid UTF-8.
        """
        if isinstance(source, str):
            return source
        if isinstance(source, Path):
            data = source.read_bytes()
        elif isinstance(source, bytes):
            data = source
        else:
            # File-like object (open file, request body stream)
            data = source.read()
            if not isinstance(data, bytes):
                return data
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise GraphFormatError(f"document is not valid UTF-8 (byte {exc.start})") from exc

    def _lines(self) -> Iterator[tuple[int, str]]:
        """Yield ``(line_number, stripped_line)`` for non-blank, non-comment lines.

        ``# key: value`` comments are recorded in ``result.metadata`` as a
        side effect.
        """
        for number, raw in enumerate(self.text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, value = body.split(":", 1)
                    self.result.metadata[key.strip().lower()] = value.strip()
                continue
            yield number, line

    @staticmethod
    def _to_int(token: str) -> int | None:
        """Parse an integer token, returning ``None`` when it is not one."""
        try:
            return int(token)
        except ValueError:
            return None

    # ------------------------------------------------------------------
    # Abstract interface
    # ------------------------------------------------------------------

    @abstractmethod
    def validate_structure(self) -> list[str]:
        """Document-level checks run after every line has been parsed.

        Returns:
            List of error messages.  Empty list means the document is valid.
        """

    @abstractmethod
    def parse(self) -> ParseResult:
        """Execute the full parsing pipeline and return a ``ParseResult``."""
