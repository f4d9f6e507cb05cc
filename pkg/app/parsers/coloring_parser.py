"""Colouring document parser and writer.

Format: a JSON array of colours in ``1..k`` indexed by vertex id, or an
object ``{"k": k, "colors": [...]}``.  The palette size comes from the
object, then from the ``k`` argument.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import IO, Any

from app.parsers.base_parser import BaseParser, ParseResult
from app.services.dynamics_service import Coloring

logger = logging.getLogger(__name__)


class ColoringParser(BaseParser):
    """Parser for JSON colouring documents.

    Args:
        source: Document text, path, bytes or file object.
        k: Palette size when the document is a bare array.
        n: Expected number of vertices, checked when given.
    """

    FORMAT_NAME = "COLORING_JSON"

    def __init__(
        self,
        source: str | bytes | Path | IO[Any],
        k: int | None = None,
        n: int | None = None,
    ) -> None:
        super().__init__(source)
        self.k = k
        self.n = n

    def parse(self) -> ParseResult:
        try:
            doc = json.loads(self.text)
        except json.JSONDecodeError as exc:
            self.result.add_error(f"invalid JSON: {exc.msg}", exc.lineno)
            return self.result
        if isinstance(doc, dict):
            if "k" in doc:
                self.k = doc["k"]
            doc = doc.get("colors")
        if not isinstance(doc, list):
            self.result.add_error("expected a JSON array of colours")
            return self.result
        for v, c in enumerate(doc):
            if isinstance(c, bool) or not isinstance(c, int):
                self.result.add_error(f"vertex {v}: colour {c!r} is not an integer")
                continue
            self.result.records.append(c)
        for message in self.validate_structure():
            self.result.add_error(message)
        logger.debug("Colouring parsed: %s", self.result.summary())
        return self.result

    def validate_structure(self) -> list[str]:
        errors: list[str] = []
        if not isinstance(self.k, int) or self.k < 1:
            return [f"palette size k missing or invalid ({self.k!r})"]
        if self.n is not None and len(self.result.records) != self.n:
            errors.append(f"expected {self.n} colours, found {len(self.result.records)}")
        errors.extend(
            f"vertex {v}: colour {c} outside 1..{self.k}"
            for v, c in enumerate(self.result.records)
            if not 1 <= c <= self.k
        )
        return errors

    def to_coloring(self) -> Coloring:
        if not self.result.records and self.result.ok:
            self.parse()
        self.result.raise_first_error()
        return Coloring(tuple(self.result.records), self.k)


def load_coloring(
    source: str | bytes | Path | IO[Any],
    k: int | None = None,
    n: int | None = None,
) -> Coloring:
    """Load a colouring document.

    Raises:
        GraphFormatError: Invalid JSON, non-integer or out-of-range colours,
            or a length mismatch.
    """
    parser = ColoringParser(source, k=k, n=n)
    parser.parse()
    return parser.to_coloring()


def dump_coloring(coloring: Coloring) -> str:
    """Canonical ``{"k": k, "colors": [...]}`` document."""
    return json.dumps({"k": coloring.k, "colors": coloring.to_list()}) + "\n"
