"""Edge-list document parser and writer.

Format: one ``u v`` pair per line, whitespace separated, 0-based ids.
Lines starting with ``#`` are comments; a ``# vertices: n`` comment fixes
the vertex count (otherwise ``n = max id + 1``).  ``save_edge_list`` writes
that header followed by the edges in lexicographic ``(min, max)`` order.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import IO, Any

from app.parsers.base_parser import BaseParser, ParseResult
from app.services.graph_service import Graph, build_graph

logger = logging.getLogger(__name__)

_VERTICES_KEY = "vertices"


class EdgeListParser(BaseParser):
    """Parser for the plain-text edge-list format.

    Args:
        source: Document text, path, bytes or file object.
        n: Explicit vertex count; overrides the ``# vertices`` header.
    """

    FORMAT_NAME = "EDGE_LIST"

    def __init__(self, source: str | bytes | Path | IO[Any], n: int | None = None) -> None:
        super().__init__(source)
        self.n = n
        self._parsed = False

    def parse(self) -> ParseResult:
        self._parsed = True
        seen: set[tuple[int, int]] = set()
        for number, line in self._lines():
            tokens = line.split()
            if len(tokens) != 2:
                self.result.add_error(
                    f"expected two vertex ids, found {len(tokens)} token(s)", number
                )
                continue
            u, v = self._to_int(tokens[0]), self._to_int(tokens[1])
            if u is None or v is None:
                self.result.add_error(f"non-integer vertex id in '{line}'", number)
                continue
            if u == v:
                self.result.add_error(f"self-loop at vertex {u}", number)
                continue
            if u < 0 or v < 0:
                self.result.add_error(f"negative vertex id in '{line}'", number)
                continue
            key = (min(u, v), max(u, v))
            if key in seen:
                self.result.warnings.append(f"line {number}: duplicate edge {key} collapsed")
                continue
            seen.add(key)
            self.result.records.append((key, number))

        self.result.errors.extend(self.validate_structure())
        self.result.error_lines.extend(
            [None] * (len(self.result.errors) - len(self.result.error_lines))
        )
        logger.debug("Edge list parsed: %s", self.result.summary())
        return self.result

    def validate_structure(self) -> list[str]:
        errors: list[str] = []
        header = self.result.metadata.get(_VERTICES_KEY)
        if self.n is None and header is not None:
            declared = self._to_int(header)
            if declared is None or declared < 0:
                return [f"invalid '# vertices' header value '{header}'"]
            self.n = declared
        if self.n is None:
            self.n = 1 + max((max(e) for e, _ in self.result.records), default=-1)
            return errors
        # range errors carry their own line number
        for (u, v), number in self.result.records:
            if u >= self.n or v >= self.n:
                self.result.add_error(
                    f"vertex id out of range [0, {self.n}) in edge ({u}, {v})", number
                )
        return errors

    def to_graph(self) -> Graph:
        """Parse (if needed) and build the graph, raising on the first error."""
        if not self._parsed:
            self.parse()
        self.result.raise_first_error()
        return build_graph(self.n or 0, [edge for edge, _ in self.result.records])


def load_edge_list(source: str | bytes | Path | IO[Any], n: int | None = None) -> Graph:
    """Load a graph from an edge-list document.

    Raises:
        GraphFormatError: Malformed line, self-loop or id out of range, with
            the offending line number.
    """
    parser = EdgeListParser(source, n=n)
    parser.parse()
    return parser.to_graph()


def save_edge_list(graph: Graph) -> str:
    """Canonical edge-list text for ``graph``."""
    lines = [f"# {_VERTICES_KEY}: {graph.n}"]
    lines.extend(f"{u} {v}" for u, v in sorted(graph.edges))
    return "\n".join(lines) + "\n"
