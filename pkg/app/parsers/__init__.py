"""Text document parsers.

Public API
----------
BaseParser        Abstract base; inherit to add a new document format.
ParseResult       Dataclass returned by every ``parser.parse()`` call.

Concrete parsers (usable standalone):
    EdgeListParser    One ``u v`` edge per line, optional ``# vertices: n`` header.
    ColoringParser    JSON ``{"k": .., "colors": [..]}`` or a bare colour array.

Usage example::

    from app.parsers import load_edge_list, load_coloring

    graph = load_edge_list(Path("grid.txt"))
    start = load_coloring(Path("start.json"), n=graph.n)
"""

from .base_parser import BaseParser, ParseResult
from .coloring_parser import ColoringParser, dump_coloring, load_coloring
from .edge_list_parser import EdgeListParser, load_edge_list, save_edge_list

__all__: list[str] = [
    "BaseParser",
    "ParseResult",
    "ColoringParser",
    "EdgeListParser",
    "dump_coloring",
    "load_coloring",
    "load_edge_list",
    "save_edge_list",
]
