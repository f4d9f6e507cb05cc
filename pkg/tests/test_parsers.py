from __future__ import annotations

import pytest

from app.parsers.coloring_parser import ColoringParser, dump_coloring, load_coloring
from app.parsers.edge_list_parser import EdgeListParser, load_edge_list, save_edge_list
from app.services.dynamics_service import Coloring
from app.utils.errors import GraphFormatError


# ---------------------------------------------------------------------------
# Edge lists
# ---------------------------------------------------------------------------


def test_load_edge_list_infers_vertex_count() -> None:
    graph = load_edge_list("0 1\n1 2\n")
    assert graph.n == 3
    assert graph.edges == frozenset({(0, 1), (1, 2)})


def test_vertices_header_adds_isolated_vertices() -> None:
    graph = load_edge_list("# vertices: 5\n0 1\n")
    assert graph.n == 5
    assert graph.degree(4) == 0


def test_comments_and_blank_lines_are_skipped() -> None:
    graph = load_edge_list("# a comment\n\n2 0\n")
    assert graph.edges == frozenset({(0, 2)})


def test_self_loop_reports_line_number() -> None:
    with pytest.raises(GraphFormatError) as info:
        load_edge_list("0 1\n1 1\n")
    assert info.value.line_number == 2
    assert "self-loop" in str(info.value)


def test_malformed_line_reports_line_number() -> None:
    with pytest.raises(GraphFormatError) as info:
        load_edge_list("0 1\n1 x\n2 3\n")
    assert info.value.line_number == 2


def test_out_of_range_with_explicit_n() -> None:
    with pytest.raises(GraphFormatError, match="out of range"):
        load_edge_list("0 1\n1 2\n", n=2)


def test_duplicate_edge_is_a_warning() -> None:
    parser = EdgeListParser("0 1\n1 0\n")
    result = parser.parse()
    assert result.ok
    assert len(result.warnings) == 1
    assert parser.to_graph().edge_count == 1


def test_save_edge_list_is_canonical(grid33) -> None:
    text = save_edge_list(grid33)
    assert text.startswith("# vertices: 9\n0 1\n0 3\n")
    assert load_edge_list(text).edges == grid33.edges


def test_load_edge_list_from_path(tmp_path) -> None:
    target = tmp_path / "g.txt"
    target.write_text("0 1\n")
    assert load_edge_list(target).n == 2


def test_invalid_utf8_is_a_format_error(tmp_path) -> None:
    raw = b"0 1\n\xff\xfe 2\n"
    with pytest.raises(GraphFormatError, match="not valid UTF-8"):
        load_edge_list(raw)
    target = tmp_path / "bad.txt"
    target.write_bytes(raw)
    with pytest.raises(GraphFormatError, match="byte 4"):
        load_edge_list(target)
    with pytest.raises(GraphFormatError, match="not valid UTF-8"):
        load_coloring(b"\x80", k=3)


# ---------------------------------------------------------------------------
# Colourings
# ---------------------------------------------------------------------------


def test_load_coloring_object_form() -> None:
    coloring = load_coloring('{"k": 3, "colors": [1, 2, 3]}')
    assert coloring == Coloring((1, 2, 3), 3)


def test_load_coloring_array_needs_k() -> None:
    assert load_coloring("[1, 2]", k=2).colors == (1, 2)
    with pytest.raises(GraphFormatError, match="palette size"):
        load_coloring("[1, 2]")


@pytest.mark.parametrize(
    ("text", "message"),
    [
        ("[1, 4]", "outside 1..3"),
        ('[1, "a"]', "not an integer"),
        ("{not json", "invalid JSON"),
    ],
)
def test_load_coloring_rejects_bad_documents(text, message) -> None:
    with pytest.raises(GraphFormatError, match=message):
        load_coloring(text, k=3)


def test_load_coloring_checks_length() -> None:
    with pytest.raises(GraphFormatError, match="expected 3 colours"):
        load_coloring("[1, 2]", k=3, n=3)


def test_dump_coloring() -> None:
    text = dump_coloring(Coloring((1, 2, 3), 3))
    assert text == '{"k": 3, "colors": [1, 2, 3]}\n'
    assert ColoringParser(text).to_coloring().k == 3
