from __future__ import annotations

import json

import pytest

from app.exporters.report_exporter import ReportExporter
from app.utils.errors import ColoringLabError

REPORT = {
    "meta": {"command": "oracle", "config_hash": "abc123", "seed": 7},
    "passed": True,
    "summary": {"omega_size": 12, "connected": True, "frozen_vertices": [0, 2]},
    "rows": [{"vertex": 0, "available": 2}, {"vertex": 1, "available": 1}],
}


def test_json_is_sorted_and_newline_terminated() -> None:
    data = ReportExporter(REPORT).render("json")
    assert data.endswith(b"\n")
    assert json.loads(data) == REPORT
    text = data.decode("utf-8")
    assert text.index('"meta"') < text.index('"passed"') < text.index('"rows"')


def test_json_is_byte_stable() -> None:
    assert ReportExporter(REPORT).to_json() == ReportExporter(dict(reversed(REPORT.items()))).to_json()


def test_csv_leads_with_hash_and_seed() -> None:
    lines = ReportExporter(REPORT).render("csv").decode("utf-8").splitlines()
    assert lines[0] == "config_hash,seed,vertex,available"
    assert lines[1] == "abc123,7,0,2"
    assert len(lines) == 3


def test_csv_without_rows_writes_summary_pairs() -> None:
    report = {**REPORT, "rows": []}
    lines = ReportExporter(report).to_csv().decode("utf-8").splitlines()
    assert lines[0] == "config_hash,seed,key,value"
    assert lines[1] == "abc123,7,omega_size,12"
    assert lines[3] == 'abc123,7,frozen_vertices,"[0,2]"'


def test_xlsx_is_a_zip_container() -> None:
    data = ReportExporter(REPORT).render("xlsx")
    assert data[:2] == b"PK"


def test_unknown_format_raises() -> None:
    with pytest.raises(ColoringLabError, match="unknown report format"):
        ReportExporter(REPORT).render("pdf")
