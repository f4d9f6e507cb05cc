"""
Experiment report writers.

Every report has three parts: ``meta`` (command, config hash, seed),
``summary`` (scalar results and verification flags) and ``rows`` (one
table, e.g. per vertex or per replica).

Usage example::

    exporter = ReportExporter(report)
    data = exporter.render("csv")

Design notes
------------
- JSON is the whole report with sorted keys; CSV is the rows table through
  pandas with ``config_hash`` and ``seed`` as leading columns (the summary
  as key/value rows when a report has no table).  Neither carries a
  timestamp, so identical inputs give identical bytes.
- XLSX uses ``xlsxwriter`` in-memory: a title band, the meta block, the
  summary block, then the rows table with alternating shading.
- Nested summary values (lists, dicts) are written as compact JSON text in
  CSV and XLSX cells.
"""

from __future__ import annotations

import io
import json
import logging
from collections.abc import Mapping, Sequence
from typing import Any

import pandas as pd
import xlsxwriter
from xlsxwriter.workbook import Workbook
from xlsxwriter.worksheet import Worksheet

from app.utils.constants import FORMATS
from app.utils.errors import ColoringLabError

logger = logging.getLogger(__name__)

_COLOR_PRIMARY = "#3b82f6"
_COLOR_WHITE = "#FFFFFF"
_COLOR_LIGHT_GREY = "#F3F4F6"
_COLOR_SUBHEADER_BG = "#1E3A5F"
_COLOR_PASS = "#10b981"
_COLOR_FAIL = "#ef4444"

_MAX_COL_WIDTH = 60
_MIN_COL_WIDTH = 8


def _cell(value: Any) -> Any:
    """Scalar as-is; containers as compact JSON text."""
    if isinstance(value, (list, tuple, dict)):
        return json.dumps(value, sort_keys=True, separators=(",", ":"))
    return value


class ReportExporter:
    """Render one experiment report as CSV, JSON or XLSX bytes.

    Args:
        report: Mapping with ``meta``, ``summary`` and ``rows`` keys.
    """

    def __init__(self, report: Mapping[str, Any]) -> None:
        self._report = report
        self._meta: Mapping[str, Any] = report.get("meta", {})
        self._summary: Mapping[str, Any] = report.get("summary", {})
        self._rows: Sequence[Mapping[str, Any]] = report.get("rows", [])

    def render(self, fmt: str) -> bytes:
        if fmt not in FORMATS:
            raise ColoringLabError(f"unknown report format '{fmt}'; expected one of {FORMATS}")
        return {"csv": self.to_csv, "json": self.to_json, "xlsx": self.to_xlsx}[fmt]()

    # -----------------------------------------------------------------------
    # Text formats
    # -----------------------------------------------------------------------

    def to_json(self) -> bytes:
        return (json.dumps(self._report, sort_keys=True, indent=2) + "\n").encode("utf-8")

    def _table(self) -> pd.DataFrame:
        if self._rows:
            frame = pd.DataFrame([{k: _cell(v) for k, v in row.items()} for row in self._rows])
        else:
            frame = pd.DataFrame(
                {
                    "key": list(self._summary.keys()),
                    "value": [_cell(v) for v in self._summary.values()],
                }
            )
        frame.insert(0, "seed", self._meta.get("seed"))
        frame.insert(0, "config_hash", self._meta.get("config_hash"))
        return frame

    def to_csv(self) -> bytes:
        return self._table().to_csv(index=False, lineterminator="\n").encode("utf-8")

    # -----------------------------------------------------------------------
    # Workbook
    # -----------------------------------------------------------------------

    def _build_formats(self, wb: Workbook) -> dict[str, Any]:
        base = {"font_size": 9, "valign": "vcenter", "border": 1, "border_color": "#E5E7EB"}
        return {
            "title": wb.add_format({
                "bold": True,
                "font_size": 14,
                "font_color": _COLOR_WHITE,
                "bg_color": _COLOR_PRIMARY,
                "align": "center",
                "valign": "vcenter",
            }),
            "key": wb.add_format({**base, "bold": True, "bg_color": "#E5E7EB", "align": "right"}),
            "value": wb.add_format({**base, "bg_color": "#F9FAFB", "align": "left"}),
            "pass": wb.add_format({**base, "bold": True, "font_color": _COLOR_PASS}),
            "fail": wb.add_format({**base, "bold": True, "font_color": _COLOR_FAIL}),
            "col_header": wb.add_format({
                **base,
                "bold": True,
                "font_size": 10,
                "font_color": _COLOR_WHITE,
                "bg_color": _COLOR_SUBHEADER_BG,
                "align": "center",
                "text_wrap": True,
            }),
            "data": wb.add_format({**base, "bg_color": _COLOR_WHITE}),
            "data_alt": wb.add_format({**base, "bg_color": _COLOR_LIGHT_GREY}),
        }

    def _write_pairs(
        self, ws: Worksheet, row: int, pairs: Mapping[str, Any], formats: dict[str, Any]
    ) -> int:
        for key, value in pairs.items():
            ws.write(row, 0, key, formats["key"])
            if isinstance(value, bool):
                ws.write(row, 1, "PASS" if value else "FAIL", formats["pass" if value else "fail"])
            else:
                ws.write(row, 1, _cell(value), formats["value"])
            row += 1
        return row + 1

    def to_xlsx(self) -> bytes:
        buffer = io.BytesIO()
        wb = xlsxwriter.Workbook(buffer, {"in_memory": True})
        ws = wb.add_worksheet("Report")
        formats = self._build_formats(wb)

        columns = list(self._rows[0].keys()) if self._rows else []
        span = max(len(columns), 2) - 1
        ws.set_row(0, 26)
        ws.merge_range(0, 0, 0, span, f"{self._meta.get('command', 'report')} report", formats["title"])
        row = self._write_pairs(ws, 2, self._meta, formats)
        row = self._write_pairs(ws, row, self._summary, formats)

        widths = [max(len(str(c)), 12) for c in columns] or [24, 24]
        if columns:
            for ci, name in enumerate(columns):
                ws.write(row, ci, name, formats["col_header"])
            row += 1
            for ri, record in enumerate(self._rows):
                fmt = formats["data_alt"] if ri % 2 else formats["data"]
                for ci, name in enumerate(columns):
                    value = _cell(record.get(name))
                    ws.write(row, ci, value, fmt)
                    widths[ci] = min(_MAX_COL_WIDTH, max(widths[ci], len(str(value))))
                row += 1
        for ci, width in enumerate(widths):
            ws.set_column(ci, ci, max(width + 2, _MIN_COL_WIDTH))

        wb.close()
        buffer.seek(0)
        return buffer.read()
