"""
table_formatter.py
Render experiment reports as error tables: one row per algorithm, one column
per (ordering, statistic), in Markdown or as a rich console table.
"""
from typing import Dict, List, Optional, Tuple

from rich.console import Console
from rich.table import Table

from errors import ConfigError
from experiments import ExperimentReport, ReportRow
from streaming_moments import parse_algorithm

# the normal experiment reports relative errors, the others absolute ones
ERROR_FIELD = {
    "normal": "rel_error",
    "uniform32": "abs_error",
    "asset-or-nothing": "abs_error",
    "cash-or-nothing": "abs_error",
}


def _label(algorithm: str) -> str:
    try:
        return parse_algorithm(algorithm).label
    except ConfigError:
        return algorithm


def _format_error(value: float) -> str:
    return "0" if value == 0 else f"{value:.2E}"


def summary_rows(report: ExperimentReport) -> List[ReportRow]:
    """Aggregate rows when present, otherwise the rows of the first run."""
    if report.aggregate_rows:
        return report.aggregate_rows
    runs = sorted({r.run for r in report.run_rows})
    return [r for r in report.run_rows if runs and r.run == runs[0]]


def table_cells(report: ExperimentReport, error_field: Optional[str] = None):
    rows = summary_rows(report)
    columns: List[Tuple[str, str]] = []
    cells: Dict[str, Dict[Tuple[str, str], str]] = {}
    for row in rows:
        key = (row.ordering, row.statistic)
        if key not in columns:
            columns.append(key)
        attr = error_field or ERROR_FIELD.get(row.experiment, "abs_error")
        cells.setdefault(_label(row.algorithm), {})[key] = _format_error(getattr(row, attr))
    return columns, cells


def markdown_table(report: ExperimentReport, error_field: Optional[str] = None) -> str:
    columns, cells = table_cells(report, error_field)
    header = ["Algorithm"] + [f"{ordering} error in {statistic}" for ordering, statistic in columns]
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join(["---"] + [":---:"] * len(columns)) + "|",
    ]
    for algorithm, values in cells.items():
        lines.append("| " + " | ".join([algorithm] + [values.get(c, "") for c in columns]) + " |")
    return "\n".join(lines) + "\n"


def rich_table(report: ExperimentReport, title: str = "", error_field: Optional[str] = None) -> Table:
    columns, cells = table_cells(report, error_field)
    table = Table(title=title or None)
    table.add_column("Algorithm", style="bold")
    for ordering, statistic in columns:
        table.add_column(f"{ordering}\n{statistic}", justify="right")
    for algorithm, values in cells.items():
        table.add_row(algorithm, *(values.get(c, "") for c in columns))
    return table


def print_report(report: ExperimentReport, console: Optional[Console] = None, title: str = "") -> None:
    (console or Console()).print(rich_table(report, title))
