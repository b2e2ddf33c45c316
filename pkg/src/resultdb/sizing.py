"""Result-size accounting: single-table bytes vs subdatabase bytes.

Sizes are byte lengths of the canonical CSV encoding (header line, rows
sorted ascending, UTF-8), so the redundancy-pruning claim is measurable
without an external DBMS.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .engine import execute_single_table, select_resultdb
from .errors import EngineError
from .frontend import AnalyzedQuery, QueryMode, analyze
from .values import canonical_csv


@dataclass
class SizeReport:
    single_table_rows: int
    single_table_bytes: int
    subdatabase_rows: dict[str, int]  # per alias
    subdatabase_bytes: dict[str, int]  # per alias

    @property
    def subdatabase_total_rows(self) -> int:
        return sum(self.subdatabase_rows.values())

    @property
    def subdatabase_total_bytes(self) -> int:
        return sum(self.subdatabase_bytes.values())

    @property
    def ratio(self) -> float:
        """single-table bytes per subdatabase byte (inf when the latter is 0)."""
        total = self.subdatabase_total_bytes
        return self.single_table_bytes / total if total else float("inf")

    def as_dict(self) -> dict:
        return {
            "single_table": {
                "rows": self.single_table_rows,
                "bytes": self.single_table_bytes,
            },
            "subdatabase": {
                "rows": dict(self.subdatabase_rows),
                "bytes": dict(self.subdatabase_bytes),
                "total_rows": self.subdatabase_total_rows,
                "total_bytes": self.subdatabase_total_bytes,
            },
            "ratio": self.ratio,
        }


def compare_sizes(q: AnalyzedQuery) -> SizeReport:
    """Run both executions of one RESULTDB query and measure canonical sizes.

    The single-table variant is the same query with the RESULTDB keyword
    stripped (identical select list).
    """
    if q.mode is not QueryMode.RESULT_DB:
        raise EngineError("compare_sizes requires a RESULTDB query")
    single_ast = replace(q.ast, mode=QueryMode.SINGLE_TABLE)
    single = execute_single_table(analyze(single_ast, q.db))
    sub = select_resultdb(q)

    single_bytes = len(canonical_csv(single.columns, single.rows).encode("utf-8"))
    sub_rows = {}
    sub_bytes = {}
    for alias, entry in sub.entries.items():
        sub_rows[alias] = len(entry.rows)
        text = canonical_csv(entry.attributes, entry.rows)
        sub_bytes[alias] = len(text.encode("utf-8"))
    return SizeReport(
        single_table_rows=len(single.rows),
        single_table_bytes=single_bytes,
        subdatabase_rows=sub_rows,
        subdatabase_bytes=sub_bytes,
    )


def render_report(report: SizeReport) -> str:
    """Aligned text table for the CLI."""
    rows = [("result", "rows", "bytes")]
    rows.append(
        ("single-table", str(report.single_table_rows), str(report.single_table_bytes))
    )
    for alias in report.subdatabase_rows:
        rows.append(
            (
                f"subdatabase[{alias}]",
                str(report.subdatabase_rows[alias]),
                str(report.subdatabase_bytes[alias]),
            )
        )
    rows.append(
        (
            "subdatabase total",
            str(report.subdatabase_total_rows),
            str(report.subdatabase_total_bytes),
        )
    )
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = [
        "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
        for row in rows
    ]
    lines.append(f"ratio: {report.ratio:.4f}" if report.subdatabase_total_bytes else "ratio: inf")
    return "\n".join(lines)
