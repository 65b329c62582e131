import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from .aggregate import METRICS, AggregateTable, QuadrantStats, round_half_away
from .agreement import BUCKETS, AgreementSummary
from .delta import DELTA_COLUMNS, DeltaReport
from .elo import EloReport
from .records import QUADRANT_ORDER, Diagnostic
from .tagmatch import TagMatchReport

logger = logging.getLogger(__name__)

REPORT_FILE = "report.md"


def fmt(value: Optional[float]) -> str:
    if value is None:
        return "-"
    return f"{round_half_away(value):.1f}"


def fmt_signed(value: float) -> str:
    rounded = round_half_away(value)
    return f"{rounded:+.1f}" if rounded else "0.0"


def dump_json(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def markdown_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    lines = ["| " + " | ".join(headers) + " |", "|" + "|".join("---" for _ in headers) + "|"]
    lines.extend("| " + " | ".join(row) + " |" for row in rows)
    return "\n".join(lines) + "\n"


@dataclass
class ReportSection:
    """One rendered analysis: a table for Markdown and CSV plus the plot-data series behind it."""

    name: str
    title: str
    headers: List[str]
    rows: List[List[str]]
    data: Any = None
    diagnostics: List[Diagnostic] = field(default_factory=list)

    def to_markdown(self) -> str:
        text = f"## {self.title}\n\n" + markdown_table(self.headers, self.rows)
        if self.diagnostics:
            text += "\n" + "".join(f"- {diagnostic}\n" for diagnostic in self.diagnostics)
        return text

    def to_csv(self) -> str:
        frame = pd.DataFrame(self.rows, columns=self.headers)
        return frame.to_csv(index=False, lineterminator="\n")


@dataclass
class ReportBundle:
    title: str
    sections: List[ReportSection] = field(default_factory=list)

    def to_markdown(self) -> str:
        return f"# {self.title}\n\n" + "\n".join(section.to_markdown() for section in self.sections)

    def write(self, out_dir: str) -> List[str]:
        """Writes report.md plus <section>.csv and <section>.json for every section. Returns the paths written."""
        os.makedirs(out_dir, exist_ok=True)
        written: List[str] = []

        def write_text(name: str, text: str):
            path = os.path.join(out_dir, name)
            with open(path, "w", encoding="utf-8", newline="") as out_file:
                out_file.write(text)
            written.append(path)

        write_text(REPORT_FILE, self.to_markdown())
        for section in self.sections:
            write_text(f"{section.name}.csv", section.to_csv())
            if section.data is not None:
                write_text(f"{section.name}.json", dump_json(section.data))
        logger.info("Wrote %d report files to %s", len(written), out_dir)
        return written


def aggregate_section(table: AggregateTable, name: str, title: str) -> ReportSection:
    rows: List[List[str]] = []
    data: List[Dict[str, Any]] = []
    for model_id in table.models():
        for scope in table.scopes():
            if (model_id, scope) not in table.cells:
                continue
            values = [table.get(model_id, scope, metric) for metric in METRICS]
            rows.append([model_id, scope, *(fmt(value) for value in values)])
            data.append({"model_id": model_id, "scope": scope, **dict(zip(METRICS, values))})
    headers = ["Model", table.level.value.capitalize(), *(metric.upper() for metric in METRICS)]
    return ReportSection(name, title, headers, rows, data, list(table.diagnostics))


def quadrant_section(stats: QuadrantStats, name: str, title: str) -> ReportSection:
    rows: List[List[str]] = []
    data: List[Dict[str, Any]] = []
    for model_id in stats.models():
        for scope in stats.scopes():
            fractions = stats.fractions.get((model_id, scope))
            if fractions is None:
                continue
            rows.append([model_id, scope, *(fmt(fractions[label] * 100) for label in QUADRANT_ORDER)])
            data.append(
                {"model_id": model_id, "scope": scope, **{label.value: fractions[label] for label in QUADRANT_ORDER}}
            )
    headers = ["Model", stats.level.value.capitalize(), *(label.value for label in QUADRANT_ORDER)]
    return ReportSection(name, title, headers, rows, data)


def class_points_section(points: List[Dict[str, Any]]) -> ReportSection:
    rows = [
        [
            str(point["model_id"]),
            str(point["dataset_id"]),
            str(point["class"]),
            str(point["count"]),
            fmt(point["li"] * 100),
            fmt(point["cs"] * 100),
            str(point["quadrant"]),
        ]
        for point in points
    ]
    headers = ["Model", "Dataset", "Class", "Samples", "LI", "CS", "Quadrant"]
    return ReportSection("class_quadrants", "Class-level quadrant points", headers, rows, points)


def agreement_sections(summary: AgreementSummary) -> List[ReportSection]:
    bucket_rows = [
        [dataset_id, *(fmt(buckets[bucket]) for bucket in BUCKETS)] for dataset_id, buckets in summary.buckets.items()
    ]
    sections = [
        ReportSection(
            "agreement_buckets",
            "Agreement of correct predictions (low < 30% of models, high > 70%)",
            ["Dataset", *(bucket.capitalize() for bucket in BUCKETS)],
            bucket_rows,
            summary.buckets,
        )
    ]
    for quadrant, matrix in summary.matrices.items():
        rows = [[model_id, *(fmt(value) for value in matrix.row(model_id))] for model_id in matrix.models]
        sections.append(
            ReportSection(
                f"agreement_{quadrant.value}",
                f"Shared {quadrant.value} predictions ({matrix.base.value})",
                ["Model", *matrix.models],
                rows,
                {"models": matrix.models, "values": [matrix.row(model_id) for model_id in matrix.models]},
                list(matrix.diagnostics),
            )
        )
    return sections


def elo_section(report: EloReport) -> ReportSection:
    scopes = [table.dataset_id for table in report.tables] + [report.average.dataset_id]
    tables = {table.dataset_id: table for table in [*report.tables, report.average]}
    rows = [
        [model_id, *(fmt(tables[scope].ratings.get(model_id)) for scope in scopes)]
        for model_id, _ in report.average.ranking()
    ]
    rows.append(["matches", *(str(tables[scope].matches_played) for scope in scopes)])
    rows.append(["skipped", *(str(tables[scope].skipped_pairs) for scope in scopes)])
    return ReportSection("elo", "Elo ratings", ["Model", *scopes], rows, report.to_dict(), report.diagnostics)


def tagmatch_section(report: TagMatchReport) -> ReportSection:
    rows = [
        [model_id, str(counts.wrong_count), str(counts.matched_count), fmt(counts.fraction * 100)]
        for model_id, counts in sorted(report.models.items())
    ]
    return ReportSection(
        "tagmatch",
        f"Wrong predictions (by {report.wrong_by.value.upper()}) matching an image tag (CS > {report.threshold})",
        ["Model", "Wrong", "Matched", "Matched %"],
        rows,
        report.to_dict(),
        list(report.diagnostics),
    )


def delta_section(report: DeltaReport, title: str) -> ReportSection:
    rows: List[List[str]] = []
    data: List[Dict[str, Any]] = []
    for model in report.models():
        for scope in report.scopes():
            values = report.rows.get((model, scope))
            if values is None:
                continue
            rows.append([model, scope, *(fmt_signed(values[column]) for column in DELTA_COLUMNS)])
            data.append({"model": model, "scope": scope, **values})
    headers = ["Model", "Scope", *(column.upper() if column in METRICS else column for column in DELTA_COLUMNS)]
    return ReportSection("delta", title, headers, rows, data, list(report.diagnostics))
