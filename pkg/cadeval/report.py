"""Rendering of reports as JSON, CSV, Markdown and SVG text.

Every renderer is a pure function of its report, so equal inputs produce
byte-identical output.
"""

import csv
import io
import logging
from typing import Iterable, List, Sequence, Tuple

from cadeval.schemas import (
    ComplexityBreakdown,
    MetricReport,
    ReportFormatEnum,
    Table1Report,
    TrendSeries,
    WeightFit,
)
from cadeval.similarity import round_display

logger = logging.getLogger(__name__)

COMPLEXITY_FIELDS = (
    "feature",
    "surface",
    "topological",
    "topological_exact",
    "composite",
    "vertices",
    "edges",
    "faces",
    "genus",
    "volume",
    "area",
)
SIMILARITY_FIELDS = (
    "final",
    "volumetric",
    "surface",
    "dimensional",
    "pca_alignment",
    "icp_alignment",
    "hausdorff",
    "icp_rmse",
    "icp_iterations",
)

# Column order of the published evaluation table.
TABLE1_COLUMNS: Tuple[Tuple[str, str], ...] = (
    ("final", "Gen. Score"),
    ("volumetric", "Vol. Score"),
    ("surface", "Surf. Score"),
    ("dimensional", "Dim. Score"),
    ("pca_alignment", "PCA Align. Score"),
    ("icp_alignment", "ICP Align. Score"),
    ("hausdorff", "Hausdorff Dist."),
)
CONVENTION_MARK = "†"
TREND_SERIES = (
    ("volumetric", "Vol.", "#1f77b4"),
    ("surface", "Surf.", "#ff7f0e"),
    ("dimensional", "Dim.", "#2ca02c"),
    ("final", "Gen.", "#d62728"),
)


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _markdown_table(
    header: Sequence[str], rows: Iterable[Sequence[object]]
) -> List[str]:
    lines = ["| " + " | ".join(header) + " |"]
    lines.append("|" + "|".join("---" for _ in header) + "|")
    lines.extend("| " + " | ".join(str(c) for c in row) + " |" for row in rows)
    return lines


def _number(value: float) -> str:
    return repr(float(value)) if not isinstance(value, int) else str(value)


# Metric reports


def _metric_rows(report: MetricReport) -> List[Tuple[str, str, str, str]]:
    rows = []

    def add_breakdown(prefix: str, breakdown: ComplexityBreakdown) -> None:
        for name in COMPLEXITY_FIELDS:
            key = f"{prefix}.{name}"
            rows.append(
                (
                    key,
                    _number(getattr(breakdown, name)),
                    report.display.get(key, ""),
                    report.provenance.get(f"complexity.{name}", ""),
                )
            )

    add_breakdown("generated", report.generated)
    if report.truth is not None:
        add_breakdown("truth", report.truth)
    if report.similarity is not None:
        for name in SIMILARITY_FIELDS:
            key = f"similarity.{name}"
            rows.append(
                (
                    key,
                    _number(getattr(report.similarity, name)),
                    report.display.get(key, ""),
                    report.provenance.get(key, ""),
                )
            )
    return rows


def render_metric_report(report: MetricReport, fmt: ReportFormatEnum) -> str:
    if fmt == ReportFormatEnum.json:
        return report.model_dump_json(indent=2) + "\n"
    header = ("metric", "value", "display", "provenance")
    rows = _metric_rows(report)
    if fmt == ReportFormatEnum.csv:
        return _csv_text(header, rows)

    lines = ["# Model evaluation", ""]
    for item in report.inputs:
        lines.append(
            f"- `{item.path}` ({item.format.value}, sha256 `{item.sha256}`)"
        )
    lines.append("")
    lines.extend(_markdown_table(header, rows))
    if report.notes:
        lines.append("")
        lines.extend(f"> {note}" for note in report.notes)
    return "\n".join(lines) + "\n"


# Case-study table


def _table1_cells(report: Table1Report) -> List[List[str]]:
    out = []
    for row in report.rows:
        cells = [row.modality]
        for key, _ in TABLE1_COLUMNS:
            text = round_display(getattr(row.similarity, key))
            if key in ("pca_alignment", "icp_alignment") and key not in row.expected:
                text += CONVENTION_MARK
            cells.append(text)
        cells.append("ok" if not row.mismatches else "MISMATCH")
        out.append(cells)
    return out


def render_table1(report: Table1Report, fmt: ReportFormatEnum) -> str:
    if fmt == ReportFormatEnum.json:
        return report.model_dump_json(indent=2) + "\n"
    header = ["Input Type", *(title for _, title in TABLE1_COLUMNS), "Check"]
    cells = _table1_cells(report)
    if fmt == ReportFormatEnum.csv:
        return _csv_text(header, cells)

    lines = ["# Evaluation results for generated models", ""]
    lines.extend(_markdown_table(header, cells))
    lines.append("")
    lines.append(f"{CONVENTION_MARK} Convention-dependent; not checked.")
    lines.extend(f"> {note}" for note in report.notes)
    for row in report.rows:
        for mismatch in row.mismatches:
            lines.append(f"- {row.modality}: {mismatch}")
    return "\n".join(lines) + "\n"


# Trend series


def render_trend_csv(series: TrendSeries) -> str:
    fields = SIMILARITY_FIELDS
    header = ["label", *fields]
    rows = [
        [point.label, *(_number(getattr(point.similarity, f)) for f in fields)]
        for point in series.points
    ]
    return _csv_text(header, rows)


def render_trend_md(series: TrendSeries) -> str:
    keys = [key for key, _ in TABLE1_COLUMNS]
    header = ["Label", *(title for _, title in TABLE1_COLUMNS)]
    rows = [
        [point.label, *(round_display(getattr(point.similarity, k)) for k in keys)]
        for point in series.points
    ]
    lines = ["# Similarity trend", "", f"Truth: `{series.truth}`", ""]
    lines.extend(_markdown_table(header, rows))
    return "\n".join(lines) + "\n"


def render_trend(series: TrendSeries, fmt: ReportFormatEnum) -> str:
    if fmt == ReportFormatEnum.json:
        return series.model_dump_json(indent=2) + "\n"
    if fmt == ReportFormatEnum.md:
        return render_trend_md(series)
    return render_trend_csv(series)


def render_trend_svg(
    series: TrendSeries, width: int = 640, height: int = 360
) -> str:
    """Static line chart of the score series, one polyline per metric."""
    left, right, top, bottom = 60, 120, 30, 50
    plot_w = width - left - right
    plot_h = height - top - bottom
    values = [
        getattr(p.similarity, key)
        for p in series.points
        for key, _, _ in TREND_SERIES
    ]
    low = min(0.0, min(values))
    high = max(1.0, max(values))
    count = len(series.points)

    def x(i: int) -> float:
        return left + (plot_w * i / (count - 1) if count > 1 else plot_w / 2)

    def y(v: float) -> float:
        return top + plot_h * (high - v) / (high - low)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" '
        'stroke="black"/>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" '
        f'y2="{top + plot_h}" stroke="black"/>',
    ]
    for tick in (low, (low + high) / 2, high):
        out.append(
            f'<text x="{left - 8}" y="{y(tick) + 4:.2f}" font-size="11" '
            f'text-anchor="end">{tick:.2f}</text>'
        )
    for i, point in enumerate(series.points):
        out.append(
            f'<text x="{x(i):.2f}" y="{top + plot_h + 20}" font-size="11" '
            f'text-anchor="middle">{_escape(point.label)}</text>'
        )
    for n, (key, title, colour) in enumerate(TREND_SERIES):
        coords = " ".join(
            f"{x(i):.2f},{y(getattr(p.similarity, key)):.2f}"
            for i, p in enumerate(series.points)
        )
        out.append(
            f'<polyline points="{coords}" fill="none" stroke="{colour}" '
            f'stroke-width="2"/>'
        )
        legend_y = top + 16 * n
        out.append(
            f'<text x="{left + plot_w + 12}" y="{legend_y + 4}" font-size="11" '
            f'fill="{colour}">{title}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


# Weight fits

WEIGHT_NAMES = ("Vol.", "Surf.", "Dim.", "PCA Align.", "ICP Align.")


def render_weight_fit(fit: WeightFit, fmt: ReportFormatEnum) -> str:
    if fmt == ReportFormatEnum.json:
        return fit.model_dump_json(indent=2) + "\n"
    rows = [
        (f"K{n + 1}", name, _number(weight))
        for n, (name, weight) in enumerate(zip(WEIGHT_NAMES, fit.weights))
    ]
    if fmt == ReportFormatEnum.csv:
        return _csv_text(("weight", "metric", "value"), rows)

    lines = ["# Fitted similarity weights", "", f"Source: {fit.source}", ""]
    lines.extend(
        _markdown_table(
            ("Weight", "Metric", "Value"),
            [(k, name, round_display(float(v))) for k, name, v in rows],
        )
    )
    lines.append("")
    lines.extend(
        _markdown_table(
            ("Row", "Target", "Fitted"),
            [
                (n + 1, round_display(t), round_display(p))
                for n, (t, p) in enumerate(zip(fit.targets, fit.predicted))
            ],
        )
    )
    lines.append("")
    lines.append(f"Rank {fit.rank}, max residual {fit.max_residual:.2g}.")
    return "\n".join(lines) + "\n"
