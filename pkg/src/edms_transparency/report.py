"""Static SVG charts and a single-file HTML summary for monitoring series.

Output is byte-stable: fixed canvas size, fixed palette, no timestamps of
when the report was made.
"""

from __future__ import annotations

import html
import math
import re
from pathlib import Path
from typing import Sequence

from .core import format_timestamp
from .monitor import Granularity, MetricSeries

WIDTH, HEIGHT = 720, 360
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 64, 150, 36, 48
PALETTE = ("#1f77b4", "#2ca02c", "#ff7f0e", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _num(x: float) -> str:
    text = f"{x:.2f}".rstrip("0").rstrip(".")
    return "0" if text == "-0" else text


def _tick_label(ts: int, granularity: Granularity) -> str:
    iso = format_timestamp(ts)
    if granularity is Granularity.YEARLY:
        return iso[:4]
    if granularity is Granularity.MONTHLY:
        return iso[:7]
    return iso[:10]


def _nice_max(value: float) -> float:
    if value <= 0:
        return 1.0
    magnitude = 10.0 ** math.floor(math.log10(value))
    for step in (1, 2, 2.5, 5, 10):
        if value <= step * magnitude:
            return step * magnitude
    return value


def _value_label(v: float) -> str:
    return _num(v) if abs(v) >= 0.01 or v == 0 else f"{v:.2e}"


def _legend(s: MetricSeries) -> str:
    return "all units" if s.unit is None else s.unit


def chart_title(series: Sequence[MetricSeries]) -> str:
    s = series[0]
    suffix = " (normalized)" if s.normalized else ""
    return f"{s.metric_id} - {s.granularity.value}{suffix}"


def render_line_chart(series: Sequence[MetricSeries], title: str | None = None) -> str:
    """One chart, one line per unit.  Undefined points break the line."""
    if not series:
        raise ValueError("nothing to plot")
    title = title or chart_title(series)
    series = sorted(series, key=lambda s: s.unit_label)
    starts = sorted({p.bucket_start for s in series for p in s.points})
    slot = {b: i for i, b in enumerate(starts)}
    defined = [p.value for s in series for p in s.points if p.value is not None]
    top = _nice_max(max(defined)) if defined else 1.0
    bottom = min(0.0, min(defined)) if defined else 0.0

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def x(i: int) -> float:
        return MARGIN_LEFT + (plot_w * i / (len(starts) - 1) if len(starts) > 1 else plot_w / 2)

    def y(v: float) -> float:
        return MARGIN_TOP + plot_h * (1 - (v - bottom) / (top - bottom))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<text x="{MARGIN_LEFT}" y="22" font-family="sans-serif" font-size="14" fill="#222">{html.escape(title)}</text>',
    ]
    for k in range(5):
        v = bottom + (top - bottom) * k / 4
        yy = _num(y(v))
        out.append(f'<line x1="{MARGIN_LEFT}" y1="{yy}" x2="{MARGIN_LEFT + plot_w}" y2="{yy}" stroke="#e5e5e5"/>')
        out.append(
            f'<text x="{MARGIN_LEFT - 6}" y="{yy}" font-family="sans-serif" font-size="10" fill="#555" '
            f'text-anchor="end" dominant-baseline="middle">{_value_label(v)}</text>'
        )
    axis_y = _num(MARGIN_TOP + plot_h)
    out.append(f'<line x1="{MARGIN_LEFT}" y1="{axis_y}" x2="{MARGIN_LEFT + plot_w}" y2="{axis_y}" stroke="#888"/>')
    out.append(f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{axis_y}" stroke="#888"/>')

    step = max(1, -(-len(starts) // 8))
    granularity = series[0].granularity
    for i in range(0, len(starts), step):
        out.append(
            f'<text x="{_num(x(i))}" y="{_num(MARGIN_TOP + plot_h + 16)}" font-family="sans-serif" font-size="10" '
            f'fill="#555" text-anchor="middle">{_tick_label(starts[i], granularity)}</text>'
        )

    for k, s in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        runs: list[list[tuple[float, float]]] = [[]]
        for p in sorted(s.points, key=lambda p: p.bucket_start):
            if p.value is None:
                if runs[-1]:
                    runs.append([])
                continue
            runs[-1].append((x(slot[p.bucket_start]), y(p.value)))
        for run in runs:
            if len(run) == 1:
                cx, cy = run[0]
                out.append(f'<circle cx="{_num(cx)}" cy="{_num(cy)}" r="2.5" fill="{color}"/>')
            elif run:
                pts = " ".join(f"{_num(a)},{_num(b)}" for a, b in run)
                out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.8"/>')
        ly = MARGIN_TOP + 8 + 18 * k
        lx = WIDTH - MARGIN_RIGHT + 16
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color}" stroke-width="3"/>')
        out.append(
            f'<text x="{lx + 24}" y="{ly}" font-family="sans-serif" font-size="11" fill="#222" '
            f'dominant-baseline="middle">{html.escape(_legend(s))}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text).strip("_")


def group_series(series: Sequence[MetricSeries]) -> dict[tuple, list[MetricSeries]]:
    groups: dict[tuple, list[MetricSeries]] = {}
    for s in series:
        groups.setdefault((s.metric_id, s.granularity.value, s.normalized), []).append(s)
    return dict(sorted(groups.items()))


def _table(group: Sequence[MetricSeries]) -> str:
    group = sorted(group, key=lambda s: s.unit_label)
    starts = sorted({p.bucket_start for s in group for p in s.points})
    lookup = {(s.unit_label, p.bucket_start): p.value for s in group for p in s.points}
    head = "".join(f"<th>{html.escape(_legend(s))}</th>" for s in group)
    rows = []
    for b in starts:
        cells = "".join(
            "<td>-</td>" if lookup.get((s.unit_label, b)) is None else f"<td>{_value_label(lookup[(s.unit_label, b)])}</td>"
            for s in group
        )
        rows.append(f"<tr><td>{_tick_label(b, group[0].granularity)}</td>{cells}</tr>")
    return f"<table><tr><th>bucket</th>{head}</tr>{''.join(rows)}</table>"


def write_report(series: Sequence[MetricSeries], out_dir, title: str = "Transparency monitoring") -> list[Path]:
    """Write one SVG per metric (lines per unit) plus ``report.html`` embedding them all."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    sections = []
    for (metric, gran, normalized), group in group_series(series).items():
        if not any(p.value is not None for s in group for p in s.points):
            sections.append(f"<section><h2>{html.escape(chart_title(group))}</h2><p>no data</p></section>")
            continue
        svg = render_line_chart(group)
        name = _slug(f"{metric}_{gran}{'_normalized' if normalized else ''}") + ".svg"
        path = out / name
        path.write_text(svg, encoding="utf-8")
        written.append(path)
        sections.append(
            f"<section><h2>{html.escape(chart_title(group))}</h2>\n{svg}<details><summary>values</summary>"
            f"{_table(group)}</details></section>"
        )
    if not sections:
        sections.append("<section><h2>No series</h2><p>no data</p></section>")
    doc = (
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n"
        f"<title>{html.escape(title)}</title>\n"
        "<style>body{font-family:sans-serif;max-width:960px;margin:24px auto;color:#222}"
        "section{margin-bottom:32px}table{border-collapse:collapse;font-size:12px}"
        "td,th{border:1px solid #ddd;padding:2px 6px;text-align:right}</style>\n"
        f"</head>\n<body>\n<h1>{html.escape(title)}</h1>\n" + "\n".join(sections) + "\n</body>\n</html>\n"
    )
    page = out / "report.html"
    page.write_text(doc, encoding="utf-8")
    written.append(page)
    return written
