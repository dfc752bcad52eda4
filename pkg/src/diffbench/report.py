"""Suite result serialization: CSV, JSON, Markdown pivot, and a severity
curve chart as hand-built SVG.

Every emitter formats floats with a fixed precision so that re-running a
suite with the same seed (and timing capture off) reproduces files byte
for byte, and CSV parse + emit round-trips exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math

from .corruptions import KIND_GROUPS, KIND_ORDER
from .errors import InsufficientSeries, IoError
from .harness import SuiteResult, SuiteRow

CSV_COLUMNS = [
    "dataset", "corruption", "severity", "mode", "model", "sampler", "steps",
    "fid_corrupted_ref", "fid_clean_ref", "max_score", "train_loss_final",
    "seconds", "seed",
]


def _fmt(value: float, places: int = 6) -> str:
    if math.isnan(value):
        return ""
    return f"{value:.{places}f}"


def _row_record(row: SuiteRow) -> dict:
    return {
        "dataset": row.dataset,
        "corruption": row.corruption,
        "severity": str(row.severity),
        "mode": row.mode,
        "model": row.model,
        "sampler": row.sampler,
        "steps": str(row.steps),
        "fid_corrupted_ref": _fmt(row.fid_corrupted_ref),
        "fid_clean_ref": _fmt(row.fid_clean_ref),
        "max_score": _fmt(row.max_score),
        "train_loss_final": _fmt(row.train_loss_final),
        "seconds": _fmt(row.seconds, 3),
        "seed": str(row.seed),
    }


def emit_csv(result: SuiteResult) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in result.rows:
        writer.writerow(_row_record(row))
    return buf.getvalue()


def parse_csv(text: str) -> SuiteResult:
    """Inverse of emit_csv; emit_csv(parse_csv(t)) == t for well-formed input."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != CSV_COLUMNS:
        raise IoError(f"unexpected CSV header {reader.fieldnames}")
    rows = []
    for rec in reader:
        def num(key, places=6):
            return float(rec[key]) if rec[key] else float("nan")
        rows.append(SuiteRow(
            digest="", dataset=rec["dataset"], corruption=rec["corruption"],
            severity=int(rec["severity"]), mode=rec["mode"], model=rec["model"],
            sampler=rec["sampler"], steps=int(rec["steps"]),
            fid_corrupted_ref=num("fid_corrupted_ref"),
            fid_clean_ref=num("fid_clean_ref"), max_score=num("max_score"),
            train_loss_final=num("train_loss_final"),
            seconds=num("seconds"), seed=int(rec["seed"])))
    return SuiteResult(rows=rows)


def emit_json(result: SuiteResult) -> str:
    def clean_value(v):
        if isinstance(v, float) and math.isnan(v):
            return None
        return v

    payload = {
        "metadata": result.metadata,
        "rows": [{k: clean_value(v) for k, v in _row_record(r).items()}
                 | ({"error": r.error} if r.error else {})
                 for r in result.rows],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def parse_json(text: str) -> SuiteResult:
    payload = json.loads(text)
    rows = []
    for rec in payload["rows"]:
        def num(key):
            v = rec.get(key)
            return float(v) if v not in (None, "") else float("nan")
        rows.append(SuiteRow(
            digest="", dataset=rec["dataset"], corruption=rec["corruption"],
            severity=int(rec["severity"]), mode=rec["mode"], model=rec["model"],
            sampler=rec["sampler"], steps=int(rec["steps"]),
            fid_corrupted_ref=num("fid_corrupted_ref"),
            fid_clean_ref=num("fid_clean_ref"), max_score=num("max_score"),
            train_loss_final=num("train_loss_final"), seconds=num("seconds"),
            seed=int(rec["seed"]), error=rec.get("error", "")))
    return SuiteResult(rows=rows, metadata=payload.get("metadata", {}))


def emit_markdown(result: SuiteResult, value_places: int = 2) -> str:
    """Pivot table: one line per (dataset, model, sampler, severity), one
    column per corruption kind, kinds ordered by group (Clear first)."""
    kinds = [k for k in KIND_ORDER if any(r.corruption == k.value for r in result.rows)]

    cells: dict = {}
    line_keys = []
    for row in result.rows:
        key = (row.dataset, row.model, row.sampler, row.severity)
        if key not in cells:
            cells[key] = {}
            line_keys.append(key)
        cells[key][row.corruption] = row

    header = ["dataset", "model", "sampler", "severity"]
    header += [f"{k.value} ({KIND_GROUPS[k]})" for k in kinds]
    lines = ["| " + " | ".join(header) + " |",
             "| " + " | ".join("---" for _ in header) + " |"]
    for key in sorted(line_keys):
        dataset, model, sampler, severity = key
        vals = []
        for kind in kinds:
            row = cells[key].get(kind.value)
            if row is None:
                vals.append("")
            elif row.error:
                vals.append("error")
            elif math.isnan(row.max_score):
                vals.append("")
            else:
                vals.append(f"{row.max_score:.{value_places}f}")
        lines.append("| " + " | ".join(
            [dataset, model, sampler, str(severity)] + vals) + " |")
    title = result.metadata.get("name", "suite")
    return f"# {title}\n\n" + "\n".join(lines) + "\n"


# chart geometry (pixels)
_CHART_W = 640
_CHART_H = 480
_MARGIN_L = 60
_MARGIN_R = 20
_MARGIN_T = 20
_MARGIN_B = 50

_SERIES_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                  "#8c564b", "#e377c2", "#7f7f7f", "#17becf", "#bcbd22"]


def emit_severity_chart(result: SuiteResult) -> str:
    """SVG of max_score versus severity, one path per (dataset, corruption)
    series with at least two severities. Raises InsufficientSeries when no
    such series exists."""
    series: dict = {}
    for row in result.rows:
        if row.error or math.isnan(row.max_score):
            continue
        series.setdefault((row.dataset, row.corruption, row.model, row.sampler),
                          {})[row.severity] = row.max_score
    series = {k: v for k, v in series.items() if len(v) >= 2}
    if not series:
        raise InsufficientSeries("need at least one series with two severities")

    all_vals = [v for pts in series.values() for v in pts.values()]
    y_max = max(all_vals) * 1.05 or 1.0
    plot_w = _CHART_W - _MARGIN_L - _MARGIN_R
    plot_h = _CHART_H - _MARGIN_T - _MARGIN_B

    def px(sev):
        return _MARGIN_L + plot_w * (sev - 1) / 4.0

    def py(val):
        return _MARGIN_T + plot_h * (1.0 - val / y_max)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_CHART_W}" '
        f'height="{_CHART_H}" viewBox="0 0 {_CHART_W} {_CHART_H}">',
        f'<rect width="{_CHART_W}" height="{_CHART_H}" fill="white"/>',
        f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T + plot_h:.1f}" '
        f'x2="{_MARGIN_L + plot_w:.1f}" y2="{_MARGIN_T + plot_h:.1f}" stroke="black"/>',
        f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T}" '
        f'x2="{_MARGIN_L}" y2="{_MARGIN_T + plot_h:.1f}" stroke="black"/>',
    ]
    for sev in range(1, 6):
        x = px(sev)
        y0 = _MARGIN_T + plot_h
        parts.append(f'<line class="xtick" x1="{x:.1f}" y1="{y0:.1f}" '
                     f'x2="{x:.1f}" y2="{y0 + 6:.1f}" stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{y0 + 20:.1f}" '
                     f'text-anchor="middle" font-size="12">{sev}</text>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        val = y_max * frac
        y = py(val)
        parts.append(f'<line x1="{_MARGIN_L - 6}" y1="{y:.1f}" '
                     f'x2="{_MARGIN_L}" y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{_MARGIN_L - 10}" y="{y + 4:.1f}" '
                     f'text-anchor="end" font-size="12">{val:.1f}</text>')
    parts.append(f'<text x="{_MARGIN_L + plot_w / 2:.1f}" y="{_CHART_H - 10}" '
                 f'text-anchor="middle" font-size="13">severity</text>')
    parts.append(f'<text x="15" y="{_MARGIN_T + plot_h / 2:.1f}" font-size="13" '
                 f'transform="rotate(-90 15 {_MARGIN_T + plot_h / 2:.1f})" '
                 f'text-anchor="middle">max_score</text>')

    for i, (key, pts) in enumerate(sorted(series.items())):
        dataset, corruption, model, sampler = key
        color = _SERIES_COLORS[i % len(_SERIES_COLORS)]
        coords = [(px(s), py(v)) for s, v in sorted(pts.items())]
        d = "M " + " L ".join(f"{x:.1f} {y:.1f}" for x, y in coords)
        label = f"{dataset}/{corruption}/{model}/{sampler}"
        parts.append(f'<path class="series" data-series="{label}" d="{d}" '
                     f'fill="none" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{_MARGIN_L + plot_w - 4:.1f}" '
                     f'y="{_MARGIN_T + 14 + 14 * i}" text-anchor="end" '
                     f'font-size="11" fill="{color}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
