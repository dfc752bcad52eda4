"""Report emitters: exact columns, byte-stable round trips, pivot layout,
and the severity chart's SVG structure."""

import math

import pytest

from diffbench.errors import InsufficientSeries
from diffbench.harness import SuiteResult, SuiteRow
from diffbench.report import (
    CSV_COLUMNS,
    emit_csv,
    emit_json,
    emit_markdown,
    emit_severity_chart,
    parse_csv,
    parse_json,
)


def _row(corruption="identity", severity=1, score=1.5, dataset="blobs",
         sampler="ddpm", error=""):
    return SuiteRow(
        digest="d", dataset=dataset, corruption=corruption, severity=severity,
        mode="overlay", model="analytic", sampler=sampler, steps=200,
        fid_corrupted_ref=score, fid_clean_ref=score * 0.5, max_score=score,
        train_loss_final=float("nan"), seconds=0.0, seed=7, error=error)


def _result(rows=None):
    if rows is None:
        rows = [_row(), _row(corruption="fog", severity=3, score=4.25)]
    return SuiteResult(rows=rows, metadata={"name": "demo"})


def test_csv_has_exact_column_order():
    text = emit_csv(_result())
    header = text.splitlines()[0].split(",")
    assert header == CSV_COLUMNS
    assert header == ["dataset", "corruption", "severity", "mode", "model",
                      "sampler", "steps", "fid_corrupted_ref", "fid_clean_ref",
                      "max_score", "train_loss_final", "seconds", "seed"]


def test_csv_round_trip_byte_identical():
    text = emit_csv(_result())
    assert emit_csv(parse_csv(text)) == text


def test_csv_nan_becomes_empty_field():
    text = emit_csv(_result())
    row = text.splitlines()[1].split(",")
    assert row[CSV_COLUMNS.index("train_loss_final")] == ""
    back = parse_csv(text)
    assert math.isnan(back.rows[0].train_loss_final)


def test_json_round_trip():
    text = emit_json(_result())
    again = emit_json(parse_json(text))
    assert again == text


def test_json_carries_errors():
    res = _result([_row(error="NotPSD: boom")])
    back = parse_json(emit_json(res))
    assert back.rows[0].error == "NotPSD: boom"


def test_markdown_column_ordering_by_group():
    rows = [_row(corruption=c, score=i + 1.0)
            for i, c in enumerate(["fog", "identity", "impulse", "spatter"])]
    md = emit_markdown(_result(rows))
    header = md.splitlines()[2]
    # Clear before Noise before Weather before Extra
    cols = ["identity (Clear)", "impulse (Noise)", "fog (Weather)",
            "spatter (Extra)"]
    positions = [header.index(c) for c in cols]
    assert positions == sorted(positions)


def test_markdown_shows_scores_and_errors():
    rows = [_row(score=11.45), _row(corruption="fog", error="IoError: x")]
    md = emit_markdown(_result(rows))
    assert "11.45" in md
    assert "error" in md


def test_chart_structure():
    rows = [_row(corruption="fog", severity=s, score=v)
            for s, v in zip(range(1, 6), (3.0, 2.0, 1.5, 2.5, 4.0))]
    svg = emit_severity_chart(_result(rows))
    assert svg.count('class="xtick"') == 5
    assert svg.count('<path class="series"') == 1
    assert "severity" in svg and "max_score" in svg


def test_chart_one_path_per_dataset():
    rows = []
    for ds in ("blobs", "fractal_red"):
        rows += [_row(corruption="fog", severity=s, score=s * 1.0, dataset=ds)
                 for s in (1, 3, 5)]
    svg = emit_severity_chart(_result(rows))
    assert svg.count('<path class="series"') == 2


def test_chart_byte_deterministic():
    res = _result([_row(corruption="fog", severity=s, score=s * 1.0)
                   for s in (1, 2, 3)])
    assert emit_severity_chart(res) == emit_severity_chart(res)


def test_chart_requires_two_severities():
    with pytest.raises(InsufficientSeries):
        emit_severity_chart(_result([_row()]))


def _path_ys(svg):
    start = svg.index('<path class="series"')
    d_attr = svg[start:].split('d="')[1].split('"')[0]
    nums = d_attr.replace("M", "").replace("L", "").split()
    return [float(v) for v in nums[1::2]]


def test_chart_y_coordinates_follow_values():
    # SVG y grows downward: larger score = smaller y
    values = (5.0, 2.0, 1.0, 3.0, 4.0)
    rows = [_row(corruption="fog", severity=s, score=v)
            for s, v in zip(range(1, 6), values)]
    ys = _path_ys(emit_severity_chart(_result(rows)))
    assert len(ys) == 5
    assert ys[0] < ys[1] < ys[2] and ys[2] > ys[3] > ys[4]
