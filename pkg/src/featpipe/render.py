"""Report rendering: CSV exports and self-contained SVG charts.

Everything here is plain string assembly, so identical inputs always
produce byte-identical files. The SVG documents are standalone 1.1
with simple axes, tick labels, polyline series, and a legend; the
confusion grid carries the percentage annotations of the familiar
matrix figure.
"""

from __future__ import annotations

import csv

from .errors import DataError
from .evaluation import ConfusionMatrix

CURVE_HEADER = ("method", "fraction", "n_images", "n_features", "accuracy", "seed")
CONFUSION_HEADER = ("actual", "predicted", "count")

# A small fixed palette; series beyond it cycle back around.
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2")

_WIDTH = 640
_HEIGHT = 400
_MARGIN_LEFT = 64
_MARGIN_RIGHT = 24
_MARGIN_TOP = 24
_MARGIN_BOTTOM = 48


def _fmt(value: float) -> str:
    return format(float(value), ".9g")


def write_curve_csv(points, path: str) -> None:
    """Learning-curve rows: `method,fraction,n_images,n_features,accuracy,seed`."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CURVE_HEADER)
        for p in points:
            writer.writerow(
                [p.method, _fmt(p.fraction), p.n_images, p.n_features, _fmt(p.accuracy), p.seed]
            )


def read_curve_csv(path: str) -> list:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows or tuple(rows[0]) != CURVE_HEADER:
        raise DataError(f"curve file {path!r} lacks the expected header")
    out = []
    for row in rows[1:]:
        if len(row) != len(CURVE_HEADER):
            raise DataError(f"curve file {path!r} has a malformed row: {row!r}")
        out.append(
            {
                "method": row[0],
                "fraction": float(row[1]),
                "n_images": int(row[2]),
                "n_features": int(row[3]),
                "accuracy": float(row[4]),
                "seed": int(row[5]),
            }
        )
    return out


def write_confusion_csv(matrix: ConfusionMatrix, path: str) -> None:
    """Four rows of `actual,predicted,count`."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CONFUSION_HEADER)
        for i, actual in enumerate(matrix.classes):
            for j, predicted in enumerate(matrix.classes):
                writer.writerow([actual, predicted, int(matrix.counts[i, j])])


def render_csv(report, path: str) -> None:
    """Write whichever report artifact this is to CSV.

    Accepts a ConfusionMatrix, a list of LearningCurvePoint, or a
    TuneTrace, and emits the matching documented header.
    """
    from .tuner import TuneTrace, write_trace_csv

    if isinstance(report, ConfusionMatrix):
        write_confusion_csv(report, path)
    elif isinstance(report, TuneTrace):
        write_trace_csv(report, path)
    elif isinstance(report, (list, tuple)):
        write_curve_csv(report, path)
    else:
        raise DataError(f"no CSV form registered for {type(report).__name__}")


def _svg_open(title: str) -> list:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_WIDTH}" height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f"<title>{title}</title>",
        f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
    ]


def _ticks(lo: float, hi: float, n: int = 5) -> list:
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (n - 1)
    return [lo + step * i for i in range(n)]


def render_line_chart(series, path: str, *, title: str = "", x_label: str = "", y_label: str = "") -> None:
    """Write an SVG line chart.

    series is a list of (name, points) pairs where points are (x, y)
    tuples. An empty list still produces a valid document with axes.
    """
    xs = [float(x) for _, pts in series for x, _ in pts]
    ys = [float(y) for _, pts in series for _, y in pts]
    x_lo, x_hi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y_lo, y_hi = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    plot_w = _WIDTH - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = _HEIGHT - _MARGIN_TOP - _MARGIN_BOTTOM

    def sx(x: float) -> float:
        return _MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y: float) -> float:
        return _MARGIN_TOP + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    lines = _svg_open(title or "line chart")
    axis_y = _MARGIN_TOP + plot_h
    lines.append(
        f'<line x1="{_MARGIN_LEFT}" y1="{axis_y}" x2="{_MARGIN_LEFT + plot_w}" '
        f'y2="{axis_y}" stroke="black" stroke-width="1"/>'
    )
    lines.append(
        f'<line x1="{_MARGIN_LEFT}" y1="{_MARGIN_TOP}" x2="{_MARGIN_LEFT}" '
        f'y2="{axis_y}" stroke="black" stroke-width="1"/>'
    )
    for tick in _ticks(x_lo, x_hi):
        px = sx(tick)
        lines.append(
            f'<line x1="{px:.2f}" y1="{axis_y}" x2="{px:.2f}" y2="{axis_y + 5}" '
            f'stroke="black" stroke-width="1"/>'
        )
        lines.append(
            f'<text x="{px:.2f}" y="{axis_y + 18}" font-size="11" '
            f'text-anchor="middle">{format(tick, ".3g")}</text>'
        )
    for tick in _ticks(y_lo, y_hi):
        py = sy(tick)
        lines.append(
            f'<line x1="{_MARGIN_LEFT - 5}" y1="{py:.2f}" x2="{_MARGIN_LEFT}" '
            f'y2="{py:.2f}" stroke="black" stroke-width="1"/>'
        )
        lines.append(
            f'<text x="{_MARGIN_LEFT - 8}" y="{py + 4:.2f}" font-size="11" '
            f'text-anchor="end">{format(tick, ".3g")}</text>'
        )
    if x_label:
        lines.append(
            f'<text x="{_MARGIN_LEFT + plot_w / 2:.2f}" y="{_HEIGHT - 10}" '
            f'font-size="12" text-anchor="middle">{x_label}</text>'
        )
    if y_label:
        cx = 16
        cy = _MARGIN_TOP + plot_h / 2
        lines.append(
            f'<text x="{cx}" y="{cy:.2f}" font-size="12" text-anchor="middle" '
            f'transform="rotate(-90 {cx} {cy:.2f})">{y_label}</text>'
        )

    for idx, (name, pts) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        coords = " ".join(f"{sx(float(x)):.2f},{sy(float(y)):.2f}" for x, y in pts)
        if coords:
            lines.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>'
            )
        legend_y = _MARGIN_TOP + 16 * idx + 8
        legend_x = _MARGIN_LEFT + plot_w - 120
        lines.append(
            f'<line x1="{legend_x}" y1="{legend_y}" x2="{legend_x + 20}" '
            f'y2="{legend_y}" stroke="{color}" stroke-width="2"/>'
        )
        lines.append(
            f'<text x="{legend_x + 26}" y="{legend_y + 4}" font-size="11">{name}</text>'
        )
    lines.append("</svg>")
    _write_text(path, "\n".join(lines) + "\n")


def render_confusion(matrix: ConfusionMatrix, path: str, *, title: str = "") -> None:
    """Write the 2x2 confusion grid as SVG with percentage annotations.

    Each cell shows its count and its share of all predictions; the
    overall accuracy is printed underneath.
    """
    shares = matrix.cell_shares()
    cell = 120
    grid_x = 180
    grid_y = 80
    lines = _svg_open(title or "confusion matrix")
    lines.append(
        f'<text x="{grid_x + cell}" y="36" font-size="14" text-anchor="middle">'
        f"predicted</text>"
    )
    lines.append(
        f'<text x="{grid_x - 130}" y="{grid_y + cell}" font-size="14" '
        f'text-anchor="middle" transform="rotate(-90 {grid_x - 130} {grid_y + cell})">'
        f"actual</text>"
    )
    for j, name in enumerate(matrix.classes):
        lines.append(
            f'<text x="{grid_x + cell * j + cell // 2}" y="{grid_y - 10}" '
            f'font-size="12" text-anchor="middle">{name}</text>'
        )
    for i, name in enumerate(matrix.classes):
        lines.append(
            f'<text x="{grid_x - 10}" y="{grid_y + cell * i + cell // 2}" '
            f'font-size="12" text-anchor="end">{name}</text>'
        )
    for i in range(2):
        for j in range(2):
            x = grid_x + cell * j
            y = grid_y + cell * i
            fill = "#dbe9f6" if i == j else "#f6dbdb"
            lines.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{fill}" stroke="black" stroke-width="1"/>'
            )
            lines.append(
                f'<text x="{x + cell // 2}" y="{y + cell // 2 - 6}" font-size="16" '
                f'text-anchor="middle">{int(matrix.counts[i, j])}</text>'
            )
            lines.append(
                f'<text x="{x + cell // 2}" y="{y + cell // 2 + 16}" font-size="13" '
                f'text-anchor="middle">{shares[i, j] * 100:.1f}%</text>'
            )
    lines.append(
        f'<text x="{grid_x + cell}" y="{grid_y + 2 * cell + 32}" font-size="13" '
        f'text-anchor="middle">accuracy {matrix.accuracy() * 100:.1f}% '
        f"({int(matrix.counts.trace())}/{matrix.total()})</text>"
    )
    lines.append("</svg>")
    _write_text(path, "\n".join(lines) + "\n")


def render_histogram(stats, path: str, *, title: str = "", x_label: str = "", y_label: str = "") -> None:
    """Write a bar-style SVG for a FeatureStats histogram."""
    lows = list(stats.bin_lows)
    counts = [int(c) for c in stats.bin_counts]
    top = max(counts) if counts else 1
    plot_w = _WIDTH - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = _HEIGHT - _MARGIN_TOP - _MARGIN_BOTTOM
    lines = _svg_open(title or "feature histogram")
    axis_y = _MARGIN_TOP + plot_h
    lines.append(
        f'<line x1="{_MARGIN_LEFT}" y1="{axis_y}" x2="{_MARGIN_LEFT + plot_w}" '
        f'y2="{axis_y}" stroke="black" stroke-width="1"/>'
    )
    lines.append(
        f'<line x1="{_MARGIN_LEFT}" y1="{_MARGIN_TOP}" x2="{_MARGIN_LEFT}" '
        f'y2="{axis_y}" stroke="black" stroke-width="1"/>'
    )
    n = len(lows)
    bar_w = plot_w / max(n, 1)
    for idx, count in enumerate(counts):
        h = plot_h * count / top
        x = _MARGIN_LEFT + idx * bar_w
        lines.append(
            f'<rect x="{x:.2f}" y="{axis_y - h:.2f}" width="{bar_w:.2f}" '
            f'height="{h:.2f}" fill="#1f77b4" stroke="white" stroke-width="0.5"/>'
        )
    for idx in range(0, n, max(1, n // 8)):
        x = _MARGIN_LEFT + idx * bar_w
        lines.append(
            f'<text x="{x:.2f}" y="{axis_y + 18}" font-size="10" '
            f'text-anchor="middle">{format(lows[idx], ".3g")}</text>'
        )
    if x_label:
        lines.append(
            f'<text x="{_MARGIN_LEFT + plot_w / 2:.2f}" y="{_HEIGHT - 10}" '
            f'font-size="12" text-anchor="middle">{x_label}</text>'
        )
    if y_label:
        cx = 16
        cy = _MARGIN_TOP + plot_h / 2
        lines.append(
            f'<text x="{cx}" y="{cy:.2f}" font-size="12" text-anchor="middle" '
            f'transform="rotate(-90 {cx} {cy:.2f})">{y_label}</text>'
        )
    lines.append("</svg>")
    _write_text(path, "\n".join(lines) + "\n")


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
    except OSError as exc:
        raise DataError(f"cannot write {path!r}: {exc}") from exc
