"""Minimal SVG plotting for ROC/PR curves.

The SVG is assembled from fixed-format strings so that identical
inputs always produce byte-identical files; nothing here depends on
a plotting library or font metrics.
"""

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

from .core import DomainError

WIDTH, HEIGHT = 480, 360
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 56, 16, 36, 44
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#17becf")
TICKS = (0.0, 0.25, 0.5, 0.75, 1.0)


def _fx(v: float) -> str:
    return format(v, ".2f")


def _px(x: float) -> float:
    return MARGIN_L + x * (WIDTH - MARGIN_L - MARGIN_R)


def _py(y: float) -> float:
    return HEIGHT - MARGIN_B - y * (HEIGHT - MARGIN_T - MARGIN_B)


def curve_svg(series: Sequence[Tuple[str, Sequence[Tuple[float, float]]]],
              title: str = "", xlabel: str = "", ylabel: str = "",
              diagonal: bool = False) -> str:
    """Render unit-square polylines as a self-contained SVG string.

    ``series`` is a list of (legend label, [(x, y), ...]) with
    coordinates in [0, 1].
    """
    if not series:
        raise DomainError("nothing to plot")
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    x0, x1 = _fx(_px(0.0)), _fx(_px(1.0))
    y0, y1 = _fx(_py(0.0)), _fx(_py(1.0))
    parts.append(f'<rect x="{x0}" y="{y1}" width="{_fx(_px(1.0) - _px(0.0))}" '
                 f'height="{_fx(_py(0.0) - _py(1.0))}" fill="none" '
                 'stroke="#444444" stroke-width="1"/>')
    for t in TICKS:
        tx, ty = _fx(_px(t)), _fx(_py(t))
        parts.append(f'<line x1="{tx}" y1="{y0}" x2="{tx}" '
                     f'y2="{_fx(_py(0.0) + 4)}" stroke="#444444"/>')
        parts.append(f'<text x="{tx}" y="{_fx(_py(0.0) + 16)}" '
                     'font-family="monospace" font-size="10" '
                     f'text-anchor="middle">{format(t, "g")}</text>')
        parts.append(f'<line x1="{x0}" y1="{ty}" '
                     f'x2="{_fx(_px(0.0) - 4)}" y2="{ty}" stroke="#444444"/>')
        parts.append(f'<text x="{_fx(_px(0.0) - 7)}" y="{_fx(_py(t) + 3)}" '
                     'font-family="monospace" font-size="10" '
                     f'text-anchor="end">{format(t, "g")}</text>')
    if diagonal:
        parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" '
                     'stroke="#bbbbbb" stroke-dasharray="4 3"/>')
    for i, (label, points) in enumerate(series):
        pts = list(points)
        if len(pts) < 2:
            raise DomainError(f"series {label!r} needs at least 2 points")
        colour = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{_fx(_px(float(x)))},{_fx(_py(float(y)))}"
                          for x, y in pts)
        parts.append(f'<polyline points="{coords}" fill="none" '
                     f'stroke="{colour}" stroke-width="1.5"/>')
        ly = MARGIN_T + 14 * i
        lx = MARGIN_L + 10
        parts.append(f'<line x1="{lx}" y1="{ly + 8}" x2="{lx + 18}" '
                     f'y2="{ly + 8}" stroke="{colour}" stroke-width="1.5"/>')
        parts.append(f'<text x="{lx + 24}" y="{ly + 11}" '
                     'font-family="monospace" font-size="10">'
                     f'{_escape(label)}</text>')
    if title:
        parts.append(f'<text x="{WIDTH // 2}" y="20" '
                     'font-family="monospace" font-size="12" '
                     f'text-anchor="middle">{_escape(title)}</text>')
    if xlabel:
        parts.append(f'<text x="{WIDTH // 2}" y="{HEIGHT - 10}" '
                     'font-family="monospace" font-size="11" '
                     f'text-anchor="middle">{_escape(xlabel)}</text>')
    if ylabel:
        parts.append(f'<text x="14" y="{HEIGHT // 2}" '
                     'font-family="monospace" font-size="11" '
                     'text-anchor="middle" '
                     f'transform="rotate(-90 14 {HEIGHT // 2})">'
                     f'{_escape(ylabel)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(text: str) -> str:
    return (str(text).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))


def _series_from_reports(reports, attr: str):
    series = []
    for label, report in reports:
        pts = getattr(report, attr)
        if pts is None:
            raise DomainError(
                f"report {label!r} has no {attr} curve; evaluate with "
                "curves enabled")
        series.append((label, pts))
    return series


def roc_svg(reports: Sequence[Tuple[str, object]]) -> str:
    """ROC curves (one per labelled report) with the chance diagonal."""
    labelled = []
    for label, report in reports:
        auc = report.roc_auc
        txt = f"{label} (AUC {auc:.3f})" if auc is not None else str(label)
        labelled.append((txt, report))
    return curve_svg(_series_from_reports(labelled, "roc"),
                     title="ROC", xlabel="false positive rate",
                     ylabel="true positive rate", diagonal=True)


def pr_svg(reports: Sequence[Tuple[str, object]]) -> str:
    labelled = []
    for label, report in reports:
        ap = report.average_precision
        txt = f"{label} (AP {ap:.3f})" if ap is not None else str(label)
        labelled.append((txt, report))
    return curve_svg(_series_from_reports(labelled, "pr"),
                     title="Precision-Recall", xlabel="recall",
                     ylabel="precision")


def write_svg(text: str, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(text)
