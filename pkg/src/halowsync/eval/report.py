"""CSV and SVG rendering of a :class:`MetricsReport`.

Both outputs are byte-deterministic: floats use fixed formats and nothing
time- or host-dependent is written.
"""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from .metrics import MetricsReport, SnrBin

CSV_COLUMNS = ("snr_db", "n", "mae", "miss_rate", "false_alarm_rate")

_W, _H, _PAD = 480, 320, 48


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6g}"


def report_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for b in report.bins:
        writer.writerow([_fmt(b.snr_db), b.n, _fmt(b.mae), _fmt(b.miss_rate),
                         _fmt(b.false_alarm_rate)])
    return buf.getvalue()


def parse_csv(text: str) -> list[SnrBin]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [SnrBin(float(r["snr_db"]), int(r["n"]), float(r["mae"]), float(r["miss_rate"]),
                   float(r["false_alarm_rate"])) for r in rows]


def axis_extents(report: MetricsReport) -> tuple[float, float, float, float]:
    """(x_min, x_max, y_min, y_max) of the plotted data.

    CFO reports plot truth against prediction; others plot MAE against SNR.
    """
    if report.scatter is not None and len(report.scatter[0]):
        truth, pred = report.scatter
        lo = float(min(truth.min(), pred.min()))
        hi = float(max(truth.max(), pred.max()))
        return lo, hi, lo, hi
    pts = [(b.snr_db, b.mae) for b in report.bins if not math.isnan(b.mae)]
    if not pts:
        return 0.0, 1.0, 0.0, 1.0
    xs, ys = zip(*pts)
    return float(min(xs)), float(max(xs)), 0.0, float(max(ys)) or 1.0


def _mapper(lo: float, hi: float, a: float, b: float):
    span = hi - lo or 1.0
    return lambda v: a + (v - lo) / span * (b - a)


def report_svg(report: MetricsReport) -> str:
    x0, x1, y0, y1 = axis_extents(report)
    sx = _mapper(x0, x1, _PAD, _W - _PAD)
    sy = _mapper(y0, y1, _H - _PAD, _PAD)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'data-x-min="{_fmt(x0)}" data-x-max="{_fmt(x1)}" '
           f'data-y-min="{_fmt(y0)}" data-y-max="{_fmt(y1)}">',
           f"<!-- config_hash: {report.config_hash} task: {report.task} "
           f"n_records: {report.n_records} -->",
           f'<rect x="{_PAD}" y="{_PAD}" width="{_W - 2 * _PAD}" height="{_H - 2 * _PAD}" '
           'fill="none" stroke="black"/>']
    if report.scatter is not None:
        truth, pred = report.scatter
        xlabel, ylabel = "true CFO (Hz)", "predicted CFO (Hz)"
        for t, p in zip(np.asarray(truth).tolist(), np.asarray(pred).tolist()):
            out.append(f'<circle cx="{sx(t):.2f}" cy="{sy(p):.2f}" r="1.5" fill="steelblue"/>')
    else:
        xlabel, ylabel = "SNR (dB)", "MAE (samples)"
        pts = " ".join(f"{sx(b.snr_db):.2f},{sy(b.mae):.2f}"
                       for b in report.bins if not math.isnan(b.mae))
        out.append(f'<polyline points="{pts}" fill="none" stroke="steelblue"/>')
    out += [f'<text x="{_W / 2:.0f}" y="{_H - 12}" text-anchor="middle">{xlabel}</text>',
            f'<text x="14" y="{_H / 2:.0f}" transform="rotate(-90 14 {_H / 2:.0f})" '
            f'text-anchor="middle">{ylabel}</text>',
            f'<text x="{_PAD}" y="{_H - _PAD + 16}">{_fmt(x0)}</text>',
            f'<text x="{_W - _PAD}" y="{_H - _PAD + 16}" text-anchor="end">{_fmt(x1)}</text>',
            "</svg>"]
    return "\n".join(out) + "\n"


def emit_report(report: MetricsReport, path, fmt: str | None = None) -> Path:
    """Write ``report`` as CSV or SVG; the format defaults to the file suffix."""
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".")
    if fmt == "csv":
        path.write_text(report_csv(report))
    elif fmt == "svg":
        path.write_text(report_svg(report))
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path
