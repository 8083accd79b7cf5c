"""Run tables (CSV) and line charts (standalone SVG), both byte-deterministic."""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from xml.sax.saxutils import escape

CSV_COLUMNS = ("run_id", "seed", "k", "eta", "alpha", "activation", "epochs",
               "nonzero_updates", "final_train_loss", "final_train_err",
               "final_test_err", "status")

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run_row(run_id, seed, k, eta, alpha, activation, record) -> dict:
    final = record.final
    return {
        "run_id": run_id, "seed": seed, "k": k, "eta": float(eta), "alpha": float(alpha),
        "activation": activation, "epochs": record.epochs,
        "nonzero_updates": record.nonzero_updates,
        "final_train_loss": final.hinge_loss, "final_train_err": final.train_error,
        "final_test_err": final.test_error, "status": record.status,
    }


def emit_csv(path, rows) -> Path:
    """Write one row per run, sorted by ``run_id``, with CRLF line endings."""
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to write")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(CSV_COLUMNS)
    for row in sorted(rows, key=lambda r: r["run_id"]):
        writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    path = Path(path)
    path.write_bytes(buf.getvalue().encode("utf-8"))
    return path


def nice_ticks(lo: float, hi: float, target: int = 6):
    """Round tick positions covering ``[lo, hi]`` with steps of 1, 2 or 5 x 10^k."""
    if hi < lo:
        lo, hi = hi, lo
    if hi == lo:
        pad = abs(lo) * 0.5 or 1.0
        lo, hi = lo - pad, hi + pad
    raw = (hi - lo) / max(target - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for m in (1, 2, 5, 10):
        step = m * mag
        if step >= raw:
            break
    start = math.floor(lo / step + 1e-9) * step
    stop = math.ceil(hi / step - 1e-9) * step
    count = int(round((stop - start) / step))
    return [start + i * step for i in range(count + 1)], step


def _tick_label(value: float, step: float) -> str:
    decimals = max(0, -int(math.floor(math.log10(step)))) if step < 1 else 0
    text = f"{value:.{decimals}f}"
    return "0" if text in ("-0", "-0.0") or float(text) == 0 else text


def emit_svg_plot(path, series, title: str, xlabel: str, ylabel: str,
                  width: int = 640, height: int = 420) -> Path:
    """Line chart with one polyline per named series.

    ``series`` maps a legend name to ``(xs, ys)``. Non-finite values are rejected
    before anything is written.
    """
    items = list(series.items()) if isinstance(series, dict) else list(series)
    if not items:
        raise ValueError("no series to plot")
    for name, (xs, ys) in items:
        if len(xs) == 0 or len(xs) != len(ys):
            raise ValueError(f"series {name!r} is empty or has mismatched lengths")
        if not all(math.isfinite(float(v)) for v in list(xs) + list(ys)):
            raise ValueError(f"series {name!r} contains non-finite values")

    all_x = [float(v) for _, (xs, _) in items for v in xs]
    all_y = [float(v) for _, (_, ys) in items for v in ys]
    xt, xstep = nice_ticks(min(all_x), max(all_x))
    yt, ystep = nice_ticks(min(all_y), max(all_y))
    x0, x1, y0, y1 = xt[0], xt[-1], yt[0], yt[-1]
    left, right, top, bottom = 70, 150, 40, 55
    pw, ph = width - left - right, height - top - bottom

    def sx(v):
        return left + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return top + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left + pw / 2:.2f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in xt:
        px = sx(v)
        out.append(f'<line x1="{px:.2f}" y1="{top + ph}" x2="{px:.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{top + ph + 18}" text-anchor="middle">{_tick_label(v, xstep)}</text>')
    for v in yt:
        py = sy(v)
        out.append(f'<line x1="{left - 5}" y1="{py:.2f}" x2="{left}" y2="{py:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{py + 4:.2f}" text-anchor="end">{_tick_label(v, ystep)}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{top + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {top + ph / 2:.2f})">{escape(ylabel)}</text>')
    for i, (name, (xs, ys)) in enumerate(items):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{sx(float(a)):.2f},{sy(float(b)):.2f}" for a, b in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 10 + 18 * i
        lx = left + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(str(name))}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path
