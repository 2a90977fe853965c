"""Self-contained SVG line plots of the package's CSV outputs.

Recognized CSV schemas (by header):

    curve    t,value,stderr,n_samples     one series per file
    scaling  nbar,rate,uncertainty        one series per file
    profile  t,r,value,stderr             one series per time slice
    sizes    t,s,P_s                      one series per time

Each series becomes exactly one ``<polyline>``; its raw data coordinates are
kept in a ``data-xy`` attribute so figures can be checked without parsing
pixel positions.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape, quoteattr

__all__ = ["PlotSpec", "SchemaError", "emit_plot", "read_series"]

SCHEMAS = {
    ("t", "value", "stderr", "n_samples"): "curve",
    ("nbar", "rate", "uncertainty"): "scaling",
    ("t", "r", "value", "stderr"): "profile",
    ("t", "s", "P_s"): "sizes",
}

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"]


class SchemaError(ValueError):
    pass


@dataclass
class PlotSpec:
    kind: str = "curve"  # curve | scaling | collapse | sizes
    x_log: bool = False
    y_log: bool = False
    title: str = ""
    x_label: str = ""
    y_label: str = ""
    labels: list = field(default_factory=list)
    velocity: float = 0.0
    width: int = 640
    height: int = 420


@dataclass
class Series:
    label: str
    xs: list
    ys: list
    rows: list
    t: float | None = None


def _read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        rows = [r for r in reader if r]
    schema = SCHEMAS.get(header)
    if schema is None:
        raise SchemaError(f"{path}: unrecognized CSV header {list(header)}")
    return schema, rows


def read_series(path, spec: PlotSpec, label: str | None = None) -> list:
    schema, rows = _read_csv(path)
    want = {"curve": "curve", "scaling": "scaling", "collapse": "profile", "sizes": "sizes"}.get(spec.kind)
    if want is None:
        raise ValueError(f"unknown plot kind {spec.kind!r}")
    if schema != want:
        raise SchemaError(f"{path}: plot kind {spec.kind!r} needs a {want} CSV, got {schema}")
    name = label if label is not None else str(path).rsplit("/", 1)[-1].rsplit(".", 1)[0]
    if schema in ("curve", "scaling"):
        xs = [float(r[0]) for r in rows]
        ys = [float(r[1]) for r in rows]
        return [Series(name, xs, ys, list(range(1, len(rows) + 1)))]
    out = {}
    for n, r in enumerate(rows, start=1):
        t = float(r[0])
        if schema == "profile":
            x = float(r[1]) - spec.velocity * t
            y = float(r[2])
        else:
            x, y = float(r[1]), float(r[2])
        s = out.setdefault(t, Series(f"t={r[0]}", [], [], [], t))
        s.xs.append(x)
        s.ys.append(y)
        s.rows.append(n)
    return [out[t] for t in sorted(out)]


def _check_log(tagged, spec):
    for s, path in tagged:
        for x, y, row in zip(s.xs, s.ys, s.rows):
            if spec.x_log and x <= 0:
                raise ValueError(f"{path}: data row {row} has non-positive x={x!r} on a log axis")
            if spec.y_log and y <= 0:
                raise ValueError(f"{path}: data row {row} has non-positive y={y!r} on a log axis")


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        return [float(e) for e in range(a, b + 1) if lo - 1e-9 <= e <= hi + 1e-9] or [lo, hi]
    span = hi - lo
    if span <= 0:
        return [lo]
    step = 10 ** math.floor(math.log10(span / 5))
    for m in (1, 2, 5, 10):
        if span / (m * step) <= 6:
            step *= m
            break
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-9 * span:
        out.append(round(v, 12))
        v += step
    return out


def _fmt_tick(v, log):
    if log:
        return f"1e{int(v)}"
    return f"{v:g}"


def emit_plot(csv_paths, out_path, spec: PlotSpec | None = None) -> str:
    """Render the CSV file(s) to an SVG file at ``out_path``; returns the SVG text."""
    spec = spec or PlotSpec()
    if isinstance(csv_paths, (str, bytes)) or hasattr(csv_paths, "__fspath__"):
        csv_paths = [csv_paths]
    tagged = []
    for n, path in enumerate(csv_paths):
        label = spec.labels[n] if n < len(spec.labels) else None
        for s in read_series(path, spec, label):
            tagged.append((s, path))
    if not tagged:
        raise ValueError("nothing to plot")
    _check_log(tagged, spec)

    def tx(v):
        return math.log10(v) if spec.x_log else v

    def ty(v):
        return math.log10(v) if spec.y_log else v

    xs = [tx(x) for s, _ in tagged for x in s.xs]
    ys = [ty(y) for s, _ in tagged for y in s.ys]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    ml, mr, mt, mb = 72, 130, 34, 52
    w, h = spec.width, spec.height
    pw, ph = w - ml - mr, h - mt - mb

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" '
        f'data-kind="{spec.kind}" data-x-log="{int(spec.x_log)}" data-y-log="{int(spec.y_log)}" '
        f'data-x-range="{x0!r} {x1!r}" data-y-range="{y0!r} {y1!r}" '
        f'data-plot-box="{ml} {mt} {pw} {ph}">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
        f'<path d="M{ml},{mt} V{mt + ph} H{ml + pw}" stroke="black" fill="none"/>',
    ]
    if spec.title:
        out.append(f'<text x="{ml + pw / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(spec.title)}</text>')
    for v in _ticks(x0, x1, spec.x_log):
        p = px(v)
        out.append(f'<path d="M{p:.2f},{mt + ph} v5" stroke="black"/>')
        out.append(f'<text x="{p:.2f}" y="{mt + ph + 18}" text-anchor="middle" font-size="11">{_fmt_tick(v, spec.x_log)}</text>')
    for v in _ticks(y0, y1, spec.y_log):
        p = py(v)
        out.append(f'<path d="M{ml - 5},{p:.2f} h5" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{p + 4:.2f}" text-anchor="end" font-size="11">{_fmt_tick(v, spec.y_log)}</text>')
    if spec.x_label:
        out.append(f'<text x="{ml + pw / 2:.1f}" y="{h - 12}" text-anchor="middle" font-size="12">{escape(spec.x_label)}</text>')
    if spec.y_label:
        out.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" font-size="12" '
                   f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{escape(spec.y_label)}</text>')
    for n, (s, _) in enumerate(tagged):
        color = PALETTE[n % len(PALETTE)]
        pts = " ".join(f"{px(tx(x)):.3f},{py(ty(y)):.3f}" for x, y in zip(s.xs, s.ys))
        raw = " ".join(f"{x!r},{y!r}" for x, y in zip(s.xs, s.ys))
        t_attr = f' data-t="{s.t!r}"' if s.t is not None else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5" '
                   f'data-label={quoteattr(s.label)}{t_attr} data-xy="{raw}"/>')
        ly = mt + 14 * n + 6
        if ly < mt + ph:
            out.append(f'<text x="{ml + pw + 10}" y="{ly}" font-size="11" fill="{color}">{escape(s.label)}</text>')
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    with open(out_path, "w") as fh:
        fh.write(text)
    return text
