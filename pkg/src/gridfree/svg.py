"""Minimal self-contained SVG plots.

Each series is drawn and also embedded verbatim in an XML comment
(``<!-- data <name>: x y; x y; ... -->``) so the numbers behind a figure can be
recovered from the file alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

COLORS = ("#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d35400", "#555555")

W, H = 640, 400
ML, MR, MT, MB = 70, 20, 40, 50


def _num(v: float) -> str:
    return f"{v:.6g}"


@dataclass
class _Series:
    kind: str            # line | stem | marker
    name: str
    x: np.ndarray
    y: np.ndarray
    color: str


@dataclass
class Plot:
    title: str
    xlabel: str
    ylabel: str
    xlim: tuple | None = None
    ylim: tuple | None = None
    equal_aspect: bool = False
    series: list = field(default_factory=list)
    circles: list = field(default_factory=list)

    def _color(self):
        return COLORS[len(self.series) % len(COLORS)]

    def line(self, x, y, name, color=None):
        self.series.append(_Series("line", name, np.asarray(x, float), np.asarray(y, float),
                                   color or self._color()))
        return self

    def stems(self, x, y, name, color=None):
        self.series.append(_Series("stem", name, np.asarray(x, float), np.asarray(y, float),
                                   color or self._color()))
        return self

    def markers(self, x, y, name, color=None):
        self.series.append(_Series("marker", name, np.asarray(x, float), np.asarray(y, float),
                                   color or self._color()))
        return self

    def unit_circle(self):
        self.circles.append((0.0, 0.0, 1.0))
        return self

    # layout
    def _limits(self):
        xs = [s.x[np.isfinite(s.x)] for s in self.series if s.x.size]
        ys = [s.y[np.isfinite(s.y)] for s in self.series if s.y.size]
        xs = np.concatenate(xs) if xs else np.zeros(1)
        ys = np.concatenate(ys) if ys else np.zeros(1)
        if any(s.kind == "stem" for s in self.series):
            ys = np.concatenate([ys, [0.0]])
        for cx, cy, r in self.circles:
            xs = np.concatenate([xs, [cx - r, cx + r]])
            ys = np.concatenate([ys, [cy - r, cy + r]])
        x0, x1 = self.xlim or (float(xs.min()), float(xs.max()))
        y0, y1 = self.ylim or (float(ys.min()), float(ys.max()))
        if x1 <= x0:
            x0, x1 = x0 - 1, x1 + 1
        if y1 <= y0:
            y0, y1 = y0 - 1, y1 + 1
        if not self.ylim:
            pad = 0.05 * (y1 - y0)
            y0, y1 = y0 - pad, y1 + pad
        if self.equal_aspect:
            pw, ph = W - ML - MR, H - MT - MB
            sx, sy = (x1 - x0) / pw, (y1 - y0) / ph
            s = max(sx, sy)
            cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
            x0, x1 = cx - s * pw / 2, cx + s * pw / 2
            y0, y1 = cy - s * ph / 2, cy + s * ph / 2
        return x0, x1, y0, y1

    def render(self) -> str:
        x0, x1, y0, y1 = self._limits()
        pw, ph = W - ML - MR, H - MT - MB

        def px(x):
            return ML + (np.asarray(x) - x0) / (x1 - x0) * pw

        def py(y):
            return MT + ph - (np.clip(np.asarray(y), y0, y1) - y0) / (y1 - y0) * ph

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
               f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">']
        for s in self.series:
            pts = "; ".join(f"{repr(float(a))} {repr(float(b))}" for a, b in zip(s.x, s.y))
            out.append(f"<!-- data {escape(s.name).replace('--', '- -')}: {pts} -->")
        out.append(f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>')
        out.append(f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="14">'
                   f'{escape(self.title)}</text>')
        out.append(f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
        for v in _ticks(x0, x1):
            X = float(px(v))
            out.append(f'<line x1="{_num(X)}" y1="{MT + ph}" x2="{_num(X)}" y2="{MT + ph + 5}" '
                       f'stroke="black"/>')
            out.append(f'<text x="{_num(X)}" y="{MT + ph + 18}" text-anchor="middle">{_num(v)}</text>')
        for v in _ticks(y0, y1):
            Y = float(py(v))
            out.append(f'<line x1="{ML - 5}" y1="{_num(Y)}" x2="{ML}" y2="{_num(Y)}" stroke="black"/>')
            out.append(f'<text x="{ML - 8}" y="{_num(Y + 4)}" text-anchor="end">{_num(v)}</text>')
        out.append(f'<text x="{ML + pw / 2}" y="{H - 12}" text-anchor="middle">'
                   f'{escape(self.xlabel)}</text>')
        out.append(f'<text x="16" y="{MT + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {MT + ph / 2})">{escape(self.ylabel)}</text>')
        out.append(f'<clipPath id="plotarea"><rect x="{ML}" y="{MT}" width="{pw}" height="{ph}"/>'
                   f'</clipPath><g clip-path="url(#plotarea)">')
        for cx, cy, r in self.circles:
            rx = float(px(cx + r) - px(cx))
            ry = float(py(cy) - py(cy + r))
            out.append(f'<ellipse cx="{_num(float(px(cx)))}" cy="{_num(float(py(cy)))}" '
                       f'rx="{_num(rx)}" ry="{_num(ry)}" fill="none" stroke="#999" '
                       f'stroke-dasharray="4 3"/>')
        for s in self.series:
            X, Y = px(s.x), py(s.y)
            if s.kind == "line":
                ok = np.isfinite(s.y)
                pts = " ".join(f"{_num(a)},{_num(b)}" for a, b in zip(X[ok], Y[ok]))
                out.append(f'<polyline points="{pts}" fill="none" stroke="{s.color}" '
                           f'stroke-width="1.2"/>')
            elif s.kind == "stem":
                base = float(py(max(y0, min(0.0, y1))))
                for a, b in zip(X, Y):
                    out.append(f'<line x1="{_num(a)}" y1="{_num(base)}" x2="{_num(a)}" y2="{_num(b)}" '
                               f'stroke="{s.color}" stroke-width="1.5"/>')
                    out.append(f'<circle cx="{_num(a)}" cy="{_num(b)}" r="3" fill="{s.color}"/>')
            else:
                for a, b in zip(X, Y):
                    out.append(f'<circle cx="{_num(a)}" cy="{_num(b)}" r="4" fill="none" '
                               f'stroke="{s.color}" stroke-width="1.5"/>')
        out.append("</g>")
        for i, s in enumerate(self.series):
            yy = MT + 14 + 16 * i
            out.append(f'<rect x="{W - MR - 150}" y="{yy - 9}" width="10" height="10" fill="{s.color}"/>')
            out.append(f'<text x="{W - MR - 135}" y="{yy}">{escape(s.name)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"


def _ticks(lo: float, hi: float, n: int = 6) -> list:
    span = hi - lo
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * span:
        out.append(0.0 if abs(v) < 1e-12 * span else v)
        v += step
    return out


def db(values, floor_db: float = -60.0) -> np.ndarray:
    """Power normalized to its maximum in dB, floored."""
    v = np.asarray(values, dtype=float)
    m = np.max(v) if v.size else 0.0
    if m <= 0:
        return np.full(v.shape, floor_db)
    with np.errstate(divide="ignore"):
        out = 10 * np.log10(v / m)
    return np.maximum(out, floor_db)
