"""Tiny deterministic SVG writer.

Coordinates are printed with fixed precision so identical inputs give
identical bytes.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from xml.sax.saxutils import escape, quoteattr


def fmt(x: float) -> str:
    s = f"{x:.2f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


class Svg:
    def __init__(self, width: float, height: float, title: str = "", metadata: dict | None = None):
        self.width, self.height = width, height
        self.title = title
        self.metadata = dict(metadata or {})
        self.parts: list[str] = []

    def _attrs(self, attrs: dict) -> str:
        out = []
        for k, v in attrs.items():
            if v is None:
                continue
            if isinstance(v, float):
                v = fmt(v)
            out.append(f"{k.rstrip('_').replace('_', '-')}={quoteattr(str(v))}")
        return " ".join(out)

    def add(self, tag: str, text: str | None = None, **attrs) -> None:
        a = self._attrs(attrs)
        if text is None:
            self.parts.append(f"<{tag} {a}/>")
        else:
            self.parts.append(f"<{tag} {a}>{escape(text)}</{tag}>")

    def line(self, x1, y1, x2, y2, stroke="#000", width=1.0, **kw):
        self.add("line", x1=float(x1), y1=float(y1), x2=float(x2), y2=float(y2), stroke=stroke,
                 stroke_width=float(width), **kw)

    def rect(self, x, y, w, h, fill, stroke=None, **kw):
        self.add("rect", x=float(x), y=float(y), width=float(w), height=float(h), fill=fill,
                 stroke=stroke, **kw)

    def text(self, x, y, s, size=11, anchor="start", **kw):
        self.add("text", s, x=float(x), y=float(y), font_size=size, text_anchor=anchor,
                 font_family="sans-serif", **kw)

    def circle(self, x, y, r, fill, stroke=None):
        self.add("circle", cx=float(x), cy=float(y), r=float(r), fill=fill, stroke=stroke)

    def polyline(self, pts, stroke="#1f4e79", width=1.5):
        self.add("polyline", points=" ".join(f"{fmt(x)},{fmt(y)}" for x, y in pts), fill="none",
                 stroke=stroke, stroke_width=float(width))

    def render(self) -> str:
        head = ['<?xml version="1.0" encoding="UTF-8"?>',
                f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{fmt(self.width)}" '
                f'height="{fmt(self.height)}" viewBox="0 0 {fmt(self.width)} {fmt(self.height)}">']
        if self.title:
            head.append(f"<title>{escape(self.title)}</title>")
        if self.metadata:
            items = "".join(f"<entry key={quoteattr(str(k))}>{escape(str(v))}</entry>"
                            for k, v in sorted(self.metadata.items()))
            head.append(f'<metadata><qvsec xmlns="urn:qvsec:report">{items}</qvsec></metadata>')
        head.append('<rect x="0" y="0" width="100%" height="100%" fill="#fff"/>')
        return "\n".join(head + self.parts + ["</svg>", ""])


def read_metadata(svg_text: str) -> dict[str, str]:
    """Key/value entries written by ``Svg.render``."""
    root = ET.fromstring(svg_text.encode())
    return {e.get("key"): e.text or "" for e in root.iter("{urn:qvsec:report}entry")}


def nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10) + 0.0)
        t += step
    return ticks


class Axes:
    """Linear mapping from data space to a plot rectangle, with tick drawing."""

    def __init__(self, svg: Svg, box, xlim, ylim, margin: float = 0.0):
        self.svg = svg
        self.x0, self.y0, self.w, self.h = box
        self.xlim, self.ylim = self._pad(xlim, margin), self._pad(ylim, margin)

    @staticmethod
    def _pad(lim, margin):
        lo, hi = lim
        if hi - lo < 1e-12:
            span = max(abs(lo), 1.0) * 0.05
            return lo - span, hi + span
        span = (hi - lo) * margin
        return lo - span, hi + span

    def px(self, x):
        lo, hi = self.xlim
        return self.x0 + (x - lo) / (hi - lo) * self.w

    def py(self, y):
        lo, hi = self.ylim
        return self.y0 + self.h - (y - lo) / (hi - lo) * self.h

    def frame(self, xlabel: str, ylabel: str, xfmt="{:g}", yfmt="{:g}"):
        s = self.svg
        s.rect(self.x0, self.y0, self.w, self.h, fill="none", stroke="#000")
        for t in nice_ticks(*self.xlim):
            x = self.px(t)
            s.line(x, self.y0 + self.h, x, self.y0 + self.h + 4)
            s.line(x, self.y0, x, self.y0 + self.h, stroke="#ddd", width=0.5)
            s.text(x, self.y0 + self.h + 16, xfmt.format(t), size=10, anchor="middle")
        for t in nice_ticks(*self.ylim):
            y = self.py(t)
            s.line(self.x0 - 4, y, self.x0, y)
            s.line(self.x0, y, self.x0 + self.w, y, stroke="#ddd", width=0.5)
            s.text(self.x0 - 7, y + 3.5, yfmt.format(t), size=10, anchor="end")
        s.text(self.x0 + self.w / 2, self.y0 + self.h + 34, xlabel, size=12, anchor="middle")
        cx, cy = self.x0 - 48, self.y0 + self.h / 2
        s.text(cx, cy, ylabel, size=12, anchor="middle", transform=f"rotate(-90 {fmt(cx)} {fmt(cy)})")
