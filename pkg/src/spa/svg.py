"""Tiny native SVG figure writer for the path plots.

Emits static, deterministic SVG (paths, lines, text) with no external
renderer.  Panels map data coordinates to pixel coordinates, clip their
content, and draw simple linear axes with 1-2-5 ticks.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

GRAY = "#b8b8b8"
PALETTE = [
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#ff7f0e",
    "#9467bd",
    "#8c564b",
    "#17becf",
    "#e377c2",
]

_FONT = 'font-family="Helvetica,Arial,sans-serif"'


def _num(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    """Round tick locations covering [lo, hi] with a 1-2-5 step."""
    if not math.isfinite(lo) or not math.isfinite(hi) or hi <= lo:
        return [lo]
    raw = (hi - lo) / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


class Panel:
    def __init__(self, figure: "SvgFigure", rect, xlim, ylim, title="", xlabel="", ylabel=""):
        self.figure = figure
        self.x0, self.y0, self.width, self.height = rect
        self.xlim = xlim
        self.ylim = ylim
        self.clip_id = f"clip{len(figure.clips)}"
        figure.clips.append(
            f'<clipPath id="{self.clip_id}"><rect x="{_num(self.x0)}" y="{_num(self.y0)}" '
            f'width="{_num(self.width)}" height="{_num(self.height)}"/></clipPath>'
        )
        self._draw_frame(title, xlabel, ylabel)

    def px(self, x: float) -> float:
        lo, hi = self.xlim
        return self.x0 + (x - lo) / (hi - lo) * self.width

    def py(self, y: float) -> float:
        lo, hi = self.ylim
        return self.y0 + self.height - (y - lo) / (hi - lo) * self.height

    def _add(self, element: str):
        self.figure.elements.append(element)

    def _draw_frame(self, title, xlabel, ylabel):
        x0, y0, w, h = self.x0, self.y0, self.width, self.height
        self._add(
            f'<rect x="{_num(x0)}" y="{_num(y0)}" width="{_num(w)}" height="{_num(h)}" '
            'fill="white" stroke="black" stroke-width="1"/>'
        )
        for tick in nice_ticks(*self.xlim):
            px = self.px(tick)
            self._add(
                f'<line x1="{_num(px)}" y1="{_num(y0 + h)}" x2="{_num(px)}" y2="{_num(y0 + h + 4)}" '
                'stroke="black" stroke-width="1"/>'
            )
            self._add(
                f'<text x="{_num(px)}" y="{_num(y0 + h + 16)}" {_FONT} font-size="11" '
                f'text-anchor="middle">{_num(tick)}</text>'
            )
        for tick in nice_ticks(*self.ylim):
            py = self.py(tick)
            self._add(
                f'<line x1="{_num(x0 - 4)}" y1="{_num(py)}" x2="{_num(x0)}" y2="{_num(py)}" '
                'stroke="black" stroke-width="1"/>'
            )
            self._add(
                f'<text x="{_num(x0 - 6)}" y="{_num(py + 4)}" {_FONT} font-size="11" '
                f'text-anchor="end">{_num(tick)}</text>'
            )
        if title:
            self._add(
                f'<text x="{_num(x0 + w / 2)}" y="{_num(y0 - 8)}" {_FONT} font-size="13" '
                f'text-anchor="middle">{escape(title)}</text>'
            )
        if xlabel:
            self._add(
                f'<text x="{_num(x0 + w / 2)}" y="{_num(y0 + h + 32)}" {_FONT} font-size="12" '
                f'text-anchor="middle">{escape(xlabel)}</text>'
            )
        if ylabel:
            cx, cy = x0 - 38, y0 + h / 2
            self._add(
                f'<text x="{_num(cx)}" y="{_num(cy)}" {_FONT} font-size="12" text-anchor="middle" '
                f'transform="rotate(-90 {_num(cx)} {_num(cy)})">{escape(ylabel)}</text>'
            )

    def polyline(self, xs, ys, color="black", width=1.2, dashed=False, opacity=1.0):
        pts = " ".join(f"{_num(self.px(x))},{_num(self.py(y))}" for x, y in zip(xs, ys))
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        op = f' stroke-opacity="{opacity:g}"' if opacity != 1.0 else ""
        self._add(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="{width:g}"{dash}{op} clip-path="url(#{self.clip_id})"/>'
        )

    def vline(self, x, color="black", width=1.0, dashed=True):
        px = self.px(x)
        dash = ' stroke-dasharray="5,4"' if dashed else ""
        self._add(
            f'<line x1="{_num(px)}" y1="{_num(self.y0)}" x2="{_num(px)}" '
            f'y2="{_num(self.y0 + self.height)}" stroke="{color}" stroke-width="{width:g}"{dash}/>'
        )

    def vbar(self, x, y_lo, y_hi, color="black", width=2.0):
        px = self.px(x)
        self._add(
            f'<line x1="{_num(px)}" y1="{_num(self.py(y_lo))}" x2="{_num(px)}" '
            f'y2="{_num(self.py(y_hi))}" stroke="{color}" stroke-width="{width:g}" '
            f'clip-path="url(#{self.clip_id})"/>'
        )

    def marker(self, x, y, color="black", kind="circle", size=3.0):
        px, py = self.px(x), self.py(y)
        if kind == "circle":
            self._add(f'<circle cx="{_num(px)}" cy="{_num(py)}" r="{size:g}" fill="{color}"/>')
        elif kind == "cross":
            s = size
            self._add(
                f'<path d="M {_num(px - s)} {_num(py - s)} L {_num(px + s)} {_num(py + s)} '
                f'M {_num(px - s)} {_num(py + s)} L {_num(px + s)} {_num(py - s)}" '
                f'stroke="{color}" stroke-width="1.5" fill="none"/>'
            )
        else:
            raise ValueError(f"unknown marker kind {kind!r}")

    def label(self, x, y, text, color="black", size=11, anchor="start"):
        self._add(
            f'<text x="{_num(self.px(x))}" y="{_num(self.py(y))}" {_FONT} font-size="{size}" '
            f'fill="{color}" text-anchor="{anchor}">{escape(text)}</text>'
        )


class SvgFigure:
    def __init__(self, width: int, height: int, title: str = ""):
        self.width = width
        self.height = height
        self.elements: list[str] = []
        self.clips: list[str] = []
        if title:
            self.elements.append(
                f'<text x="{_num(width / 2)}" y="20" {_FONT} font-size="15" '
                f'text-anchor="middle">{escape(title)}</text>'
            )

    def panel(self, rect, xlim, ylim, title="", xlabel="", ylabel="") -> Panel:
        return Panel(self, rect, xlim, ylim, title, xlabel, ylabel)

    def legend(self, x, y, entries):
        """entries: list of (label, color); drawn as swatch lines plus text."""
        for k, (label, color) in enumerate(entries):
            yy = y + 16 * k
            self.elements.append(
                f'<line x1="{_num(x)}" y1="{_num(yy - 4)}" x2="{_num(x + 22)}" y2="{_num(yy - 4)}" '
                f'stroke="{color}" stroke-width="2"/>'
            )
            self.elements.append(
                f'<text x="{_num(x + 28)}" y="{_num(yy)}" {_FONT} font-size="11">{escape(label)}</text>'
            )

    def to_string(self) -> str:
        parts = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">',
            "<defs>",
            *self.clips,
            "</defs>",
            f'<rect width="{self.width}" height="{self.height}" fill="white"/>',
            *self.elements,
            "</svg>",
        ]
        return "\n".join(parts) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_string())
