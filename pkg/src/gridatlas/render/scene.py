"""Scene graph of styled primitives and its deterministic SVG serialization."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .projection import Projection

from .. import __version__ as ENGINE_VERSION

PALETTES = {
    "blues": ("#f7fbff", "#deebf7", "#c6dbef", "#9ecae1", "#6baed6",
              "#4292c6", "#2171b5", "#08519c", "#08306b"),
    "oranges": ("#fff5eb", "#fee6ce", "#fdd0a2", "#fdae6b", "#fd8d3c",
                "#f16913", "#d94801", "#a63603", "#7f2704"),
    "reds": ("#fff5f0", "#fee0d2", "#fcbba1", "#fc9272", "#fb6a4a",
             "#ef3b2c", "#cb181d", "#a50f15", "#67000d"),
    "greys": ("#ffffff", "#f0f0f0", "#d9d9d9", "#bdbdbd", "#969696",
              "#737373", "#525252", "#252525", "#000000"),
    "purples": ("#fcfbfd", "#efedf5", "#dadaeb", "#bcbddc", "#9e9ac8",
                "#807dba", "#6a51a3", "#54278f", "#3f007d"),
}
NO_POPULATION = "#e8e4d8"
MISSING = "#ff00ff"


def ramp(name: str, k: int) -> list[str]:
    """``k`` colours picked evenly from a fixed named ramp (lightest step skipped)."""
    try:
        stops = PALETTES[name]
    except KeyError:
        raise ValueError(f"unknown palette {name!r}; choose from {sorted(PALETTES)}") from None
    if k == 1:
        return [stops[-3]]
    idx = np.round(np.linspace(1, len(stops) - 1, k)).astype(int)
    return [stops[i] for i in idx]


def fmt(v: float) -> str:
    s = f"{float(v):.3f}"
    return "0.000" if s == "-0.000" else s


@dataclass(frozen=True)
class Style:
    fill: str = "none"
    stroke: str = "none"
    stroke_width: float = 1.0
    opacity: float = 1.0
    fill_rule: str = ""

    def attrs(self) -> str:
        out = [f'fill="{self.fill}"', f'stroke="{self.stroke}"']
        if self.stroke != "none":
            out.append(f'stroke-width="{fmt(self.stroke_width)}"')
        if self.opacity != 1.0:
            out.append(f'opacity="{fmt(self.opacity)}"')
        if self.fill_rule:
            out.append(f'fill-rule="{self.fill_rule}"')
        return " ".join(out)


def _meta_attrs(meta) -> str:
    if not meta:
        return ""
    parts = []
    for k in sorted(meta):
        v = meta[k]
        if isinstance(v, float):
            v = fmt(v) if math.isfinite(v) else str(v)
        parts.append(f" data-{k}={quoteattr(str(v))}")
    return "".join(parts)


def _path_d(rings, closed=True) -> str:
    out = []
    for ring in rings:
        pts = np.asarray(ring, dtype=float)
        if closed and len(pts) > 1 and np.array_equal(pts[0], pts[-1]):
            pts = pts[:-1]
        seg = " ".join(f"{fmt(x)},{fmt(y)}" for x, y in pts)
        out.append(f"M{seg}{'Z' if closed else ''}")
    return "".join(out)


@dataclass(frozen=True, eq=False)
class Polygon:
    rings: tuple
    style: Style = Style(fill="#cccccc")
    meta: dict = field(default_factory=dict)

    def coords(self):
        return np.concatenate([np.asarray(r, dtype=float) for r in self.rings])

    def svg(self) -> str:
        return f'<path d="{_path_d(self.rings)}" {self.style.attrs()}{_meta_attrs(self.meta)}/>'


@dataclass(frozen=True, eq=False)
class Polyline:
    points: np.ndarray
    style: Style = Style(stroke="#333333")
    meta: dict = field(default_factory=dict)
    closed: bool = False

    def coords(self):
        return np.asarray(self.points, dtype=float)

    def svg(self) -> str:
        d = _path_d([self.points], closed=self.closed)
        return f'<path d="{d}" {self.style.attrs()}{_meta_attrs(self.meta)}/>'


@dataclass(frozen=True, eq=False)
class Circle:
    cx: float
    cy: float
    r: float
    style: Style = Style(fill="#d7301f", stroke="#ffffff", stroke_width=0.5)
    meta: dict = field(default_factory=dict)

    def coords(self):
        return np.array([[self.cx, self.cy]])

    def svg(self) -> str:
        return (f'<circle cx="{fmt(self.cx)}" cy="{fmt(self.cy)}" r="{fmt(self.r)}" '
                f'{self.style.attrs()}{_meta_attrs(self.meta)}/>')


@dataclass(frozen=True, eq=False)
class Text:
    x: float
    y: float
    text: str
    size: float = 12.0
    anchor: str = "start"
    style: Style = Style(fill="#222222")
    meta: dict = field(default_factory=dict)

    def coords(self):
        return np.array([[self.x, self.y]])

    def svg(self) -> str:
        return (f'<text x="{fmt(self.x)}" y="{fmt(self.y)}" font-size="{fmt(self.size)}" '
                f'font-family="sans-serif" text-anchor="{self.anchor}" '
                f'{self.style.attrs()}{_meta_attrs(self.meta)}>{escape(self.text)}</text>')


@dataclass(frozen=True, eq=False)
class Prism:
    """Extruded polygon drawn as side faces then the top face."""

    faces: tuple
    meta: dict = field(default_factory=dict)

    @property
    def top(self) -> Polygon:
        return self.faces[-1]

    @property
    def sides(self) -> tuple:
        return self.faces[:-1]

    def coords(self):
        return np.concatenate([f.coords() for f in self.faces])

    def svg(self) -> str:
        inner = "".join(f.svg() for f in self.faces)
        return f"<g{_meta_attrs(self.meta)}>{inner}</g>"


@dataclass(frozen=True, eq=False)
class Layer:
    name: str
    items: tuple = ()
    projection: Projection | None = None

    def svg(self) -> str:
        body = "\n".join(item.svg() for item in self.items)
        return f'<g id={quoteattr(self.name)}>\n{body}\n</g>' if body else \
            f'<g id={quoteattr(self.name)}/>'


@dataclass(frozen=True)
class LegendEntry:
    value: float
    label: str
    color: str = ""
    size: float = 0.0  # radius, stroke width or bar height in px
    count: int | None = None


@dataclass(frozen=True)
class Legend:
    kind: str  # circles-nested | class-boxes | line-weight | height-bar
    entries: tuple
    title: str = ""

    def __post_init__(self):
        if self.kind not in ("circles-nested", "class-boxes", "line-weight", "height-bar"):
            raise ValueError(f"unknown legend kind {self.kind!r}")

    def svg(self, x0: float, y0: float) -> str:
        out = [f'<g id="legend" data-kind="{self.kind}">']
        if self.title:
            out.append(Text(x0, y0, self.title, 12.0).svg())
        y = y0 + 8
        if self.kind == "circles-nested":
            rmax = max((e.size for e in self.entries), default=0.0)
            base = y + 2 * rmax
            cx = x0 + rmax
            for e in sorted(self.entries, key=lambda e: -e.value):
                out.append(Circle(cx, base - e.size, e.size,
                                  Style(fill="none", stroke="#333333", stroke_width=0.8)).svg())
                out.append(Polyline(np.array([[cx, base - 2 * e.size],
                                              [cx + rmax + 6, base - 2 * e.size]]),
                                    Style(stroke="#333333", stroke_width=0.5)).svg())
                out.append(Text(cx + rmax + 8, base - 2 * e.size + 4, e.label, 10.0).svg())
        elif self.kind == "class-boxes":
            for e in self.entries:
                meta = {"value": e.value}
                if e.count is not None:
                    meta["count"] = e.count
                out.append(Polygon((np.array([[x0, y], [x0 + 14, y], [x0 + 14, y + 10],
                                              [x0, y + 10], [x0, y]]),),
                                   Style(fill=e.color or "#cccccc", stroke="#555555",
                                         stroke_width=0.4), meta).svg())
                out.append(Text(x0 + 20, y + 9, e.label, 10.0).svg())
                y += 14
        elif self.kind == "line-weight":
            for e in self.entries:
                out.append(Polyline(np.array([[x0, y + 5], [x0 + 30, y + 5]]),
                                    Style(stroke=e.color or "#333333",
                                          stroke_width=e.size)).svg())
                out.append(Text(x0 + 36, y + 9, e.label, 10.0).svg())
                y += 14
        else:
            hmax = max((e.size for e in self.entries), default=0.0)
            xx = x0
            for e in self.entries:
                top = y + hmax - e.size
                out.append(Polygon((np.array([[xx, top], [xx + 10, top], [xx + 10, y + hmax],
                                              [xx, y + hmax], [xx, top]]),),
                                   Style(fill=e.color or "#888888")).svg())
                out.append(Text(xx + 5, y + hmax + 12, e.label, 9.0, "middle").svg())
                xx += 40
        out.append("</g>")
        return "\n".join(out)


@dataclass(frozen=True, eq=False)
class Scene:
    projection: Projection
    layers: tuple = ()
    legend: Legend | None = None
    provenance: dict = field(default_factory=dict)
    title: str = ""
    notes: dict = field(default_factory=dict)
    legend_band: float = 110.0

    @property
    def viewbox(self):
        x, y, w, h = self.projection.frame
        return (x, y, w, h + self.legend_band)

    @property
    def width(self) -> float:
        return self.viewbox[2]

    @property
    def height(self) -> float:
        return self.viewbox[3]

    def layer(self, name: str) -> Layer:
        for lyr in self.layers:
            if lyr.name == name:
                return lyr
        raise KeyError(name)

    def primitives(self):
        for lyr in self.layers:
            yield from lyr.items

    def with_layers(self, *layers: Layer) -> "Scene":
        return replace(self, layers=self.layers + tuple(layers))

    def check(self, margin: float | None = None) -> None:
        """Raise ``ValueError`` on non-finite or far out-of-frame coordinates."""
        x, y, w, h = self.viewbox
        m = max(w, h) if margin is None else margin
        for item in self.primitives():
            c = item.coords()
            if c.size and not np.all(np.isfinite(c)):
                raise ValueError(f"non-finite coordinates in {type(item).__name__}")
            if c.size and (c[:, 0].min() < x - m or c[:, 0].max() > x + w + m
                           or c[:, 1].min() < y - m or c[:, 1].max() > y + h + m):
                raise ValueError(f"{type(item).__name__} lies outside the frame")


def _provenance_comment(prov: dict) -> str:
    body = json.dumps(prov, sort_keys=True, ensure_ascii=True, default=str)
    while "--" in body:
        body = body.replace("--", "-\\u002d")
    return f"<!-- provenance {body} -->"


def emit_svg(scene: Scene) -> str:
    """Serialize a scene to an SVG 1.1 document. Identical scenes give identical bytes."""
    scene.check()
    x, y, w, h = scene.viewbox
    fx, fy, fw, fh = scene.projection.frame
    prov = {"engine_version": ENGINE_VERSION}
    prov.update(scene.provenance)
    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        _provenance_comment(prov),
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{fmt(w)}" '
        f'height="{fmt(h)}" viewBox="{fmt(x)} {fmt(y)} {fmt(w)} {fmt(h)}">',
    ]
    if scene.title:
        out.append(f"<title>{escape(scene.title)}</title>")
    out.append(f'<rect id="frame" x="{fmt(fx)}" y="{fmt(fy)}" width="{fmt(fw)}" '
               f'height="{fmt(fh)}" fill="#ffffff" stroke="#999999" stroke-width="0.500"/>')
    for lyr in scene.layers:
        out.append(lyr.svg())
    if scene.legend is not None:
        out.append(scene.legend.svg(fx + 10, fy + fh + 18))
    out.append("</svg>")
    return "\n".join(out) + "\n"
