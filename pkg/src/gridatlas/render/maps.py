"""Scene builders for each map representation."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from ..analysis import HexLayer, LinkSet
from ..classify import ClassBreaks, classify_array
from ..errors import CompositionError, ParameterError
from ..grid import PopGrid
from ..isolines import IsolineSet
from ..vector import POLYGON, ZoneLayer
from .projection import Projection, project_path, project_ring
from .scene import (
    MISSING,
    NO_POPULATION,
    Circle,
    Layer,
    Legend,
    LegendEntry,
    Polygon,
    Polyline,
    Prism,
    Scene,
    Style,
    Text,
    ramp,
)

BASEMAP_STYLE = Style(fill="#f2efe6", stroke="#b5ad9a", stroke_width=0.3)


@dataclass(frozen=True)
class SymbolScale:
    """Circle area proportional to value: ``ref_value`` is drawn with ``ref_radius`` px."""

    ref_value: float
    ref_radius: float

    def __post_init__(self):
        if not self.ref_value > 0 or not self.ref_radius > 0:
            raise ParameterError("symbol scale needs positive reference value and radius")

    def radius(self, v):
        return self.ref_radius * np.sqrt(np.asarray(v, dtype=float) / self.ref_value)

    def legend_values(self, vmax: float, n: int = 3) -> list[float]:
        """Rounded values from ``vmax`` downwards, each about a quarter of the last."""
        out = []
        v = vmax
        for _ in range(n):
            if v <= 0:
                break
            mag = 10 ** math.floor(math.log10(v))
            out.append(math.floor(v / mag) * mag)
            v = out[-1] / 4.0
        return sorted(set(out))


def _fmt_count(v: float) -> str:
    if v >= 1e9:
        return f"{v / 1e9:g} bn"
    if v >= 1e6:
        return f"{v / 1e6:g} M"
    if v >= 1e3:
        return f"{v / 1e3:g} k"
    return f"{v:g}"


def _scene(proj: Projection, provenance=None, **kw) -> Scene:
    return Scene(proj, provenance=dict(provenance or {}), **kw)


def zone_polygons(zones: ZoneLayer, proj: Projection, style=BASEMAP_STYLE, styles=None,
                  meta=None):
    """One projected polygon per zone part (split at the seam when needed)."""
    styles = styles or {}
    meta = meta or {}
    items = []
    for f in zones:
        if f.kind != POLYGON:
            continue
        st = replace(styles.get(f.id, style), fill_rule="evenodd")
        for poly in f.parts:
            rings = [piece for ring in poly for piece in project_ring(ring, proj)]
            if rings:
                items.append(Polygon(tuple(rings), st, {"id": f.id, **meta.get(f.id, {})}))
    return items


def basemap_layer(zones: ZoneLayer | None, proj: Projection, name="basemap") -> list[Layer]:
    if zones is None:
        return []
    return [Layer(name, tuple(zone_polygons(zones, proj)), proj)]


def _cell_runs(mask_row):
    """(start, stop) column runs where ``mask_row`` is True."""
    padded = np.concatenate([[False], mask_row, [False]])
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return list(zip(edges[::2], edges[1::2]))


def _cell_rect(grid: PopGrid, row, c0, c1, proj: Projection):
    h = grid.header
    west = h.xll + c0 * h.cellsize
    east = h.xll + c1 * h.cellsize
    north = h.ymax - row * h.cellsize
    south = north - h.cellsize
    ring = np.array([[west, south], [east, south], [east, north], [west, north], [west, south]])
    return project_ring(ring, proj)


# --- proportional circles ----------------------------------------------------

def render_prop_circles(values, anchors, scale: SymbolScale, proj: Projection = Projection(),
                        ids=None, basemap: ZoneLayer | None = None, title="",
                        provenance=None) -> Scene:
    """Circles sized by the square-root law, largest drawn first; zeros omitted."""
    values = np.asarray(values, dtype=float)
    if np.any(values < 0):
        raise ParameterError("values must be >= 0")
    ids = list(ids) if ids is not None else [str(i) for i in range(len(values))]
    order = np.argsort(-values, kind="stable")
    items = []
    for k in order:
        v = values[k]
        if v <= 0:
            continue
        x, y = proj.xy(anchors[k][0], anchors[k][1])
        items.append(Circle(float(x), float(y), float(scale.radius(v)),
                            meta={"id": ids[k], "value": float(v)}))
    vmax = float(values.max()) if len(values) else 0.0
    entries = tuple(LegendEntry(v, _fmt_count(v), size=float(scale.radius(v)))
                    for v in scale.legend_values(vmax))
    legend = Legend("circles-nested", entries, "Population")
    layers = basemap_layer(basemap, proj) + [Layer("circles", tuple(items), proj)]
    return _scene(proj, provenance, layers=tuple(layers), legend=legend, title=title,
                  notes={"scale": vars(scale)})


# --- choropleth ----------------------------------------------------------------

def _class_styles(breaks: ClassBreaks, palette: str):
    colors = ramp(palette, breaks.k)
    return [Style(fill=c, stroke="none") for c in colors], colors


def render_choropleth(target, densities, breaks: ClassBreaks, palette: str = "oranges",
                      proj: Projection = Projection(), title="", provenance=None) -> Scene:
    """Fill zones (a ``ZoneLayer``) or grid cells (a ``PopGrid``) by density class.

    Zero densities form a separate "no population" class; NaN is drawn in the
    missing style. Legend entries carry the number of items per class.
    """
    styles, colors = _class_styles(breaks, palette)
    nopop = Style(fill=NO_POPULATION)
    missing = Style(fill="none", stroke=MISSING, stroke_width=0.6)
    items = []
    if isinstance(target, PopGrid):
        dens = np.asarray(densities, dtype=float)
        if dens.shape != target.header.shape:
            raise ParameterError("densities must match the grid shape")
        land = target.land
        vals = np.where(land, dens, np.nan)
        cls = classify_array(vals, breaks)
        code = np.where(~land, -3, np.where(np.isnan(dens), -1, np.where(vals == 0, -2, cls)))
        flat = code[land]
        for row in range(target.header.nrows):
            rc = code[row]
            for c in np.unique(rc[rc != -3]):
                st = styles[c] if c >= 0 else (nopop if c == -2 else missing)
                for c0, c1 in _cell_runs(rc == c):
                    for ring in _cell_rect(target, row, c0, c1, proj):
                        items.append(Polygon((ring,), st, {"class": int(c)}))
    else:
        target.require(POLYGON)
        dens = np.asarray(densities, dtype=float)
        if dens.size != len(target):
            raise ParameterError("one density per zone required")
        cls = classify_array(dens, breaks)
        flat = np.where(np.isnan(dens), -1, np.where(dens == 0, -2, cls))
        per_zone = {}
        for f, c in zip(target, flat):
            per_zone[f.id] = styles[c] if c >= 0 else (nopop if c == -2 else missing)
        items = zone_polygons(target, proj, styles=per_zone,
                              meta={f.id: {"class": int(c)} for f, c in zip(target, flat)})
    counts = np.bincount(flat[flat >= 0].astype(int), minlength=breaks.k)
    labels = breaks.labels("{:,.1f}" if breaks.edges[-1] < 100 else "{:,.0f}")
    entries = [LegendEntry(lo, lbl, col, count=int(n))
               for lo, lbl, col, n in zip(breaks.edges, labels, colors, counts)]
    if np.any(flat == -2):
        entries.insert(0, LegendEntry(0.0, "no population", NO_POPULATION,
                                      count=int((flat == -2).sum())))
    if np.any(flat == -1):
        entries.append(LegendEntry(float("nan"), "missing", MISSING,
                                   count=int((flat == -1).sum())))
    legend = Legend("class-boxes", tuple(entries), "Density (per km²)")
    return _scene(proj, provenance, layers=(Layer("choropleth", tuple(items), proj),),
                  legend=legend, title=title,
                  notes={"breaks": list(breaks.edges), "method": breaks.method,
                         "class_counts": counts.tolist()})


# --- dots -----------------------------------------------------------------------

def dot_positions(grid: PopGrid, pop_per_dot: float, seed: int, n_jobs: int = 1):
    """Random dot locations (lon, lat arrays), reproducible per cell.

    Each cell draws from its own generator seeded with ``(seed, row, col)``,
    so the result does not depend on iteration order or thread count.
    """
    if not pop_per_dot > 0:
        raise ParameterError("pop_per_dot must be > 0")
    h = grid.header
    rows, cols, _, _, vals = grid.land_cells()

    def work(sel):
        lons, lats = [], []
        for r, c, v in zip(rows[sel], cols[sel], vals[sel]):
            if v <= 0:
                continue
            rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, int(r), int(c)])
            q = v / pop_per_dot
            n = int(math.floor(q)) + int(rng.random() < q - math.floor(q))
            if n == 0:
                continue
            u = rng.random((n, 2))
            lons.append(h.xll + (c + u[:, 0]) * h.cellsize)
            lats.append(h.ymax - (r + 1 - u[:, 1]) * h.cellsize)
        if not lons:
            return np.zeros(0), np.zeros(0)
        return np.concatenate(lons), np.concatenate(lats)

    chunks = np.array_split(np.arange(len(vals)), max(1, n_jobs * 4)) if len(vals) else []
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as ex:
            parts = list(ex.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    if not parts:
        return np.zeros(0), np.zeros(0)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def render_dots(grid: PopGrid, pop_per_dot: float, seed: int, proj: Projection = Projection(),
                dot_radius: float = 0.35, n_jobs: int = 1, basemap: ZoneLayer | None = None,
                title="", provenance=None) -> Scene:
    lon, lat = dot_positions(grid, pop_per_dot, seed, n_jobs)
    x, y = proj.xy(lon, lat)
    style = Style(fill="#3b3b3b")
    items = tuple(Circle(float(a), float(b), dot_radius, style) for a, b in zip(x, y))
    legend = Legend("class-boxes", (LegendEntry(pop_per_dot, f"1 dot = {_fmt_count(pop_per_dot)}"
                                                f" persons", "#3b3b3b"),), "Dot density")
    layers = basemap_layer(basemap, proj) + [Layer("dots", items, proj)]
    return _scene(proj, provenance, layers=tuple(layers), legend=legend, title=title,
                  notes={"dots": len(items), "seed": seed, "pop_per_dot": pop_per_dot})


# --- Dorling -------------------------------------------------------------------

def dorling_layout(x, y, r, max_iter: int = 200, tol: float = 0.1, damping: float = 0.5):
    """Push overlapping circles apart, pair by pair in ascending (i, j) order.

    Each overlapping pair moves apart along the line of centres, each circle by
    half the overlap times ``damping``. Coincident centres separate along +x.
    Returns ``(x, y, iterations, converged, max_overlap)``.
    """
    x = np.array(x, dtype=float)
    y = np.array(y, dtype=float)
    r = np.asarray(r, dtype=float)
    if max_iter < 0:
        raise ParameterError("max_iter must be >= 0")
    n = len(x)
    rmax = float(r.max()) if n else 0.0
    it = 0
    worst = 0.0
    while True:
        if n < 2:
            return x, y, it, True, 0.0
        pairs = cKDTree(np.column_stack([x, y])).query_pairs(2 * rmax, output_type="ndarray")
        if len(pairs):
            pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
            d = np.hypot(x[pairs[:, 1]] - x[pairs[:, 0]], y[pairs[:, 1]] - y[pairs[:, 0]])
            worst = float(np.max(r[pairs[:, 0]] + r[pairs[:, 1]] - d))
        else:
            worst = 0.0
        if worst <= tol:
            return x, y, it, True, max(worst, 0.0)
        if it >= max_iter:
            return x, y, it, False, worst
        for i, j in pairs.tolist():
            dx, dy = x[j] - x[i], y[j] - y[i]
            d = math.hypot(dx, dy)
            overlap = r[i] + r[j] - d
            if overlap <= 0:
                continue
            ux, uy = (dx / d, dy / d) if d > 0 else (1.0, 0.0)
            step = 0.5 * overlap * damping
            x[i] -= ux * step
            y[i] -= uy * step
            x[j] += ux * step
            y[j] += uy * step
        it += 1


def render_dorling(blocks: PopGrid, scale: SymbolScale, max_iter: int = 200,
                   proj: Projection = Projection(), basemap: ZoneLayer | None = None,
                   title="", provenance=None) -> Scene:
    """Proportional circles on block centres, displaced until they no longer overlap."""
    _, _, lon, lat, vals = blocks.land_cells()
    keep = vals > 0
    lon, lat, vals = lon[keep], lat[keep], vals[keep]
    x0, y0 = proj.xy(lon, lat)
    r = scale.radius(vals)
    x, y, iters, converged, worst = dorling_layout(x0, y0, r, max_iter)
    order = np.argsort(-vals, kind="stable")
    items = tuple(Circle(float(x[k]), float(y[k]), float(r[k]),
                         Style(fill="#6a51a3", stroke="#ffffff", stroke_width=0.4, opacity=0.9),
                         {"value": float(vals[k])}) for k in order)
    entries = tuple(LegendEntry(v, _fmt_count(v), size=float(scale.radius(v)))
                    for v in scale.legend_values(float(vals.max()) if len(vals) else 0.0))
    layers = basemap_layer(basemap, proj) + [Layer("dorling", items, proj)]
    notes = {"iterations": iters, "converged": converged, "max_overlap_px": worst}
    if not converged:
        layers.append(Layer("diagnostics", (Text(proj.frame[0] + 6, proj.frame[1] + 14,
                                                 f"layout not converged after {iters} "
                                                 f"iterations (overlap {worst:.2f} px)", 9.0),),
                            proj))
    return _scene(proj, provenance, layers=tuple(layers),
                  legend=Legend("circles-nested", entries, "Population"), title=title,
                  notes=notes)


# --- hex prisms -------------------------------------------------------------------

def _shade(hex_color: str, factor: float) -> str:
    c = hex_color.lstrip("#")
    rgb = [int(c[i:i + 2], 16) for i in (0, 2, 4)]
    return "#" + "".join(f"{max(0, min(255, int(round(v * factor)))):02x}" for v in rgb)


def prism_order(hexes: HexLayer):
    """Back-to-front order: north first (descending plane y), then west to east."""
    return sorted(hexes.cells, key=lambda c: (-c.y, c.x))


def render_hex_extrusion(hexes: HexLayer, height_scale: float, proj: Projection = Projection(),
                         color: str = "#4a6fa5", basemap: ZoneLayer | None = None,
                         title="", provenance=None) -> Scene:
    """Oblique hexagonal prisms whose height is ``height_scale`` px per person."""
    if not height_scale > 0:
        raise ParameterError("height_scale must be > 0")
    side_styles = [Style(fill=_shade(color, f), stroke=_shade(color, 0.4), stroke_width=0.2)
                   for f in (0.55, 0.7, 0.85)]
    top_style = Style(fill=color, stroke=_shade(color, 0.5), stroke_width=0.2)
    items = []
    for cell in prism_order(hexes):
        corners = np.array(hexes.corners(cell.q, cell.r) + [hexes.corners(cell.q, cell.r)[0]])
        bx, by = proj.xy(corners[:, 0], corners[:, 1])
        base = np.column_stack([bx, by])
        h = height_scale * cell.value
        top = base - [0.0, h]
        meta = {"q": cell.q, "r": cell.r, "value": cell.value, "height": h}
        if h <= 0:
            items.append(Prism((Polygon((base,), top_style),), meta))
            continue
        faces = []
        for s, k in enumerate((3, 4, 5)):
            quad = np.array([base[k], base[k + 1], top[k + 1], top[k], base[k]])
            faces.append(Polygon((quad,), side_styles[s]))
        faces.append(Polygon((top,), top_style))
        items.append(Prism(tuple(faces), meta))
    vmax = max((c.value for c in hexes.cells), default=0.0)
    entries = tuple(LegendEntry(v, _fmt_count(v), color, height_scale * v)
                    for v in sorted({vmax, vmax / 2, vmax / 4}) if v > 0)
    layers = basemap_layer(basemap, proj) + [Layer("prisms", tuple(items), proj)]
    return _scene(proj, provenance, layers=tuple(layers),
                  legend=Legend("height-bar", entries, "Population per hexagon"), title=title,
                  notes={"hexagons": len(items), "height_scale": height_scale})


# --- linemap ------------------------------------------------------------------------

def render_linemap(grid: PopGrid, amplitude: float, proj: Projection = Projection(),
                   title="", provenance=None) -> Scene:
    """One ridge line per row, north to south, each over an opaque fill that hides rows behind."""
    if not amplitude > 0:
        raise ParameterError("amplitude must be > 0")
    vals = grid.filled(0.0)
    vmax = float(vals.max()) if vals.size else 0.0
    xs, _ = proj.xy(grid.header.lons(), np.zeros(grid.header.ncols))
    items = []
    fill = Style(fill="#ffffff")
    line = Style(stroke="#1a1a1a", stroke_width=0.5)
    for row, lat in enumerate(grid.header.lats()):
        _, base = proj.xy(0.0, lat)
        offs = amplitude * vals[row] / vmax if vmax > 0 else np.zeros_like(xs)
        pts = np.column_stack([xs, base - offs])
        ring = np.vstack([pts, [[xs[-1], base], [xs[0], base], pts[0]]])
        items.append(Polygon((ring,), fill, {"row": row}))
        items.append(Polyline(pts, line, {"row": row}))
    legend = Legend("line-weight", (LegendEntry(vmax, f"peak = {_fmt_count(vmax)} persons",
                                                size=0.5),), "Population per cell")
    return _scene(proj, provenance, layers=(Layer("linemap", tuple(items), proj),),
                  legend=legend, title=title, notes={"amplitude": amplitude, "max": vmax})


# --- overlays -----------------------------------------------------------------------

def isoline_layer(isolines: IsolineSet, proj: Projection, palette="reds") -> Layer:
    colors = ramp(palette, max(1, len(isolines.levels)))
    cmap = dict(zip(isolines.levels, colors))
    items = []
    for ln in isolines.lines:
        for piece in project_path(ln.coords, proj):
            items.append(Polyline(piece, Style(stroke=cmap[ln.level], stroke_width=0.8),
                                  {"level": ln.level}, closed=False))
    return Layer("isolines", tuple(items), proj)


def link_layer(links: LinkSet, proj: Projection, scale_width=False, max_width=2.0) -> Layer:
    items = []
    mmax = float(links.mass.max()) if len(links.mass) else 1.0
    for i, j, d in links.edges:
        w = 0.4
        if scale_width:
            w = max(0.2, max_width * min(links.mass[i], links.mass[j]) / mmax)
        pts = np.array([[links.lon[i], links.lat[i]], [links.lon[j], links.lat[j]]])
        for piece in project_path(pts, proj):
            items.append(Polyline(piece, Style(stroke="#b2182b", stroke_width=w, opacity=0.7),
                                  {"i": i, "j": j, "distance_km": d}))
    return Layer("links", tuple(items), proj)


def mask_layer(mask: PopGrid, proj: Projection, inverted=False, color="#08519c") -> Layer:
    """Cells equal to 1 filled; ``inverted`` fills the other land cells instead (voids stay blank)."""
    items = []
    on = mask.filled(np.nan) == (0.0 if inverted else 1.0)
    style = Style(fill="#2b2b2b" if inverted else color)
    for row in range(mask.header.nrows):
        for c0, c1 in _cell_runs(on[row]):
            for ring in _cell_rect(mask, row, c0, c1, proj):
                items.append(Polygon((ring,), style))
    return Layer("voids" if inverted else "mask", tuple(items), proj)


def render_overlay(base: Scene, extras, style: dict | None = None,
                   proj: Projection | None = None) -> Scene:
    """Append overlay layers above the base layers (the legend stays on top).

    ``extras`` may hold ``IsolineSet``, ``LinkSet``, a 0/1 mask ``PopGrid``,
    a ``ZoneLayer`` or ready-made ``Layer`` objects.
    """
    style = style or {}
    if proj is not None and proj != base.projection:
        raise CompositionError("overlay projection differs from the base scene")
    p = base.projection
    layers = []
    for extra in extras or ():
        if isinstance(extra, Layer):
            if extra.projection is not None and extra.projection != p:
                raise CompositionError(f"layer {extra.name!r} uses another projection")
            layers.append(extra)
        elif isinstance(extra, IsolineSet):
            layers.append(isoline_layer(extra, p, style.get("palette", "reds")))
        elif isinstance(extra, LinkSet):
            layers.append(link_layer(extra, p, style.get("scale_width", False)))
        elif isinstance(extra, PopGrid):
            layers.append(mask_layer(extra, p, style.get("inverted", False)))
        elif isinstance(extra, ZoneLayer):
            zstyle = Style(fill=style.get("fill", "#fdae6b"), stroke="#7f2704",
                           stroke_width=0.3, opacity=style.get("opacity", 1.0))
            layers.append(Layer("zones", tuple(zone_polygons(extra, p, zstyle)), p))
        else:
            raise CompositionError(f"cannot overlay {type(extra).__name__}")
    return base.with_layers(*layers)
