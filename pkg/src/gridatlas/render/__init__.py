"""Scene construction and SVG output for every map kind."""

from .maps import (
    SymbolScale,
    basemap_layer,
    dorling_layout,
    dot_positions,
    isoline_layer,
    link_layer,
    mask_layer,
    prism_order,
    render_choropleth,
    render_dorling,
    render_dots,
    render_hex_extrusion,
    render_linemap,
    render_overlay,
    render_prop_circles,
    zone_polygons,
)
from .projection import Projection, project, project_path, project_ring, unproject
from .scene import (
    ENGINE_VERSION,
    PALETTES,
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
    emit_svg,
    ramp,
)

__all__ = [
    "Circle",
    "ENGINE_VERSION",
    "Layer",
    "Legend",
    "LegendEntry",
    "PALETTES",
    "Projection",
    "Polygon",
    "Polyline",
    "Prism",
    "Scene",
    "Style",
    "SymbolScale",
    "Text",
    "basemap_layer",
    "dorling_layout",
    "dot_positions",
    "emit_svg",
    "isoline_layer",
    "link_layer",
    "mask_layer",
    "prism_order",
    "project",
    "project_path",
    "project_ring",
    "ramp",
    "render_choropleth",
    "render_dorling",
    "render_dots",
    "render_hex_extrusion",
    "render_linemap",
    "render_overlay",
    "render_prop_circles",
    "unproject",
    "zone_polygons",
]
