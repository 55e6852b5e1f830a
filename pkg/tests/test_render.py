import json
import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridatlas import __version__
from gridatlas.analysis import HexCell, HexLayer, hex_bin, link_nodes
from gridatlas.classify import breaks_geometric, classify_array
from gridatlas.errors import CompositionError, ParameterError
from gridatlas.grid import PopGrid
from gridatlas.isolines import extract_isolines
from gridatlas.render import (
    Layer,
    Projection,
    Scene,
    SymbolScale,
    dorling_layout,
    dot_positions,
    emit_svg,
    prism_order,
    render_choropleth,
    render_dots,
    render_hex_extrusion,
    render_linemap,
    render_overlay,
    render_prop_circles,
)
from gridatlas.render.projection import project, project_ring, unproject
from gridatlas.vector import ZoneLayer

from conftest import box_zone, random_grid

SVG = "{http://www.w3.org/2000/svg}"


def parse_svg(text):
    root = ET.fromstring(text.encode())
    assert root.tag == SVG + "svg"
    return root


def provenance_of(text):
    m = re.search(r"<!-- provenance (.*?) -->", text)
    return json.loads(m.group(1))


def test_projection_examples():
    p = Projection(scale=2.0)
    assert project((90, -45), p) == (180.0, 90.0)
    assert project((0, 0), p) == (0.0, 0.0)
    assert p.frame == (-360.0, -180.0, 720.0, 360.0)
    with pytest.raises(ValueError):
        Projection(kind="mercator")


@given(st.floats(-179.99, 179.99), st.floats(-90, 90), st.floats(-170, 170))
def test_projection_round_trip(lon, lat, center):
    p = Projection(scale=1.5, center_lon=center)
    back = unproject(project((lon, lat), p), p)
    assert back[0] == pytest.approx(lon, abs=1e-9)
    assert back[1] == pytest.approx(lat, abs=1e-9)


def test_ring_split_at_seam():
    ring = np.array([[170, 0], [-170, 0], [-170, 10], [170, 10], [170, 0]], float)
    pieces = project_ring(ring, Projection(scale=1.0))
    assert len(pieces) == 2
    for p in pieces:
        assert p[:, 0].min() >= -180 - 1e-9 and p[:, 0].max() <= 180 + 1e-9


@given(st.floats(1.0, 1e9), st.floats(1.1, 100.0))
def test_sqrt_law(v, k):
    s = SymbolScale(1e6, 20.0)
    assert float(s.radius(k * v)) == pytest.approx(np.sqrt(k) * float(s.radius(v)), rel=1e-12)
    a1, a2 = np.pi * s.radius(v) ** 2, np.pi * s.radius(k * v) ** 2
    assert a2 / a1 == pytest.approx(k, rel=1e-12)


def test_circles_radii_and_order():
    s = SymbolScale(4e6, 20.0)
    scene = render_prop_circles([1e6, 4e6, 0.0], [(10, 10), (20, 20), (0, 0)], s,
                                ids=["a", "b", "c"])
    circles = scene.layer("circles").items
    assert [c.r for c in circles] == [20.0, 10.0]
    assert [c.meta["id"] for c in circles] == ["b", "a"]
    with pytest.raises(ParameterError):
        render_prop_circles([-1.0], [(0, 0)], s)
    with pytest.raises(ParameterError):
        SymbolScale(0, 1)


def test_choropleth_counts_match_classes(rng):
    g = random_grid(rng, 18, 36, scale=1e4)
    vals = g.values.copy()
    vals[g.land & (rng.random(vals.shape) < 0.1)] = 0.0
    g = PopGrid(g.header, vals)
    pos = vals[g.land & (vals > 0)]
    b = breaks_geometric(pos.min(), pos.max(), 5)
    scene = render_choropleth(g, vals, b, "blues")
    counts = scene.notes["class_counts"]
    assert counts == np.bincount(classify_array(pos, b), minlength=5).tolist()
    entries = scene.legend.entries
    assert entries[0].label == "no population"
    assert sum(e.count for e in entries) == g.land_cell_count
    root = parse_svg(emit_svg(scene))
    legend_counts = [int(e.get("data-count")) for e in root.iter(SVG + "path")
                     if e.get("data-count") is not None]
    assert legend_counts == [e.count for e in entries]


def test_choropleth_zones():
    z = ZoneLayer((box_zone("A", 0, 0, 10, 10), box_zone("B", 20, 0, 30, 10),
                   box_zone("C", 40, 0, 50, 10)))
    b = breaks_geometric(1, 100, 2)
    scene = render_choropleth(z, [5.0, 50.0, np.nan], b)
    classes = [p.meta["class"] for p in scene.layer("choropleth").items]
    assert classes == [0, 1, -1]
    assert scene.legend.entries[-1].label == "missing"
    with pytest.raises(ParameterError):
        render_choropleth(z, [1.0], b)


def test_dots_expected_count_and_placement():
    vals = np.zeros((10, 20))
    vals[2:8, 3:17] = np.linspace(1e5, 9e5, 84).reshape(6, 14) + 1234.5
    g = PopGrid.from_array(vals, cellsize=1.0, yll=0.0)
    expected = vals.sum() / 1e4
    counts = [len(dot_positions(g, 1e4, seed)[0]) for seed in range(100)]
    assert abs(np.mean(counts) - expected) <= 0.01 * expected
    lon, lat = dot_positions(g, 1e4, 3)
    r = g.header.row_of_lat(lat)
    c = g.header.col_of_lon(lon)
    assert np.all(vals[r, c] > 0)


def test_dots_deterministic_across_runs_and_threads(small_world):
    a = emit_svg(render_dots(small_world, 2e5, seed=7))
    b = emit_svg(render_dots(small_world, 2e5, seed=7))
    c = emit_svg(render_dots(small_world, 2e5, seed=7, n_jobs=4))
    assert a == b == c
    assert a != emit_svg(render_dots(small_world, 2e5, seed=8))


def test_dorling_coincident_pair():
    x, y, it, ok, worst = dorling_layout([5.0, 5.0], [1.0, 1.0], [10.0, 5.0])
    assert ok
    d = np.hypot(x[1] - x[0], y[1] - y[0])
    assert abs(d - 15.0) <= 0.1
    assert y[0] == y[1] == 1.0 and x[1] > x[0]


def test_dorling_random_layout_resolves(rng):
    x, y = rng.uniform(0, 100, 40), rng.uniform(0, 100, 40)
    r = rng.uniform(2, 8, 40)
    x2, y2, it, ok, worst = dorling_layout(x, y, r, max_iter=500)
    assert ok
    d = np.hypot(x2[:, None] - x2[None], y2[:, None] - y2[None])
    overlap = (r[:, None] + r[None]) - d
    np.fill_diagonal(overlap, -1)
    assert overlap.max() <= 0.1 + 1e-9
    again = dorling_layout(x, y, r, max_iter=500)
    assert np.array_equal(again[0], x2) and np.array_equal(again[1], y2)


def _hexes(small_world):
    return hex_bin(small_world, 15.0)


def test_hex_painter_order_and_heights(small_world):
    hexes = _hexes(small_world)
    scene = render_hex_extrusion(hexes, 1e-5)
    prisms = scene.layer("prisms").items
    order = prism_order(hexes)
    assert [(p.meta["q"], p.meta["r"]) for p in prisms] == [(c.q, c.r) for c in order]
    ys = [c.y for c in order]
    assert ys == sorted(ys, reverse=True)
    double = render_hex_extrusion(hexes, 2e-5).layer("prisms").items
    for a, b in zip(prisms, double):
        assert b.meta["height"] == pytest.approx(2 * a.meta["height"])


def test_zero_height_prism_is_flat():
    hexes = HexLayer(10.0, (0.0, 0.0), (HexCell(0, 0, 0.0, 0.0, 0.0),
                                        HexCell(1, 0, 7.5, 4.33, 100.0)))
    prisms = render_hex_extrusion(hexes, 0.1).layer("prisms").items
    flat = [p for p in prisms if p.meta["value"] == 0.0][0]
    assert len(flat.faces) == 1
    tall = [p for p in prisms if p.meta["value"] == 100.0][0]
    side = tall.sides[0].rings[0]
    assert side[0][1] - side[3][1] == pytest.approx(10.0)
    assert tall.meta["height"] == pytest.approx(10.0)


def test_linemap_peak_and_occlusion():
    vals = np.zeros((4, 8))
    vals[2, 5] = 50.0
    vals[1, 1] = 25.0
    g = PopGrid.from_array(vals, cellsize=1.0, yll=0.0)
    proj = Projection(scale=3.0)
    scene = render_linemap(g, 40.0, proj)
    items = scene.layer("linemap").items
    assert [it.meta["row"] for it in items] == [0, 0, 1, 1, 2, 2, 3, 3]
    assert [type(it).__name__ for it in items[:2]] == ["Polygon", "Polyline"]
    line = items[5].points
    _, base = proj.xy(0.0, g.header.lats()[2])
    assert base - line[:, 1].min() == pytest.approx(40.0)
    _, base1 = proj.xy(0.0, g.header.lats()[1])
    assert base1 - items[3].points[:, 1].min() == pytest.approx(20.0)
    with pytest.raises(ParameterError):
        render_linemap(g, 0)


def test_overlay_composition(small_world):
    base = render_dots(small_world, 1e6, seed=1)
    iso = extract_isolines(small_world.filled(0.0), small_world.header, [1e4])
    links = link_nodes(np.array([0.0, 1.0]), np.array([0.0, 1.0]), np.array([5e6, 5e6]),
                       3e6, 500)
    out = render_overlay(base, [iso, links, Layer("extra", (), base.projection)])
    assert [lyr.name for lyr in out.layers][-3:] == ["isolines", "links", "extra"]
    with pytest.raises(CompositionError):
        render_overlay(base, [Layer("x", (), Projection(scale=1.0))])
    with pytest.raises(CompositionError):
        render_overlay(base, [object()])
    with pytest.raises(CompositionError):
        render_overlay(base, [], proj=Projection(scale=5.0))


def test_empty_scene_svg():
    scene = Scene(Projection(), provenance={"kind": "empty"})
    text = emit_svg(scene)
    root = parse_svg(text)
    assert root.get("viewBox") == "-360.000 -180.000 720.000 470.000"
    assert [e.get("id") for e in root] == ["frame"]
    prov = provenance_of(text)
    assert prov == {"engine_version": __version__, "kind": "empty"}
    assert emit_svg(scene) == text


def test_svg_rejects_non_finite():
    from gridatlas.render import Circle
    scene = Scene(Projection(), layers=(Layer("bad", (Circle(float("nan"), 0.0, 1.0),)),))
    with pytest.raises(ValueError):
        emit_svg(scene)


def test_provenance_comment_is_safe():
    text = emit_svg(Scene(Projection(), provenance={"command": "gridatlas --set a=b"}))
    parse_svg(text)
    assert provenance_of(text)["command"] == "gridatlas --set a=b"
