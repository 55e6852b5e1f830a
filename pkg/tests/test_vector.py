import json

import numpy as np
import pytest

from gridatlas.errors import GeometryError, UnsupportedFeatureError, WrongKindError
from gridatlas.vector import (
    POLYGON,
    POLYLINE,
    densify,
    layer_to_geojson,
    parse_geojson_layer,
    points_in_rings,
    ring_centroid,
)


def fc(*features):
    return json.dumps({"type": "FeatureCollection", "features": list(features)})


def feat(geom, **props):
    return {"type": "Feature", "properties": props, "geometry": geom}


SQUARE = {"type": "Polygon", "coordinates": [[[0, 0], [10, 0], [10, 10], [0, 10], [0, 0]]]}


def test_square_polygon():
    layer = parse_geojson_layer(fc(feat(SQUARE, name="Sq", id="SQ")))
    assert len(layer) == 1
    f = layer.features[0]
    assert f.kind == POLYGON
    assert len(f.rings[0]) == 5
    assert (f.id, f.name) == ("SQ", "Sq")
    assert f.area() == 100
    assert f.anchor() == (5.0, 5.0)


def test_multi_geometries_and_holes():
    multi = {"type": "MultiPolygon", "coordinates": [
        [[[0, 0], [4, 0], [4, 4], [0, 4], [0, 0]], [[1, 1], [2, 1], [2, 2], [1, 2], [1, 1]]],
        [[[10, 10], [11, 10], [11, 11], [10, 11], [10, 10]]]]}
    lines = {"type": "MultiLineString", "coordinates": [[[0, 0], [1, 1]], [[2, 2], [3, 3]]]}
    layer = parse_geojson_layer(fc(feat(multi, name="M"), feat(lines, name="L")))
    assert layer.kind == "mixed"
    assert layer.features[0].area() == pytest.approx(16 - 1 + 1)
    assert layer.features[1].kind == POLYLINE
    assert len(layer.features[1].paths) == 2


def test_point_rejected_with_index():
    pt = {"type": "Point", "coordinates": [0, 0]}
    with pytest.raises(UnsupportedFeatureError) as exc:
        parse_geojson_layer(fc(feat(SQUARE, name="a"), feat(pt, name="b")))
    assert exc.value.index == 1


def test_unclosed_ring():
    bad = {"type": "Polygon", "coordinates": [[[0, 0], [1, 0], [1, 1], [0, 1]]]}
    with pytest.raises(GeometryError):
        parse_geojson_layer(fc(feat(bad, name="x")))


def test_ids_unique_and_fallbacks():
    layer = parse_geojson_layer(fc(feat(SQUARE, ADM0_A3="FRA", NAME="France"),
                                   feat(SQUARE, ADM0_A3="-99", ISO_A3="NOR", NAME="Norway"),
                                   feat(SQUARE, ADM0_A3="FRA", NAME="France again")))
    ids = layer.ids
    assert ids[0] == "FRA" and ids[1] == "NOR"
    assert len(set(ids)) == 3
    assert layer.features[0].name == "France"


def test_require_kind():
    layer = parse_geojson_layer(fc(feat({"type": "LineString", "coordinates": [[0, 0], [1, 1]]},
                                        name="l")))
    with pytest.raises(WrongKindError):
        layer.require(POLYGON)


def test_geojson_round_trip():
    layer = parse_geojson_layer(fc(feat(SQUARE, name="Sq", id="SQ")))
    again = parse_geojson_layer(layer_to_geojson(layer))
    assert again.ids == layer.ids
    assert np.array_equal(again.features[0].rings[0], layer.features[0].rings[0])


def test_points_in_rings_even_odd(rng):
    outer = np.array([[0, 0], [10, 0], [10, 10], [0, 10], [0, 0]], float)
    hole = np.array([[3, 3], [6, 3], [6, 6], [3, 6], [3, 3]], float)
    px, py = rng.uniform(-2, 12, 2000), rng.uniform(-2, 12, 2000)
    got = points_in_rings(px, py, [outer, hole])
    want = (px > 0) & (px < 10) & (py > 0) & (py < 10) & ~((px > 3) & (px < 6) & (py > 3) & (py < 6))
    assert np.array_equal(got, want)


def test_ring_centroid_triangle():
    tri = np.array([[0, 0], [3, 0], [0, 3], [0, 0]], float)
    assert ring_centroid(tri) == pytest.approx((1.0, 1.0))


def test_densify_keeps_vertices():
    c = np.array([[0, 0], [5, 0], [5, 1]], float)
    d = densify(c, 1.0)
    assert np.all(np.hypot(*np.diff(d, axis=0).T) <= 1.0 + 1e-12)
    for p in c:
        assert any(np.array_equal(p, q) for q in d)
