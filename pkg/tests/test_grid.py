import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gridatlas.errors import (
    BoundsError,
    LexicalError,
    ParseError,
    StructuralError,
    ValidationError,
)
from gridatlas.grid import (
    EARTH_RADIUS_KM,
    Blob,
    GridHeader,
    LonLat,
    PopGrid,
    SynthSpec,
    band_areas_km2,
    cell_area_km2,
    cell_centroid,
    haversine_km,
    parse_asc_grid,
    parse_csv_grid,
    synth_grid,
    write_asc_grid,
)

ASC_2x2 = """ncols 2
nrows 2
xllcorner -180
yllcorner -90
cellsize 90
NODATA_value -9999
1 2
-9999 4
"""


def test_parse_small_grid():
    g = parse_asc_grid(ASC_2x2)
    assert g.land_cell_count == 3
    assert g.total == 7
    assert np.isnan(g.values[1, 0])
    assert g.values[0, 1] == 2  # north row first


def test_parse_twice_identical():
    a, b = parse_asc_grid(ASC_2x2), parse_asc_grid(ASC_2x2)
    assert a == b
    assert a.values.tobytes() == b.values.tobytes()


def test_header_keys_case_insensitive_and_center():
    text = ASC_2x2.replace("ncols", "NCOLS").replace("xllcorner -180", "XLLCENTER -135")
    g = parse_asc_grid(text)
    assert g.header.xll == -180


def test_malformed_header_names_line():
    text = ASC_2x2.replace("cellsize 90", "cellsize 90 extra")
    with pytest.raises(ParseError) as exc:
        parse_asc_grid(text)
    assert exc.value.line == 5


def test_value_count_mismatch():
    with pytest.raises(StructuralError):
        parse_asc_grid(ASC_2x2 + "5\n")


def test_non_numeric_token_position():
    with pytest.raises(LexicalError) as exc:
        parse_asc_grid(ASC_2x2.replace("-9999 4", "-9999 x4"))
    assert exc.value.line == 8
    assert exc.value.column == 2


def test_negative_value_rejected():
    with pytest.raises(StructuralError):
        parse_asc_grid(ASC_2x2.replace("1 2", "-1 2"))


def test_header_bounds():
    with pytest.raises(ValidationError):
        parse_asc_grid(ASC_2x2.replace("xllcorner -180", "xllcorner 10"))
    with pytest.raises(ValidationError):
        GridHeader(0, 2, 0, 0, 1)
    with pytest.raises(ValidationError):
        GridHeader(2, 2, 0, 0, 0)


def test_write_nodata_sentinel_and_big_value():
    vals = np.array([[23065668.0, np.nan], [0.5, 1e-7]])
    g = PopGrid.from_array(vals, cellsize=1.0)
    text = write_asc_grid(g)
    assert "23065668 -9999" in text
    back = parse_asc_grid(text)
    assert back == g
    assert back.values[0, 0] == 23065668.0


@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
              elements=st.one_of(st.floats(0, 1e12, allow_subnormal=False),
                                 st.just(np.nan))))
def test_round_trip_property(vals):
    g = PopGrid.from_array(vals, cellsize=1.0, yll=0.0)
    assert parse_asc_grid(write_asc_grid(g)) == g


def test_csv_variant():
    text = "lon,lat,value\n-179.75,89.75,5\n-179.25,89.75,0\n-179.75,89.25,7\n"
    g = parse_csv_grid(text)
    assert g.header.cellsize == 0.5
    assert g.header.shape == (2, 2)
    assert g.total == 12
    assert g.land_cell_count == 3
    assert np.isnan(g.values[1, 1])


def test_csv_bad_header():
    with pytest.raises(ParseError):
        parse_csv_grid("x,y,z\n1,2,3\n")


def test_cell_centroids():
    h = GridHeader(720, 360, -180, -90, 0.5)
    assert tuple(cell_centroid(h, 0, 0)) == (-179.75, 89.75)
    assert tuple(cell_centroid(h, 359, 719)) == (179.75, -89.75)
    assert cell_centroid(h, 179, 0).lat == 0.25
    assert cell_centroid(h, 180, 0).lat == -0.25
    with pytest.raises(BoundsError):
        cell_centroid(h, 360, 0)
    with pytest.raises(BoundsError):
        LonLat(181, 0)


@given(st.integers(0, 359), st.integers(0, 719))
def test_row_col_bijection(row, col):
    h = GridHeader(720, 360, -180, -90, 0.5)
    p = cell_centroid(h, row, col)
    assert h.row_of_lat(p.lat) == row
    assert h.col_of_lon(p.lon) == col


def test_cell_area_equator():
    h = GridHeader(720, 360, -180, -90, 0.5)
    a = cell_area_km2(h, 179)
    expected = EARTH_RADIUS_KM ** 2 * math.radians(0.5) * math.sin(math.radians(0.5))
    assert a == pytest.approx(expected, rel=1e-12)
    assert a == pytest.approx(3091.0, abs=2.0)
    assert math.sqrt(a) == pytest.approx(55.6, abs=0.1)


def test_cell_area_sphere_identity():
    h = GridHeader(720, 360, -180, -90, 0.5)
    total = band_areas_km2(h).sum() * h.ncols
    assert total == pytest.approx(4 * math.pi * EARTH_RADIUS_KM ** 2, rel=1e-6)


def test_cell_area_at_60_degrees():
    h = GridHeader(720, 360, -180, -90, 0.5)
    row = h.row_of_lat(60.25)
    lat0 = math.radians(60.0)
    lat1 = math.radians(60.5)
    oracle = EARTH_RADIUS_KM ** 2 * math.radians(0.5) * (math.sin(lat1) - math.sin(lat0))
    assert cell_area_km2(h, int(row)) == pytest.approx(oracle, rel=1e-12)
    ratio = cell_area_km2(h, int(row)) / cell_area_km2(h, 179)
    assert ratio == pytest.approx(math.cos(math.radians(60.25)), rel=1e-3)


def test_haversine_values():
    assert haversine_km((10, 20), (10, 20)) == 0
    assert haversine_km((0, 0), (180, 0)) == pytest.approx(math.pi * EARTH_RADIUS_KM)
    assert haversine_km((0, 0), (180, 0)) == pytest.approx(20015.1, abs=0.1)
    assert haversine_km((0, 0), (1, 0)) == pytest.approx(111.195, abs=1e-3)


def test_haversine_triangle_inequality(rng):
    pts = np.column_stack([rng.uniform(-180, 180, (1000, 3)).ravel(),
                           rng.uniform(-90, 90, (1000, 3)).ravel()]).reshape(1000, 3, 2)
    for a, b, c in pts:
        ab, bc, ac = haversine_km(a, b), haversine_km(b, c), haversine_km(a, c)
        assert ac <= ab + bc + 1e-9
        assert ab == pytest.approx(haversine_km(b, a), abs=1e-9)
        assert ab >= 0


def test_synth_zero_spec():
    h = GridHeader(36, 18, -180, -90, 10)
    g = synth_grid(SynthSpec(h), seed=1)
    assert g.total == 0
    assert g.land_cell_count == 36 * 18


def test_synth_blob_mass_and_determinism():
    h = GridHeader(72, 36, -180, -90, 5)
    spec = SynthSpec(h, (Blob(LonLat(20, 10), 1e6, 4.0),))
    g = synth_grid(spec, seed=9)
    assert 0.995e6 <= g.total <= 1.005e6
    assert g == synth_grid(spec, seed=9)
    assert np.all(g.values == np.floor(g.values))


def test_synth_validation_lists_fields():
    with pytest.raises(ValidationError) as exc:
        SynthSpec.from_dict({"header": {"ncols": 2}, "blobs": [{"center": [0, 0]}],
                             "background": -1})
    assert "blobs[0]" in exc.value.fields
    assert "background" in exc.value.fields
    assert any(f.startswith("header") for f in exc.value.fields)
