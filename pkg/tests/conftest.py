import json
import os

import numpy as np
import pytest
from hypothesis import settings

from gridatlas.grid import Blob, GridHeader, LonLat, PopGrid, SynthSpec, synth_grid
from gridatlas.vector import POLYGON, POLYLINE, Feature, ZoneLayer

# lines collected by the acceptance tests, repeated after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s[5:7])):
            terminalreporter.write_line(line)


settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def box(x0, y0, x1, y1):
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]], dtype=float)


def box_zone(zid, x0, y0, x1, y1, name=None):
    return Feature(zid, name or zid, POLYGON, ((box(x0, y0, x1, y1),),))


def line_zone(zid, coords):
    return Feature(zid, zid, POLYLINE, (np.asarray(coords, dtype=float),))


def random_grid(rng, nrows=12, ncols=24, ocean_frac=0.3, scale=1e5, integer=True):
    vals = rng.exponential(scale, size=(nrows, ncols))
    if integer:
        vals = np.floor(vals)
    vals[rng.random((nrows, ncols)) < ocean_frac] = np.nan
    return PopGrid.from_array(vals)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_world():
    """5-degree synthetic world with three blobs on two continents."""
    header = GridHeader(72, 36, -180.0, -90.0, 5.0)
    spec = SynthSpec(header,
                     (Blob(LonLat(10, 45), 5e8, 6.0), Blob(LonLat(100, 25), 1.5e9, 8.0),
                      Blob(LonLat(-80, 10), 4e8, 10.0)),
                     100.0, [(-130, -60, -30, 70), (-20, -40, 150, 75)])
    return synth_grid(spec, seed=3)


@pytest.fixture
def world_zones():
    return ZoneLayer((box_zone("W", -130, -60, -30, 70, "West"),
                      box_zone("EA", -20, -40, 60, 75, "East A"),
                      box_zone("EB", 60, -40, 150, 75, "East B")))


@pytest.fixture
def files(tmp_path, small_world, world_zones):
    """Grid, zones and coast written to disk for CLI tests."""
    from gridatlas.grid import write_asc_grid
    from gridatlas.vector import layer_to_geojson

    grid = tmp_path / "world.asc"
    grid.write_text(write_asc_grid(small_world))
    zones = tmp_path / "zones.geojson"
    zones.write_text(layer_to_geojson(world_zones))
    coast = tmp_path / "coast.geojson"
    coast.write_text(json.dumps({"type": "FeatureCollection", "features": [
        {"type": "Feature", "properties": {"id": "c1"},
         "geometry": {"type": "LineString", "coordinates": [[-20, -40], [-20, 75]]}},
        {"type": "Feature", "properties": {"id": "c2"},
         "geometry": {"type": "LineString", "coordinates": [[150, -40], [150, 75]]}}]}))
    return {"grid": grid, "zones": zones, "coast": coast, "dir": tmp_path}
