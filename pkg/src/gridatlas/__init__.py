"""Gridded world population analysis and thematic map rendering."""

__version__ = "0.1.0"

from .grid import GridHeader, LonLat, PopGrid, parse_asc_grid, parse_csv_grid, write_asc_grid
from .vector import ZoneLayer, parse_geojson_layer

__all__ = [
    "GridHeader",
    "LonLat",
    "PopGrid",
    "ZoneLayer",
    "parse_asc_grid",
    "parse_csv_grid",
    "parse_geojson_layer",
    "write_asc_grid",
    "__version__",
]
