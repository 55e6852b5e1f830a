"""Population rasters: header/grid types, ASCII and CSV readers, spherical helpers.

Rows are stored north-first, columns west-to-east. Ocean (nodata) cells are
held as NaN in memory and written back with the header's sentinel.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .errors import (
    BoundsError,
    LexicalError,
    ParseError,
    StructuralError,
    ValidationError,
)

EARTH_RADIUS_KM = 6371.0088
DEFAULT_NODATA = -9999.0
_BOUND_EPS = 1e-9


@dataclass(frozen=True)
class LonLat:
    lon: float
    lat: float

    def __post_init__(self):
        if not (-180.0 <= self.lon <= 180.0) or not (-90.0 <= self.lat <= 90.0):
            raise BoundsError(f"coordinate out of range: ({self.lon}, {self.lat})")

    def __iter__(self):
        yield self.lon
        yield self.lat


@dataclass(frozen=True)
class GridHeader:
    ncols: int
    nrows: int
    xll: float
    yll: float
    cellsize: float
    nodata: float = DEFAULT_NODATA

    def __post_init__(self):
        if int(self.ncols) != self.ncols or int(self.nrows) != self.nrows:
            raise ValidationError("grid dimensions must be integers", ["ncols", "nrows"])
        bad = [n for n in ("ncols", "nrows") if getattr(self, n) < 1]
        if not self.cellsize > 0:
            bad.append("cellsize")
        if bad:
            raise ValidationError("invalid grid header", bad)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def xmax(self) -> float:
        return self.xll + self.ncols * self.cellsize

    @property
    def ymax(self) -> float:
        return self.yll + self.nrows * self.cellsize

    def check_geographic(self) -> None:
        """Raise unless the header fits inside the lon/lat domain."""
        if self.xmax > 180.0 + _BOUND_EPS or self.ymax > 90.0 + _BOUND_EPS:
            raise ValidationError("grid extends beyond 180E / 90N", ["xll", "yll", "cellsize"])
        if self.xll < -180.0 - _BOUND_EPS or self.yll < -90.0 - _BOUND_EPS:
            raise ValidationError("grid extends beyond 180W / 90S", ["xll", "yll"])

    def lons(self) -> np.ndarray:
        """Centroid longitude of every column."""
        return self.xll + (np.arange(self.ncols) + 0.5) * self.cellsize

    def lats(self) -> np.ndarray:
        """Centroid latitude of every row (row 0 northernmost)."""
        return self.yll + (self.nrows - 1 - np.arange(self.nrows) + 0.5) * self.cellsize

    def row_of_lat(self, lat):
        return np.floor((self.ymax - np.asarray(lat)) / self.cellsize).astype(int)

    def col_of_lon(self, lon):
        return np.floor((np.asarray(lon) - self.xll) / self.cellsize).astype(int)


@dataclass(frozen=True, eq=False)
class PopGrid:
    """Population counts on a regular lon/lat raster.

    ``values`` is an ``(nrows, ncols)`` float array; NaN marks nodata.
    """

    header: GridHeader
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.ndim == 1:
            if vals.size != self.header.ncols * self.header.nrows:
                raise StructuralError(
                    f"expected {self.header.ncols * self.header.nrows} values, got {vals.size}")
            vals = vals.reshape(self.header.shape)
        if vals.shape != self.header.shape:
            raise StructuralError(f"values shape {vals.shape} != header shape {self.header.shape}")
        if np.any(vals[~np.isnan(vals)] < 0):
            raise StructuralError("population values must be >= 0")
        if np.any(np.isinf(vals)):
            raise StructuralError("population values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_array(cls, values, xll=-180.0, yll=None, cellsize=None, nodata=DEFAULT_NODATA):
        """Build a grid from a north-first 2-D array; NaN marks ocean."""
        values = np.asarray(values, dtype=float)
        nrows, ncols = values.shape
        if cellsize is None:
            cellsize = 360.0 / ncols
        if yll is None:
            yll = -nrows * cellsize / 2.0
        return cls(GridHeader(ncols, nrows, xll, yll, cellsize, nodata), values)

    def __eq__(self, other):
        if not isinstance(other, PopGrid):
            return NotImplemented
        return self.header == other.header and np.array_equal(
            self.values, other.values, equal_nan=True)

    __hash__ = None

    @property
    def land(self) -> np.ndarray:
        return ~np.isnan(self.values)

    @property
    def land_cell_count(self) -> int:
        return int(self.land.sum())

    @property
    def total(self) -> float:
        return float(np.nansum(self.values))

    def filled(self, fill=0.0) -> np.ndarray:
        return np.where(self.land, self.values, fill)

    def land_cells(self):
        """Row, col, lon, lat and value arrays of land cells in row-major order."""
        rows, cols = np.nonzero(self.land)
        lon = self.header.lons()[cols]
        lat = self.header.lats()[rows]
        return rows, cols, lon, lat, self.values[rows, cols]

    def with_values(self, values) -> "PopGrid":
        return PopGrid(self.header, values)


# --- ESRI ASCII grid -------------------------------------------------------

_HEADER_KEYS = {
    "ncols": "ncols",
    "nrows": "nrows",
    "xllcorner": "xll",
    "xllcenter": "xllc",
    "yllcorner": "yll",
    "yllcenter": "yllc",
    "cellsize": "cellsize",
    "nodata_value": "nodata",
}


def _number(token, line, column=None):
    try:
        return float(token)
    except ValueError:
        raise LexicalError(f"not a number: {token!r}", line, column) from None


def parse_asc_grid(text) -> PopGrid:
    """Parse an ESRI ASCII grid from a string or text stream."""
    header, values = read_asc(text)
    header.check_geographic()
    return PopGrid(header, values)


def read_asc(text):
    """Header and north-first value array (NaN for nodata), without population checks."""
    if not isinstance(text, str):
        text = text.read()
    lines = text.splitlines()
    meta = {}
    lineno = 0
    while lineno < len(lines):
        raw = lines[lineno].strip()
        if not raw:
            lineno += 1
            continue
        parts = raw.split()
        key = parts[0].lower()
        if key not in _HEADER_KEYS:
            break
        if len(parts) != 2:
            raise ParseError(f"malformed header line {raw!r}", lineno + 1)
        name = _HEADER_KEYS[key]
        if name in meta:
            raise ParseError(f"duplicate header key {parts[0]!r}", lineno + 1)
        meta[name] = _number(parts[1], lineno + 1, 2)
        lineno += 1
    if lineno < len(lines) and len(meta) < 5:
        raise ParseError(f"malformed header line {lines[lineno].strip()!r}", lineno + 1)

    missing = [k for k in ("ncols", "nrows", "cellsize") if k not in meta]
    if "xll" not in meta and "xllc" not in meta:
        missing.append("xllcorner")
    if "yll" not in meta and "yllc" not in meta:
        missing.append("yllcorner")
    if missing:
        raise ParseError(f"missing header keys: {', '.join(missing)}", lineno + 1)
    cs = meta["cellsize"]
    xll = meta["xll"] if "xll" in meta else meta["xllc"] - cs / 2
    yll = meta["yll"] if "yll" in meta else meta["yllc"] - cs / 2
    for k in ("ncols", "nrows"):
        if meta[k] != int(meta[k]):
            raise ParseError(f"{k} must be an integer", None)
    header = GridHeader(int(meta["ncols"]), int(meta["nrows"]), xll, yll, cs,
                        meta.get("nodata", DEFAULT_NODATA))

    body = lines[lineno:]
    try:
        values = np.array(" ".join(body).split(), dtype=float)
    except ValueError:
        _locate_bad_token(body, lineno)
        raise
    expected = header.ncols * header.nrows
    if values.size != expected:
        raise StructuralError(f"expected {expected} values, found {values.size}")
    values = values.reshape(header.shape)
    values[_is_nodata(values, header.nodata)] = np.nan
    return header, values


def _is_nodata(values, nodata):
    if abs(nodata) > 1e30:
        return np.isclose(values, nodata, rtol=1e-6, atol=0.0)
    return values == nodata


def _locate_bad_token(body, offset):
    for i, line in enumerate(body):
        for j, tok in enumerate(line.split()):
            _number(tok, offset + i + 1, j + 1)


def format_value(v: float) -> str:
    """Shortest decimal string that parses back to exactly ``v``."""
    v = float(v)
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def write_asc(header: GridHeader, values, stream=None) -> str:
    """Serialize any north-first array; NaN cells get the header's sentinel."""
    h = header
    out = io.StringIO()
    out.write(f"ncols {h.ncols}\n")
    out.write(f"nrows {h.nrows}\n")
    out.write(f"xllcorner {format_value(h.xll)}\n")
    out.write(f"yllcorner {format_value(h.yll)}\n")
    out.write(f"cellsize {format_value(h.cellsize)}\n")
    out.write(f"NODATA_value {format_value(h.nodata)}\n")
    nd = format_value(h.nodata)
    for row in np.asarray(values, dtype=float):
        out.write(" ".join(nd if math.isnan(v) else format_value(v) for v in row.tolist()))
        out.write("\n")
    text = out.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def write_asc_grid(grid: PopGrid, stream=None) -> str:
    return write_asc(grid.header, grid.values, stream)


def parse_csv_grid(text, header: GridHeader | None = None) -> PopGrid:
    """Read the ``lon,lat,value`` variant (one row per land cell).

    Without an explicit header, the cell size is the smallest spacing between
    distinct coordinates and the extent is the bounding box of the cells.
    """
    if not isinstance(text, str):
        text = text.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise StructuralError("empty CSV grid")
    cols = [c.strip().lower() for c in lines[0].split(",")]
    if cols != ["lon", "lat", "value"]:
        raise ParseError(f"expected header 'lon,lat,value', got {lines[0]!r}", 1)
    recs = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 3:
            raise StructuralError(f"line {i}: expected 3 fields, got {len(parts)}")
        recs.append([_number(p.strip(), i, j + 1) for j, p in enumerate(parts)])
    if not recs:
        raise StructuralError("CSV grid has no cells")
    arr = np.array(recs)
    lon, lat, val = arr[:, 0], arr[:, 1], arr[:, 2]
    if header is None:
        header = _infer_header(lon, lat)
    header.check_geographic()
    rows = header.row_of_lat(lat)
    cols_ = header.col_of_lon(lon)
    if (rows.min() < 0 or rows.max() >= header.nrows
            or cols_.min() < 0 or cols_.max() >= header.ncols):
        raise StructuralError("CSV cell outside grid extent")
    values = np.full(header.shape, np.nan)
    values[rows, cols_] = val
    return PopGrid(header, values)


def _spacing(coords):
    u = np.unique(coords)
    if u.size < 2:
        return None
    return float(np.diff(u).min())


def _infer_header(lon, lat):
    steps = [s for s in (_spacing(lon), _spacing(lat)) if s is not None]
    if not steps:
        raise StructuralError("cannot infer cell size from a single cell; pass a header")
    cs = min(steps)
    ncols = int(round((lon.max() - lon.min()) / cs)) + 1
    nrows = int(round((lat.max() - lat.min()) / cs)) + 1
    return GridHeader(ncols, nrows, float(lon.min() - cs / 2), float(lat.min() - cs / 2), cs)


# --- spherical geometry ----------------------------------------------------

def cell_centroid(header: GridHeader, row: int, col: int) -> LonLat:
    if not (0 <= row < header.nrows and 0 <= col < header.ncols):
        raise BoundsError(f"cell ({row}, {col}) outside {header.nrows}x{header.ncols} grid")
    lon = header.xll + (col + 0.5) * header.cellsize
    lat = header.yll + (header.nrows - 1 - row + 0.5) * header.cellsize
    return LonLat(lon, lat)


def band_areas_km2(header: GridHeader, radius=EARTH_RADIUS_KM) -> np.ndarray:
    """Area of one cell in each row, north-first."""
    top = header.ymax - np.arange(header.nrows) * header.cellsize
    bottom = top - header.cellsize
    dlam = math.radians(header.cellsize)
    return radius ** 2 * dlam * (np.sin(np.radians(top)) - np.sin(np.radians(bottom)))


def cell_area_km2(header: GridHeader, row: int, radius=EARTH_RADIUS_KM) -> float:
    if not 0 <= row < header.nrows:
        raise BoundsError(f"row {row} outside grid of {header.nrows} rows")
    top = header.ymax - row * header.cellsize
    bottom = top - header.cellsize
    return radius ** 2 * math.radians(header.cellsize) * (
        math.sin(math.radians(top)) - math.sin(math.radians(bottom)))


def haversine_km(a, b, radius=EARTH_RADIUS_KM) -> float:
    lon1, lat1 = a
    lon2, lat2 = b
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * radius * math.asin(min(1.0, math.sqrt(h)))


def haversine_np(lon1, lat1, lon2, lat2, radius=EARTH_RADIUS_KM):
    """Broadcasting haversine distance in km."""
    p1 = np.radians(lat1)
    p2 = np.radians(lat2)
    dl = np.radians(np.asarray(lon2) - np.asarray(lon1))
    h = np.sin((p2 - p1) / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dl / 2) ** 2
    return 2 * radius * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def to_unit_xyz(lon, lat) -> np.ndarray:
    lam = np.radians(np.asarray(lon, dtype=float))
    phi = np.radians(np.asarray(lat, dtype=float))
    cp = np.cos(phi)
    return np.stack([cp * np.cos(lam), cp * np.sin(lam), np.sin(phi)], axis=-1)


def chord_for_km(distance_km, radius=EARTH_RADIUS_KM) -> float:
    """Unit-sphere chord length subtending a great-circle distance."""
    ang = min(distance_km / radius, math.pi)
    return 2.0 * math.sin(ang / 2.0)


def km_for_chord(chord, radius=EARTH_RADIUS_KM):
    return 2.0 * radius * np.arcsin(np.minimum(1.0, np.asarray(chord) / 2.0))


# --- synthetic fixtures ----------------------------------------------------

@dataclass(frozen=True)
class Blob:
    center: LonLat
    total_mass: float
    sigma: float

    def __post_init__(self):
        bad = []
        if not self.total_mass >= 0:
            bad.append("total_mass")
        if not self.sigma > 0:
            bad.append("sigma")
        if bad:
            raise ValidationError("invalid blob", bad)


@dataclass(frozen=True)
class SynthSpec:
    """Synthetic world: Gaussian blobs over a constant background.

    ``land_mask`` is a list of ``(lon_min, lat_min, lon_max, lat_max)`` boxes;
    cells whose centroid falls in none of them are ocean. ``None`` means all land.
    """

    header: GridHeader
    blobs: Sequence[Blob] = ()
    background: float = 0.0
    land_mask: Sequence[tuple[float, float, float, float]] | None = None

    def __post_init__(self):
        if not self.background >= 0:
            raise ValidationError("invalid synthetic spec", ["background"])

    @classmethod
    def from_dict(cls, data: dict) -> "SynthSpec":
        problems = []
        hd = dict(data.get("header", {}))
        for alias, key in (("xllcorner", "xll"), ("yllcorner", "yll")):
            if alias in hd:
                hd.setdefault(key, hd.pop(alias))
        try:
            header = GridHeader(int(hd["ncols"]), int(hd["nrows"]), float(hd["xll"]),
                                float(hd["yll"]), float(hd["cellsize"]),
                                float(hd.get("nodata", DEFAULT_NODATA)))
            header.check_geographic()
        except (KeyError, TypeError, ValueError) as exc:
            fields = getattr(exc, "fields", None) or ["header"]
            problems.extend(f"header.{f}" if not f.startswith("header") else f for f in fields)
            header = None
        blobs = []
        for i, b in enumerate(data.get("blobs", [])):
            try:
                blobs.append(Blob(LonLat(*b["center"]), float(b["total_mass"]), float(b["sigma"])))
            except (KeyError, TypeError, ValueError):
                problems.append(f"blobs[{i}]")
        background = data.get("background", 0.0)
        if not isinstance(background, (int, float)) or background < 0:
            problems.append("background")
        mask = data.get("land_mask")
        if mask is not None:
            try:
                mask = [tuple(float(x) for x in box) for box in mask]
                if any(len(box) != 4 for box in mask):
                    raise ValueError
            except (TypeError, ValueError):
                problems.append("land_mask")
        if problems:
            raise ValidationError("invalid synthetic spec", problems)
        return cls(header, tuple(blobs), float(background), mask)


def synth_grid(spec: SynthSpec, seed: int = 0) -> PopGrid:
    """Rasterize a synthetic world.

    Each blob is integrated exactly over every cell (product of normal CDF
    differences in degrees), then counts are stochastically rounded to whole
    persons with a generator seeded by ``seed``.
    """
    h = spec.header
    x_edges = h.xll + np.arange(h.ncols + 1) * h.cellsize
    y_edges = h.ymax - np.arange(h.nrows + 1) * h.cellsize
    mass = np.zeros(h.shape)
    for blob in spec.blobs:
        cx, cy = blob.center
        fx = np.diff(ndtr((x_edges - cx) / blob.sigma))
        fy = -np.diff(ndtr((y_edges - cy) / blob.sigma))
        mass += blob.total_mass * np.outer(fy, fx)
    mass += spec.background

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    base = np.floor(mass)
    values = base + (rng.random(h.shape) < (mass - base))

    if spec.land_mask is not None:
        lon = h.lons()[None, :]
        lat = h.lats()[:, None]
        land = np.zeros(h.shape, dtype=bool)
        for x0, y0, x1, y1 in spec.land_mask:
            land |= (lon >= x0) & (lon <= x1) & (lat >= y0) & (lat <= y1)
        values = np.where(land, values, np.nan)
    return PopGrid(h, values)

