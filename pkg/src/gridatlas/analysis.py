"""Distance-decay smoothing and the grid transformations built on it.

All distances are great-circle kilometres on the sphere unless a function
says otherwise. Kernel sums are accumulated per evaluation node over sources
in row-major order, so chunked or threaded evaluation is bit-identical to a
serial run.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.spatial import cKDTree

from .errors import InvalidParamsError, ParameterError
from .grid import (
    EARTH_RADIUS_KM,
    GridHeader,
    LonLat,
    PopGrid,
    chord_for_km,
    haversine_np,
    to_unit_xyz,
)
from .vector import POLYLINE, ZoneLayer

EXPONENTIAL = "exponential"
PARETO = "pareto"
_CHUNK = 4096


@dataclass(frozen=True)
class PotentialParams:
    """Interaction kernel. ``span`` is where a mass's weight falls to one half."""

    function: str = EXPONENTIAL
    span: float = 200.0
    beta: float = 2.0
    cutoff: float | None = None

    def __post_init__(self):
        if self.function not in (EXPONENTIAL, PARETO):
            raise InvalidParamsError(f"unknown interaction function {self.function!r}")
        if not self.span > 0 or not self.beta > 0:
            raise InvalidParamsError("span and beta must be > 0")
        if self.cutoff is None:
            object.__setattr__(self, "cutoff", 3.0 * self.span)
        if not self.cutoff >= self.span:
            raise InvalidParamsError(f"cutoff {self.cutoff} km is below span {self.span} km")

    @property
    def alpha(self) -> float:
        if self.function == EXPONENTIAL:
            return math.log(2.0) / self.span ** self.beta
        return (2.0 ** (1.0 / self.beta) - 1.0) / self.span

    def weight(self, d):
        d = np.asarray(d, dtype=float)
        if self.function == EXPONENTIAL:
            return np.exp(-self.alpha * d ** self.beta)
        return (1.0 + self.alpha * d) ** (-self.beta)


@dataclass(frozen=True, eq=False)
class PotentialSurface:
    header: GridHeader
    values: np.ndarray = field(repr=False)
    params: PotentialParams = None

    def to_grid(self) -> PopGrid:
        return PopGrid(self.header, self.values)


def _weight_matrix(src_xyz, src_ll, eval_xyz, eval_ll, params: PotentialParams):
    """Sparse (n_eval, n_src) kernel weights for sources within the cutoff."""
    n_eval, n_src = len(eval_xyz), len(src_xyz)
    if math.isinf(params.cutoff) or params.cutoff >= math.pi * EARTH_RADIUS_KM:
        d = haversine_np(eval_ll[:, None, 0], eval_ll[:, None, 1],
                         src_ll[None, :, 0], src_ll[None, :, 1])
        w = params.weight(d)
        indptr = np.arange(n_eval + 1) * n_src
        indices = np.tile(np.arange(n_src), n_eval)
        return csr_matrix((w.ravel(), indices, indptr), shape=(n_eval, n_src))
    tree = cKDTree(src_xyz)
    r = chord_for_km(params.cutoff) * (1 + 1e-9)
    hits = tree.query_ball_point(eval_xyz, r, return_sorted=True)
    lens = np.fromiter((len(h) for h in hits), dtype=np.int64, count=n_eval)
    indices = (np.concatenate([np.asarray(h, dtype=np.int64) for h in hits])
               if lens.sum() else np.zeros(0, dtype=np.int64))
    rows = np.repeat(np.arange(n_eval), lens)
    d = haversine_np(eval_ll[rows, 0], eval_ll[rows, 1], src_ll[indices, 0], src_ll[indices, 1])
    keep = d <= params.cutoff
    w = np.where(keep, params.weight(d), 0.0)
    indptr = np.concatenate([[0], np.cumsum(lens)])
    return csr_matrix((w, indices, indptr), shape=(n_eval, n_src))


def kernel_sums(src_lon, src_lat, masses, eval_lon, eval_lat, params: PotentialParams,
                n_jobs: int = 1):
    """Distance-weighted sums at each evaluation point.

    ``masses`` is a list of source vectors; returns one result vector per entry.
    """
    src_ll = np.column_stack([src_lon, src_lat]).astype(float)
    eval_ll = np.column_stack([eval_lon, eval_lat]).astype(float)
    src_xyz = to_unit_xyz(src_ll[:, 0], src_ll[:, 1])
    eval_xyz = to_unit_xyz(eval_ll[:, 0], eval_ll[:, 1])
    masses = [np.asarray(m, dtype=float) for m in masses]
    n = len(eval_ll)
    if len(src_ll) == 0:
        return [np.zeros(n) for _ in masses]
    chunk = _CHUNK if not math.isinf(params.cutoff) else max(1, 2_000_000 // len(src_ll))
    bounds = [(a, min(a + chunk, n)) for a in range(0, n, chunk)]

    def work(b):
        a, z = b
        m = _weight_matrix(src_xyz, src_ll, eval_xyz[a:z], eval_ll[a:z], params)
        return [m @ v for v in masses]

    if n_jobs > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(n_jobs) as ex:
            parts = list(ex.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    if not parts:
        return [np.zeros(0) for _ in masses]
    return [np.concatenate([p[i] for p in parts]) for i in range(len(masses))]


def stewart_potential(grid: PopGrid, params: PotentialParams = PotentialParams(),
                      out_header: GridHeader | None = None, n_jobs: int = 1) -> PotentialSurface:
    """Potential of population at every node of ``out_header`` (default: the grid itself)."""
    if not grid.total > 0:
        raise ParameterError("grid population total must be > 0")
    out = out_header or grid.header
    _, _, lon, lat, vals = grid.land_cells()
    pos = vals > 0
    elon, elat = np.meshgrid(out.lons(), out.lats())
    (v,) = kernel_sums(lon[pos], lat[pos], [vals[pos]], elon.ravel(), elat.ravel(),
                       params, n_jobs)
    return PotentialSurface(out, v.reshape(out.shape), params)


def local_relative_index(grid: PopGrid, params: PotentialParams = PotentialParams(),
                         n_jobs: int = 1) -> PopGrid:
    """Cell value over the distance-weighted mean of its land neighbourhood.

    ratio = m_i * W_i / V_i, with V the potential and W the summed kernel
    weights at the cell centroid. Cells where either is zero become nodata.
    """
    if not grid.total > 0:
        raise ParameterError("grid population total must be > 0")
    rows, cols, lon, lat, vals = grid.land_cells()
    v, w = kernel_sums(lon, lat, [vals, np.ones_like(vals)], lon, lat, params, n_jobs)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where((v > 0) & (w > 0), vals * w / v, np.nan)
    out = np.full(grid.header.shape, np.nan)
    out[rows, cols] = ratio
    return PopGrid(grid.header, out)


def land_potential(grid: PopGrid, params: PotentialParams, n_jobs: int = 1) -> np.ndarray:
    """Potential at each land-cell centroid, in ``land_cells`` order."""
    _, _, lon, lat, vals = grid.land_cells()
    (v,) = kernel_sums(lon, lat, [vals], lon, lat, params, n_jobs)
    return v


def empty_quarters(grid: PopGrid, params: PotentialParams, threshold: float,
                   n_jobs: int = 1) -> PopGrid:
    """1 on land where the smoothed potential is below ``threshold``, else 0; ocean stays nodata."""
    if threshold < 0:
        raise ParameterError("threshold must be >= 0")
    rows, cols, *_ = grid.land_cells()
    v = land_potential(grid, params, n_jobs)
    out = np.full(grid.header.shape, np.nan)
    out[rows, cols] = (v < threshold).astype(float)
    return PopGrid(grid.header, out)


# --- links -------------------------------------------------------------------

DEG_KM = math.pi * EARTH_RADIUS_KM / 180.0


@dataclass(frozen=True, eq=False)
class LinkSet:
    lon: np.ndarray
    lat: np.ndarray
    mass: np.ndarray
    edges: tuple  # (i, j, distance_km) with i < j
    min_mass: float = 0.0
    max_dist: float = 0.0
    planar: bool = False

    @property
    def nodes(self):
        return [(LonLat(float(x), float(y)), float(m))
                for x, y, m in zip(self.lon, self.lat, self.mass)]

    def edge_set(self):
        return {(i, j) for i, j, _ in self.edges}


def link_nodes(lon, lat, mass, min_mass: float, max_dist: float, planar=False) -> LinkSet:
    lon = np.asarray(lon, dtype=float)
    lat = np.asarray(lat, dtype=float)
    mass = np.asarray(mass, dtype=float)
    if not min_mass > 0 or not max_dist > 0:
        raise ParameterError("min_mass and max_dist must be > 0")
    keep = mass >= min_mass
    lon, lat, mass = lon[keep], lat[keep], mass[keep]
    if planar:
        pts = np.column_stack([lon, lat]) * DEG_KM
        r = max_dist
    else:
        pts = to_unit_xyz(lon, lat)
        r = chord_for_km(max_dist) * (1 + 1e-9)
    edges = []
    if len(pts) > 1:
        pairs = cKDTree(pts).query_pairs(r, output_type="ndarray")
        pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))] if len(pairs) else pairs
        if len(pairs):
            i, j = pairs[:, 0], pairs[:, 1]
            if planar:
                d = np.hypot(*(pts[i] - pts[j]).T)
            else:
                d = haversine_np(lon[i], lat[i], lon[j], lat[j])
            ok = d < max_dist
            edges = [(int(a), int(b), float(c)) for a, b, c in zip(i[ok], j[ok], d[ok])]
    return LinkSet(lon, lat, mass, tuple(edges), min_mass, max_dist, planar)


def build_links(grid: PopGrid, min_mass: float = 3e6, max_dist: float = 500.0,
                planar: bool = False) -> LinkSet:
    """Link every pair of cells holding at least ``min_mass`` closer than ``max_dist`` km.

    ``planar`` measures Euclidean distance on the plate carrée plane instead.
    """
    _, _, lon, lat, vals = grid.land_cells()
    return link_nodes(lon, lat, vals, min_mass, max_dist, planar)


# --- coastal proximity -------------------------------------------------------

def _slerp_subdivide(lonlat, max_deg):
    """Great-circle sub-segments (start, end unit vectors) no longer than ``max_deg``."""
    xyz = to_unit_xyz(lonlat[:, 0], lonlat[:, 1])
    starts, ends = [], []
    for a, b in zip(xyz[:-1], xyz[1:]):
        ang = math.atan2(np.linalg.norm(np.cross(a, b)), float(np.dot(a, b)))
        n = max(1, int(math.ceil(math.degrees(ang) / max_deg)))
        if ang < 1e-15:
            pts = np.array([a, b])
        else:
            t = np.linspace(0.0, 1.0, n + 1)[:, None]
            s = math.sin(ang)
            pts = (np.sin((1 - t) * ang) * a + np.sin(t * ang) * b) / s
        starts.append(pts[:-1])
        ends.append(pts[1:])
    return np.concatenate(starts), np.concatenate(ends)


def _angle(u, v):
    return np.arctan2(np.linalg.norm(np.cross(u, v), axis=-1), np.sum(u * v, axis=-1))


def point_arc_angle(p, a, b):
    """Angular distance from points ``p`` to great-circle arcs ``a``-``b`` (rows paired)."""
    n = np.cross(a, b)
    nn = np.linalg.norm(n, axis=-1)
    ends = np.minimum(_angle(p, a), _angle(p, b))
    good = nn > 1e-15
    nh = np.where(good[:, None], n / np.where(good, nn, 1.0)[:, None], 0.0)
    s = np.sum(p * nh, axis=-1)
    q = p - s[:, None] * nh
    inside = good & (np.sum(np.cross(a, q) * nh, axis=-1) >= 0) & (
        np.sum(np.cross(q, b) * nh, axis=-1) >= 0)
    perp = np.arcsin(np.minimum(1.0, np.abs(s)))
    return np.where(inside, np.minimum(perp, ends), ends)


def coast_distance_km(lon, lat, coast: ZoneLayer, max_deg: float, within_km: float):
    """Distance to the nearest coastline arc, exact for points within ``within_km``.

    Points farther than that get ``inf``.
    """
    coast.require(POLYLINE)
    segs = [_slerp_subdivide(p, max_deg) for f in coast for p in f.paths]
    a = np.concatenate([s[0] for s in segs])
    b = np.concatenate([s[1] for s in segs])
    mid = a + b
    mid /= np.linalg.norm(mid, axis=1)[:, None]
    half = 0.5 * _angle(a, b)
    p = to_unit_xyz(lon, lat)
    reach = within_km / EARTH_RADIUS_KM + half.max()
    tree = cKDTree(mid)
    hits = tree.query_ball_point(p, 2 * math.sin(min(reach, math.pi) / 2) * (1 + 1e-9))
    lens = np.fromiter((len(h) for h in hits), dtype=np.int64, count=len(p))
    out = np.full(len(p), np.inf)
    if lens.sum() == 0:
        return out
    rows = np.repeat(np.arange(len(p)), lens)
    idx = np.concatenate([np.asarray(h, dtype=np.int64) for h in hits if h])
    ang = point_arc_angle(p[rows], a[idx], b[idx])
    best = np.full(len(p), np.inf)
    np.minimum.at(best, rows, ang)
    return best * EARTH_RADIUS_KM


def coastal_mask(grid: PopGrid, coast: ZoneLayer, max_dist: float = 100.0):
    """Land cells whose centroid lies within ``max_dist`` km of a coastline.

    Coast segments are cut into great-circle pieces of at most a quarter cell
    and the exact point-to-arc distance is taken to nearby pieces.
    Returns ``(mask grid, population share inside the mask)``.
    """
    coast.require(POLYLINE)
    if not max_dist > 0:
        raise ParameterError("max_dist must be > 0")
    rows, cols, lon, lat, vals = grid.land_cells()
    d = coast_distance_km(lon, lat, coast, grid.header.cellsize / 4.0, max_dist)
    inside = d <= max_dist
    out = np.full(grid.header.shape, np.nan)
    out[rows, cols] = inside.astype(float)
    total = math.fsum(vals)
    share = math.fsum(vals[inside]) / total if total > 0 else 0.0
    return PopGrid(grid.header, out), share


# --- aggregation ---------------------------------------------------------------

def aggregate_blocks(grid: PopGrid, factor: int) -> PopGrid:
    """Sum ``factor`` x ``factor`` blocks, anchored at the north-west corner.

    Trailing partial blocks on the south and east edges are summed as-is; the
    output header grows to cover them. All-ocean blocks stay nodata.
    """
    if int(factor) != factor or factor < 1:
        raise ParameterError("factor must be an integer >= 1")
    if factor == 1:
        return grid
    h = grid.header
    nr = -(-h.nrows // factor)
    nc = -(-h.ncols // factor)
    padded = np.full((nr * factor, nc * factor), np.nan)
    padded[: h.nrows, : h.ncols] = grid.values
    blocks = padded.reshape(nr, factor, nc, factor).transpose(0, 2, 1, 3).reshape(nr, nc, -1)
    land = ~np.isnan(blocks)
    sums = np.where(land, blocks, 0.0).sum(axis=2)
    sums = np.where(land.any(axis=2), sums, np.nan)
    cs = h.cellsize * factor
    header = GridHeader(nc, nr, h.xll, h.ymax - nr * cs, cs, h.nodata)
    return PopGrid(header, sums)


@dataclass(frozen=True)
class HexCell:
    q: int
    r: int
    x: float
    y: float
    value: float


@dataclass(frozen=True)
class HexLayer:
    """Flat-top hexagons on the plate carrée plane (degrees).

    ``width`` is the corner-to-corner width; axial ``(q, r)`` centres sit at
    ``x = ox + 1.5 s q``, ``y = oy + sqrt(3) s (r + q/2)`` with ``s = width/2``.
    """

    width: float
    origin: tuple
    cells: tuple

    @property
    def size(self) -> float:
        return self.width / 2.0

    def center(self, q, r):
        s = self.size
        return (self.origin[0] + 1.5 * s * q,
                self.origin[1] + math.sqrt(3.0) * s * (r + q / 2.0))

    def corners(self, q, r):
        cx, cy = self.center(q, r)
        s = self.size
        return [(cx + s * math.cos(math.radians(60 * i)), cy + s * math.sin(math.radians(60 * i)))
                for i in range(6)]

    @property
    def total(self) -> float:
        return math.fsum(c.value for c in self.cells)


def hex_index(x, y, width: float, origin=(0.0, 0.0)):
    """Axial coordinates of the hexagon whose centre is nearest each point.

    Equidistant points go to the lowest ``(q, r)``.
    """
    s = width / 2.0
    x = np.asarray(x, dtype=float) - origin[0]
    y = np.asarray(y, dtype=float) - origin[1]
    qf = x / (1.5 * s)
    rf = y / (math.sqrt(3.0) * s) - qf / 2.0
    q0 = np.floor(qf).astype(np.int64)
    r0 = np.floor(rf).astype(np.int64)
    cand = [(q0, r0), (q0, r0 + 1), (q0 + 1, r0), (q0 + 1, r0 + 1)]
    best_d = np.full(x.shape, np.inf)
    best_q = q0.copy()
    best_r = r0.copy()
    for cq, cr in cand:
        cx = 1.5 * s * cq
        cy = math.sqrt(3.0) * s * (cr + cq / 2.0)
        d = (x - cx) ** 2 + (y - cy) ** 2
        better = d < best_d
        best_d = np.where(better, d, best_d)
        best_q = np.where(better, cq, best_q)
        best_r = np.where(better, cr, best_r)
    return best_q, best_r


def hex_bin(grid: PopGrid, hex_width: float, origin=(0.0, 0.0)) -> HexLayer:
    """Sum land-cell populations into flat-top hexagons by centroid."""
    if not hex_width > 0:
        raise ParameterError("hex_width must be > 0")
    _, _, lon, lat, vals = grid.land_cells()
    q, r = hex_index(lon, lat, hex_width, origin)
    keys = np.stack([q, r], axis=1)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    sums = np.bincount(inv.ravel(), weights=vals, minlength=len(uniq))
    layer = HexLayer(float(hex_width), tuple(origin), ())
    cells = []
    for (qq, rr), v in zip(uniq.tolist(), sums.tolist()):
        cx, cy = layer.center(qq, rr)
        cells.append(HexCell(int(qq), int(rr), cx, cy, float(v)))
    return HexLayer(float(hex_width), tuple(origin), tuple(cells))
