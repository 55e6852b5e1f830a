"""Vector zone layers: a GeoJSON subset reader/writer and planar polygon helpers."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import GeometryError, UnsupportedFeatureError, WrongKindError

POLYGON = "polygon"
POLYLINE = "polyline"

_ID_KEYS = ("id", "ADM0_A3", "adm0_a3", "ISO_A3", "iso_a3", "code")
_NAME_KEYS = ("name", "NAME", "ADMIN", "admin", "NAME_EN", "name_en")


@dataclass(frozen=True)
class Feature:
    """One zone. ``parts`` holds polygons (lists of rings) or paths.

    Every ring/path is an ``(n, 2)`` float array of lon, lat.
    """

    id: str
    name: str
    kind: str
    parts: tuple = field(repr=False)

    def __post_init__(self):
        if self.kind == POLYGON:
            for poly in self.parts:
                for ring in poly:
                    _check_ring(ring)
        elif self.kind == POLYLINE:
            for path in self.parts:
                if len(path) < 2:
                    raise GeometryError(f"{self.id}: polyline path needs >= 2 vertices")
        else:
            raise WrongKindError(f"unknown feature kind {self.kind!r}")

    @property
    def rings(self) -> list[np.ndarray]:
        if self.kind != POLYGON:
            return []
        return [ring for poly in self.parts for ring in poly]

    @property
    def paths(self) -> list[np.ndarray]:
        if self.kind == POLYGON:
            return self.rings
        return list(self.parts)

    def bbox(self):
        pts = np.concatenate(self.paths)
        return pts[:, 0].min(), pts[:, 1].min(), pts[:, 0].max(), pts[:, 1].max()

    def area(self) -> float:
        """Planar area in squared coordinate units (outer rings minus holes)."""
        if self.kind != POLYGON:
            return 0.0
        return float(sum(polygon_area(poly) for poly in self.parts))

    def anchor(self) -> tuple[float, float]:
        """Centroid of the largest polygon's outer ring, or of the first path."""
        if self.kind != POLYGON:
            p = self.parts[0]
            return float(p[:, 0].mean()), float(p[:, 1].mean())
        largest = max(self.parts, key=polygon_area)
        return ring_centroid(largest[0])

    def map_coords(self, fn) -> "Feature":
        """New feature with ``fn`` applied to every coordinate array."""
        if self.kind == POLYGON:
            parts = tuple(tuple(fn(r) for r in poly) for poly in self.parts)
        else:
            parts = tuple(fn(p) for p in self.parts)
        return Feature(self.id, self.name, self.kind, parts)


def _check_ring(ring):
    if len(ring) < 4:
        raise GeometryError(f"polygon ring has {len(ring)} vertices, needs >= 4")
    if not np.array_equal(ring[0], ring[-1]):
        raise GeometryError("polygon ring is not closed")


@dataclass(frozen=True)
class ZoneLayer:
    features: tuple = ()

    def __len__(self):
        return len(self.features)

    def __iter__(self):
        return iter(self.features)

    @property
    def kind(self) -> str:
        kinds = {f.kind for f in self.features}
        if len(kinds) == 1:
            return kinds.pop()
        return "mixed" if kinds else "empty"

    @property
    def ids(self) -> list[str]:
        return [f.id for f in self.features]

    def require(self, kind: str) -> None:
        if self.kind != kind:
            raise WrongKindError(f"expected a {kind} layer, got {self.kind}")

    def map_coords(self, fn) -> "ZoneLayer":
        return ZoneLayer(tuple(f.map_coords(fn) for f in self.features))


# --- GeoJSON ---------------------------------------------------------------

def _coords(seq, index):
    try:
        arr = np.asarray(seq, dtype=float)
    except (TypeError, ValueError):
        raise GeometryError(f"feature {index}: non-numeric or ragged coordinates") from None
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise GeometryError(f"feature {index}: coordinates must be [lon, lat] pairs")
    return arr[:, :2].copy()


def _polygon(rings, index):
    out = []
    for ring in rings:
        arr = _coords(ring, index)
        try:
            _check_ring(arr)
        except GeometryError as exc:
            raise GeometryError(f"feature {index}: {exc}") from None
        out.append(arr)
    return tuple(out)


def _pick(props, keys):
    for k in keys:
        v = props.get(k)
        if v not in (None, "", "-99"):
            return str(v)
    return None


def parse_geojson_layer(text) -> ZoneLayer:
    """Read a FeatureCollection of (Multi)Polygon / (Multi)LineString features."""
    if not isinstance(text, (str, bytes)):
        text = text.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GeometryError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise UnsupportedFeatureError("top-level object must be a FeatureCollection")

    features = []
    seen: dict[str, int] = {}
    for i, feat in enumerate(doc.get("features", [])):
        geom = feat.get("geometry") or {}
        gtype = geom.get("type")
        coords = geom.get("coordinates")
        if gtype == "Polygon":
            kind, parts = POLYGON, (_polygon(coords, i),)
        elif gtype == "MultiPolygon":
            kind, parts = POLYGON, tuple(_polygon(p, i) for p in coords)
        elif gtype == "LineString":
            kind, parts = POLYLINE, (_coords(coords, i),)
        elif gtype == "MultiLineString":
            kind, parts = POLYLINE, tuple(_coords(p, i) for p in coords)
        else:
            raise UnsupportedFeatureError(f"unsupported geometry type {gtype!r}", i)
        if kind == POLYLINE and any(len(p) < 2 for p in parts):
            raise GeometryError(f"feature {i}: polyline path needs >= 2 vertices")

        props = feat.get("properties") or {}
        fid = feat.get("id")
        fid = str(fid) if fid not in (None, "") else _pick(props, _ID_KEYS)
        name = _pick(props, _NAME_KEYS)
        if fid is None and name is None:
            raise UnsupportedFeatureError("feature has neither an id nor a name", i)
        fid = fid or name
        if fid in seen:
            seen[fid] += 1
            fid = f"{fid}#{seen[fid]}"
        else:
            seen[fid] = 0
        features.append(Feature(fid, name or fid, kind, parts))
    return ZoneLayer(tuple(features))


def _geometry_json(feature: Feature):
    def tolist(a):
        return [[float(x), float(y)] for x, y in a]

    if feature.kind == POLYGON:
        polys = [[tolist(r) for r in poly] for poly in feature.parts]
        if len(polys) == 1:
            return {"type": "Polygon", "coordinates": polys[0]}
        return {"type": "MultiPolygon", "coordinates": polys}
    paths = [tolist(p) for p in feature.parts]
    if len(paths) == 1:
        return {"type": "LineString", "coordinates": paths[0]}
    return {"type": "MultiLineString", "coordinates": paths}


def feature_collection(features: Sequence[dict]) -> str:
    return json.dumps({"type": "FeatureCollection", "features": list(features)},
                      sort_keys=True, separators=(",", ":"))


def layer_to_geojson(layer: ZoneLayer, properties=None) -> str:
    properties = properties or {}
    feats = []
    for f in layer:
        props = {"id": f.id, "name": f.name}
        props.update(properties.get(f.id, {}))
        feats.append({"type": "Feature", "id": f.id, "properties": props,
                      "geometry": _geometry_json(f)})
    return feature_collection(feats)


def linestring_feature(coords, **props) -> dict:
    return {"type": "Feature", "properties": props,
            "geometry": {"type": "LineString",
                         "coordinates": [[float(x), float(y)] for x, y in coords]}}


# --- planar helpers ----------------------------------------------------------

def ring_signed_area(ring) -> float:
    x = ring[:, 0]
    y = ring[:, 1]
    return 0.5 * float(np.dot(x[:-1], y[1:]) - np.dot(x[1:], y[:-1]))


def polygon_area(poly) -> float:
    outer = abs(ring_signed_area(poly[0]))
    return outer - sum(abs(ring_signed_area(r)) for r in poly[1:])


def ring_centroid(ring) -> tuple[float, float]:
    x, y = ring[:, 0], ring[:, 1]
    cross = x[:-1] * y[1:] - x[1:] * y[:-1]
    a = cross.sum() / 2
    if a == 0:
        return float(x[:-1].mean()), float(y[:-1].mean())
    cx = ((x[:-1] + x[1:]) * cross).sum() / (6 * a)
    cy = ((y[:-1] + y[1:]) * cross).sum() / (6 * a)
    return float(cx), float(cy)


def points_in_rings(px, py, rings) -> np.ndarray:
    """Even-odd containment of points in the union of ``rings``."""
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    inside = np.zeros(px.shape, dtype=bool)
    for ring in rings:
        xs, ys = ring[:, 0], ring[:, 1]
        sel = np.nonzero((px >= xs.min()) & (px <= xs.max())
                         & (py >= ys.min()) & (py <= ys.max()))[0]
        if sel.size == 0:
            continue
        qx, qy = px[sel], py[sel]
        flip = np.zeros(sel.size, dtype=bool)
        for k in range(len(ring) - 1):
            x1, y1, x2, y2 = xs[k], ys[k], xs[k + 1], ys[k + 1]
            if y1 == y2:
                continue
            crosses = (y1 > qy) != (y2 > qy)
            if not crosses.any():
                continue
            xint = x1 + (qy - y1) * (x2 - x1) / (y2 - y1)
            flip ^= crosses & (qx < xint)
        inside[sel] ^= flip
    return inside


def densify(coords, max_len: float) -> np.ndarray:
    """Insert vertices so no segment is longer than ``max_len``."""
    coords = np.asarray(coords, dtype=float)
    out = [coords[:1]]
    for a, b in zip(coords[:-1], coords[1:]):
        n = max(1, int(np.ceil(np.hypot(*(b - a)) / max_len)))
        t = (np.arange(1, n + 1) / n)[:, None]
        out.append(a + (b - a) * t)
    res = np.concatenate(out)
    res[-1] = coords[-1]
    return res
