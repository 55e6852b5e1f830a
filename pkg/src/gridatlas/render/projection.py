"""Plate carrée projection to SVG pixel space (y grows downwards)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Projection:
    kind: str = "equirectangular"
    scale: float = 2.0
    center_lon: float = 0.0

    def __post_init__(self):
        if self.kind != "equirectangular":
            raise ValueError(f"unsupported projection {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("scale must be > 0")

    @property
    def frame(self):
        """(min_x, min_y, width, height) of the whole-world frame in px."""
        s = self.scale
        return (-180.0 * s, -90.0 * s, 360.0 * s, 180.0 * s)

    def rel_lon(self, lon):
        d = np.asarray(lon, dtype=float) - self.center_lon
        return np.where(np.abs(d) <= 180.0, d, (d + 180.0) % 360.0 - 180.0)

    def xy(self, lon, lat):
        return self.rel_lon(lon) * self.scale, -np.asarray(lat, dtype=float) * self.scale

    def lonlat(self, x, y):
        lon = np.asarray(x, dtype=float) / self.scale + self.center_lon
        lon = np.where(np.abs(lon) <= 180.0, lon, (lon + 180.0) % 360.0 - 180.0)
        return lon, -np.asarray(y, dtype=float) / self.scale


def project(p, proj: Projection):
    x, y = proj.xy(p[0], p[1])
    return float(x), float(y)


def unproject(xy, proj: Projection):
    lon, lat = proj.lonlat(xy[0], xy[1])
    return float(lon), float(lat)


def _unwrapped(coords, proj):
    """Longitudes relative to the centre, made continuous along the path."""
    rel = proj.rel_lon(coords[:, 0])
    if len(rel) > 1:
        steps = np.diff(rel)
        steps = (steps + 180.0) % 360.0 - 180.0
        rel = np.concatenate([[rel[0]], rel[0] + np.cumsum(steps)])
    return rel


def _clip(ring, limit, keep_below):
    """Sutherland-Hodgman clip of a closed ring against ``x <= limit`` (or ``>=``)."""
    def inside(p):
        return p[0] <= limit if keep_below else p[0] >= limit

    out = []
    pts = ring[:-1]
    n = len(pts)
    for k in range(n):
        cur, nxt = pts[k], pts[(k + 1) % n]
        ci, ni = inside(cur), inside(nxt)
        if ci:
            out.append(cur)
        if ci != ni:
            t = (limit - cur[0]) / (nxt[0] - cur[0])
            out.append(cur + t * (nxt - cur))
    if len(out) < 3:
        return None
    out.append(out[0])
    return np.array(out)


def project_ring(ring, proj: Projection) -> list[np.ndarray]:
    """Project a closed lon/lat ring, splitting it at the wrap seam."""
    ring = np.asarray(ring, dtype=float)
    rel = _unwrapped(ring, proj)
    pts = np.column_stack([rel, ring[:, 1]])
    pieces = []
    if rel.min() >= -180.0 and rel.max() <= 180.0:
        pieces = [pts]
    else:
        for shift in (-360.0, 0.0, 360.0):
            p = pts + [shift, 0.0]
            if p[:, 0].max() < -180.0 or p[:, 0].min() > 180.0:
                continue
            p = _clip(p, 180.0, True)
            p = _clip(p, -180.0, False) if p is not None else None
            if p is not None:
                pieces.append(p)
    return [np.column_stack([p[:, 0] * proj.scale, -p[:, 1] * proj.scale]) for p in pieces]


def project_path(path, proj: Projection) -> list[np.ndarray]:
    """Project an open lon/lat path, breaking it where it jumps across the seam."""
    path = np.asarray(path, dtype=float)
    x, y = proj.xy(path[:, 0], path[:, 1])
    breaks = np.nonzero(np.abs(np.diff(x)) > 180.0 * proj.scale)[0] + 1
    return [np.column_stack([xs, ys]) for xs, ys in zip(np.split(x, breaks), np.split(y, breaks))
            if len(xs) >= 2]
