"""Marching-squares isolines on the node lattice of a surface."""
from __future__ import annotations

import warnings
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .grid import GridHeader
from .vector import feature_collection, linestring_feature


class SkippedLevelWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Isoline:
    level: float
    coords: np.ndarray = field(repr=False)  # (n, 2) lon, lat
    closed: bool


@dataclass(frozen=True)
class IsolineSet:
    levels: tuple
    lines: tuple
    skipped: tuple = ()

    def at(self, level):
        return [ln for ln in self.lines if ln.level == level]

    def to_geojson(self) -> str:
        return feature_collection(
            linestring_feature(ln.coords, level=ln.level, closed=ln.closed) for ln in self.lines)


def _edge_point(z, key, level):
    kind, i, j = key
    if kind == "h":
        za, zb = z[i, j], z[i, j + 1]
        t = (level - za) / (zb - za)
        return i, j + t
    za, zb = z[i, j], z[i + 1, j]
    t = (level - za) / (zb - za)
    return i + t, j


def _cell_segments(above, z, i, j, level):
    tl, tr = above[i, j], above[i, j + 1]
    bl, br = above[i + 1, j], above[i + 1, j + 1]
    top, right = ("h", i, j), ("v", i, j + 1)
    bottom, left = ("h", i + 1, j), ("v", i, j)
    crossed = [e for e, (a, b) in ((top, (tl, tr)), (right, (tr, br)),
                                  (bottom, (bl, br)), (left, (tl, bl))) if a != b]
    if len(crossed) == 2:
        return [tuple(crossed)]
    if len(crossed) == 4:
        center = (z[i, j] + z[i, j + 1] + z[i + 1, j] + z[i + 1, j + 1]) / 4.0 >= level
        if center == tl:
            return [(top, right), (bottom, left)]
        return [(top, left), (bottom, right)]
    return []


def _chain(segments):
    """Join segments sharing edge keys into (key list, closed) chains."""
    touching = defaultdict(list)
    for s, (a, b) in enumerate(segments):
        touching[a].append(s)
        touching[b].append(s)
    used = [False] * len(segments)
    chains = []

    def walk(start_key, s):
        keys = [start_key]
        key = start_key
        while s is not None:
            used[s] = True
            a, b = segments[s]
            key = b if a == key else a
            keys.append(key)
            s = next((t for t in touching[key] if not used[t]), None)
        return keys

    ends = sorted(k for k, segs in touching.items() if len(segs) == 1)
    for k in ends:
        s = touching[k][0]
        if not used[s]:
            chains.append((walk(k, s), False))
    for s in range(len(segments)):
        if not used[s]:
            keys = walk(segments[s][0], s)
            chains.append((keys, keys[0] == keys[-1]))
    return chains


def extract_isolines(values, header: GridHeader | None = None, levels=()) -> IsolineSet:
    """Isolines of a surface sampled at the cell centroids of ``header``.

    ``values`` may also be a potential surface (anything with ``header`` and
    ``values``), in which case ``header`` can be omitted.

    Edges are interpolated linearly; saddle cells are resolved by comparing the
    mean of the four corners with the level. Levels outside the open data
    range are skipped with a ``SkippedLevelWarning``.
    """
    if header is None or hasattr(values, "header"):
        header = header or values.header
        values = values.values
    z = np.asarray(values, dtype=float)
    levels = [float(v) for v in levels]
    if any(b <= a for a, b in zip(levels[:-1], levels[1:])):
        raise ParameterError("levels must be strictly ascending")
    zmin, zmax = float(np.nanmin(z)), float(np.nanmax(z))
    lines, skipped = [], []
    nr, nc = z.shape
    for level in levels:
        if not zmin < level < zmax:
            skipped.append(level)
            warnings.warn(f"level {level} outside data range ({zmin}, {zmax})",
                          SkippedLevelWarning, stacklevel=2)
            continue
        above = z >= level
        diff_h = above[:, :-1] != above[:, 1:]
        diff_v = above[:-1, :] != above[1:, :]
        active = (diff_h[:-1, :] | diff_h[1:, :] | diff_v[:, :-1] | diff_v[:, 1:])
        segments = []
        for i, j in zip(*np.nonzero(active)):
            segments.extend(_cell_segments(above, z, int(i), int(j), level))
        for keys, closed in _chain(segments):
            rc = np.array([_edge_point(z, k, level) for k in keys])
            lon = header.xll + (rc[:, 1] + 0.5) * header.cellsize
            lat = header.ymax - (rc[:, 0] + 0.5) * header.cellsize
            lines.append(Isoline(level, np.column_stack([lon, lat]), closed))
    return IsolineSet(tuple(levels), tuple(lines), tuple(skipped))


def bilinear(values, header: GridHeader, lon, lat):
    """Bilinear interpolation of node values at (lon, lat)."""
    z = np.asarray(values, dtype=float)
    c = (np.asarray(lon, dtype=float) - header.xll) / header.cellsize - 0.5
    r = (header.ymax - np.asarray(lat, dtype=float)) / header.cellsize - 0.5
    nr, nc = z.shape
    i0 = np.clip(np.floor(r).astype(int), 0, nr - 2)
    j0 = np.clip(np.floor(c).astype(int), 0, nc - 2)
    fr = r - i0
    fc = c - j0
    return ((1 - fr) * ((1 - fc) * z[i0, j0] + fc * z[i0, j0 + 1])
            + fr * ((1 - fc) * z[i0 + 1, j0] + fc * z[i0 + 1, j0 + 1]))
