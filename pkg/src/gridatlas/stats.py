"""Frequency tables, summaries, coverage sets and zone aggregation over a PopGrid."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDomainError, ParameterError, UnreachableShareError
from .grid import PopGrid, band_areas_km2
from .vector import POLYGON, ZoneLayer, points_in_rings

DECADE_BREAKS = (1, 10, 100, 1_000, 10_000, 100_000, 1_000_000)


@dataclass(frozen=True)
class FrequencyTable:
    """Counts per bin.

    ``breaks`` holds every bin edge: the observed minimum (or the first cut if
    lower), the cut points, then the observed maximum. Bin ``i`` spans
    ``[breaks[i], breaks[i+1])``; the last bin is closed at the maximum.
    """

    breaks: tuple
    counts: tuple
    freq_pct: tuple
    total: int

    def labels(self) -> list[str]:
        fmt = _fmt_edge
        out = [f"< {fmt(self.breaks[1])}"]
        for lo, hi in zip(self.breaks[1:-1], self.breaks[2:]):
            out.append(f"{fmt(lo)} - {fmt(hi)}")
        return out

    def rows(self):
        return list(zip(self.labels(), self.counts, self.freq_pct))

    def to_csv(self) -> str:
        lines = ["lower,upper,count,pct"]
        for lo, hi, c, p in zip(self.breaks[:-1], self.breaks[1:], self.counts, self.freq_pct):
            lines.append(f"{_fmt_edge(lo)},{_fmt_edge(hi)},{c},{p:.1f}")
        lines.append(f",,{self.total},{sum(self.freq_pct):.1f}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        width = max(len(lbl) for lbl in self.labels())
        out = [f"{'interval':<{width}}  {'count':>8}  {'pct':>5}"]
        for lbl, c, p in self.rows():
            out.append(f"{lbl:<{width}}  {c:>8}  {p:>5.1f}")
        out.append(f"{'total':<{width}}  {self.total:>8}  {100.0:>5.1f}")
        return "\n".join(out) + "\n"


def _fmt_edge(v):
    v = float(v)
    return str(int(v)) if v.is_integer() else f"{v:g}"


@dataclass(frozen=True)
class GridSummary:
    land_cells: int
    population_total: float
    mean: float
    median: float


@dataclass(frozen=True)
class CoverageResult:
    share_target: float
    cells_used: int
    cell_pct: float
    area_km2: float
    area_pct_of_land: float
    pop_covered: float
    population_total: float


@dataclass(frozen=True)
class ZoneTotal:
    id: str
    name: str
    population: float
    cell_count: int


@dataclass(frozen=True)
class ZoneStats:
    zones: tuple
    unassigned_population: float
    unassigned_cells: int
    grid_total: float
    cell_zone: np.ndarray = field(default=None, repr=False, compare=False)

    def by_id(self) -> dict:
        return {z.id: z for z in self.zones}

    @property
    def assigned_total(self) -> float:
        return float(sum(z.population for z in self.zones))


def _land_values(grid: PopGrid) -> np.ndarray:
    return grid.values[grid.land]


def frequency_table(grid: PopGrid, breaks=DECADE_BREAKS) -> FrequencyTable:
    cuts = np.asarray(breaks, dtype=float)
    if cuts.ndim != 1 or cuts.size == 0 or np.any(np.diff(cuts) <= 0):
        raise ParameterError("breaks must be a non-empty strictly ascending list")
    vals = _land_values(grid)
    idx = np.searchsorted(cuts, vals, side="right")
    counts = np.bincount(idx, minlength=cuts.size + 1)
    total = int(vals.size)
    pct = tuple(100.0 * c / total if total else 0.0 for c in counts)
    lo = min(float(vals.min()), cuts[0]) if total else cuts[0]
    hi = max(float(vals.max()), cuts[-1]) if total else cuts[-1]
    edges = (lo, *cuts.tolist(), hi)
    return FrequencyTable(edges, tuple(int(c) for c in counts), pct, total)


def summary(grid: PopGrid) -> GridSummary:
    """Land-cell count, total, mean and median.

    For an even number of cells the median is the lower of the two middle
    values, so it is always an observed cell population.
    """
    vals = np.sort(_land_values(grid))
    if vals.size == 0:
        raise EmptyDomainError("grid has no land cells")
    total = math.fsum(vals)
    return GridSummary(int(vals.size), total, total / vals.size,
                       float(vals[(vals.size - 1) // 2]))


def _descending_order(grid: PopGrid):
    """Land cells sorted by population, largest first, ties by (row, col)."""
    rows, cols = np.nonzero(grid.land)
    vals = grid.values[rows, cols]
    order = np.argsort(-vals, kind="stable")
    return rows[order], cols[order], vals[order]


def _ranked_cumsum(grid: PopGrid):
    rows, cols, vals = _descending_order(grid)
    cum = np.cumsum(vals)
    if vals.size == 0 or cum[-1] <= 0:
        raise EmptyDomainError("grid population total is zero")
    return rows, cols, vals, cum


def cumulative_share(grid: PopGrid):
    """Concentration curve: cell percentage (densest first) vs population percentage.

    Returns two arrays of length ``n + 1`` starting at (0, 0) and ending at (100, 100).
    """
    _, _, vals, cum = _ranked_cumsum(grid)
    n = vals.size
    x = 100.0 * np.arange(n + 1) / n
    y = np.concatenate([[0.0], 100.0 * cum / cum[-1]])
    return x, y


def share_at_cell_pct(grid: PopGrid, cell_pct: float, bottom=False) -> float:
    """Population share (%) held by the top (or bottom) ``cell_pct`` % of cells."""
    _, _, vals, cum = _ranked_cumsum(grid)
    k = int(round(vals.size * cell_pct / 100.0))
    if bottom:
        held = cum[-1] - (cum[vals.size - k - 1] if vals.size - k > 0 else 0.0)
    else:
        held = cum[k - 1] if k > 0 else 0.0
    return 100.0 * held / cum[-1]


def min_cells_for_share(grid: PopGrid, share: float) -> CoverageResult:
    """Fewest cells whose summed population reaches ``share`` of the total."""
    if not 0 < share <= 1:
        raise ParameterError("share must be in (0, 1]")
    rows, _, vals, cum = _ranked_cumsum(grid)
    total = cum[-1]
    k = int(np.searchsorted(cum, share * total, side="left")) + 1
    k = min(k, vals.size)
    bands = band_areas_km2(grid.header)
    area = math.fsum(bands[rows[:k]])
    land_area = math.fsum(bands[np.nonzero(grid.land)[0]])
    return CoverageResult(share, k, 100.0 * k / vals.size, area,
                          100.0 * area / land_area, float(cum[k - 1]), float(total))


def top_cells_mask(grid: PopGrid, share: float) -> PopGrid:
    """1 on the cells chosen by ``min_cells_for_share``, 0 on other land, NaN on ocean."""
    cov = min_cells_for_share(grid, share)
    rows, cols, _ = _descending_order(grid)
    out = np.where(grid.land, 0.0, np.nan)
    out[rows[:cov.cells_used], cols[:cov.cells_used]] = 1.0
    return grid.with_values(out)


def aggregate_to_zones(grid: PopGrid, zones: ZoneLayer) -> ZoneStats:
    """Sum land-cell populations per zone by centroid containment.

    A cell lying in several zones goes to the first one in layer order.
    """
    zones.require(POLYGON)
    rows, cols, lon, lat, vals = grid.land_cells()
    owner = np.full(vals.size, -1, dtype=int)
    totals = []
    for z, feat in enumerate(zones):
        free = np.nonzero(owner < 0)[0]
        hit = free[points_in_rings(lon[free], lat[free], feat.rings)]
        owner[hit] = z
        totals.append(ZoneTotal(feat.id, feat.name, math.fsum(vals[hit]), int(hit.size)))
    un = owner < 0
    cell_zone = np.full(grid.header.shape, -1, dtype=int)
    cell_zone[rows, cols] = owner
    return ZoneStats(tuple(totals), math.fsum(vals[un]), int(un.sum()),
                     math.fsum(vals), cell_zone)


def min_zones_for_share(stats: ZoneStats, share: float):
    """Shortest list of zones (largest first) holding ``share`` of the grid total.

    Returns ``(zones, pop_pct)``.
    """
    if not 0 < share <= 1:
        raise ParameterError("share must be in (0, 1]")
    if stats.assigned_total <= 0:
        raise EmptyDomainError("zones hold no population")
    target = share * stats.grid_total
    if target > stats.assigned_total:
        raise UnreachableShareError(
            f"share {share} needs {target:.0f} persons but zones hold {stats.assigned_total:.0f}")
    ranked = sorted(stats.zones, key=lambda z: -z.population)
    acc = 0.0
    chosen = []
    for z in ranked:
        chosen.append(z)
        acc += z.population
        if acc >= target:
            break
    return chosen, 100.0 * acc / stats.grid_total
