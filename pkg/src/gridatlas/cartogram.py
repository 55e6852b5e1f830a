"""Diffusion-based density-equalizing cartograms on the plate carrée plane.

The density lattice diffuses under its own zero-flux Laplacian, solved in
closed form at any time through a cosine transform. Lattice nodes are
advected along ``-grad(rho)/rho`` with an adaptive Heun integrator until the
density is uniform to within ``rel_tol``.

Internally arrays are indexed ``[y, x]`` with row 0 at the south edge.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dctn, idctn

from .errors import JoinError, NumericalFailureError, ParameterError
from .grid import GridHeader, PopGrid, write_asc
from .stats import ZoneStats
from .vector import POLYGON, ZoneLayer, densify


class ClampWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Density on a square-celled lattice; ``rho[j, i]`` is cell (i, j) from the SW corner."""

    x0: float
    y0: float
    cellsize: float
    rho: np.ndarray = field(repr=False)
    rho_sea: float = 0.0
    pad: int = 0
    land_area: float = 0.0
    population: float = 0.0

    @property
    def shape(self):
        return self.rho.shape

    @property
    def node_area(self) -> float:
        return self.cellsize ** 2

    @property
    def header(self) -> GridHeader:
        ny, nx = self.rho.shape
        return GridHeader(nx, ny, self.x0, self.y0, self.cellsize)


def _overlap(src_edges, dst_edges):
    """Fraction of each source interval that falls in each destination interval."""
    lo = np.maximum(dst_edges[:-1, None], src_edges[None, :-1])
    hi = np.minimum(dst_edges[1:, None], src_edges[None, 1:])
    return np.clip(hi - lo, 0.0, None) / np.diff(src_edges)[None, :]


def build_density(grid: PopGrid, pad: int = 32, lattice=(512, 256),
                  min_density_frac: float = 1e-3) -> DensityGrid:
    """Resample population to a lattice of density per unit map area.

    Land mass is spread over the lattice by exact area overlap. Ocean, cells
    outside the grid and the ``pad``-wide frame get the mean land density. A
    ``min_density_frac`` blend toward the lattice mean keeps every node strictly
    positive without changing the lattice total.
    """
    if not grid.total > 0:
        raise ParameterError("grid population total must be > 0")
    if pad < 0:
        raise ParameterError("pad must be >= 0")
    h = grid.header
    if lattice is None:
        lattice = (h.ncols, h.nrows)
    nx, ny = int(lattice[0]), int(lattice[1])
    width, height = h.xmax - h.xll, h.ymax - h.yll
    cs = max(width / nx, height / ny)
    ix0 = h.xll - (nx * cs - width) / 2.0
    iy0 = h.yll - (ny * cs - height) / 2.0

    sx = h.xll + np.arange(h.ncols + 1) * h.cellsize
    sy = h.yll + np.arange(h.nrows + 1) * h.cellsize  # south to north
    ox = _overlap(sx, ix0 + np.arange(nx + 1) * cs)
    oy = _overlap(sy, iy0 + np.arange(ny + 1) * cs)
    pop_sn = grid.filled(0.0)[::-1]
    land_sn = grid.land[::-1].astype(float)
    pop = oy @ pop_sn @ ox.T
    land = (oy @ land_sn @ ox.T) * h.cellsize ** 2
    node_area = cs * cs
    land = np.minimum(land, node_area)

    total_land = float(land.sum())
    total_pop = float(pop.sum())
    mean_land = total_pop / total_land
    interior = (pop + mean_land * (node_area - land)) / node_area
    rho = np.full((ny + 2 * pad, nx + 2 * pad), mean_land)
    rho[pad:pad + ny, pad:pad + nx] = interior
    if min_density_frac > 0:
        rho = (1.0 - min_density_frac) * rho + min_density_frac * rho.mean()
    return DensityGrid(ix0 - pad * cs, iy0 - pad * cs, cs, rho, mean_land, pad,
                       total_land, total_pop)


# --- lattice diffusion ---------------------------------------------------------

class _Diffusion:
    """Heat flow of the cell densities under the lattice (Neumann) Laplacian.

    DCT-II diagonalizes the 5-point Laplacian with reflecting edges, with
    eigenvalues 4 sin^2(pi m / 2L) per axis. The resulting semigroup keeps
    every cell strictly positive and the total mass unchanged at any time.
    """

    def __init__(self, rho):
        ly, lx = rho.shape
        self.shape = (ly, lx)
        self.coef = dctn(rho, type=2, norm="ortho")
        lam_x = 4.0 * np.sin(np.pi * np.arange(lx) / (2 * lx)) ** 2
        lam_y = 4.0 * np.sin(np.pi * np.arange(ly) / (2 * ly)) ** 2
        self.lam = lam_y[:, None] + lam_x[None, :]
        self.mean = float(np.mean(rho))

    def centers(self, t):
        """Density at cell centres after diffusing for time ``t``."""
        return idctn(self.coef * np.exp(-self.lam * t), type=2, norm="ortho")

    def nodes(self, t):
        """Density and its gradient at the (ly+1, lx+1) lattice nodes.

        Each node takes the mean and the central differences of the four cells
        around it; cells beyond the edge mirror their neighbour.
        """
        p = np.pad(self.centers(t), 1, mode="edge")
        sw, se = p[:-1, :-1], p[:-1, 1:]
        nw, ne = p[1:, :-1], p[1:, 1:]
        rho = 0.25 * (sw + se + nw + ne)
        gx = 0.5 * ((se - sw) + (ne - nw))
        gy = 0.5 * ((nw - sw) + (ne - se))
        return rho, gx, gy


def _velocity(diff, t):
    rho, gx, gy = diff.nodes(t)
    vx = -gx / rho
    vy = -gy / rho
    for v in (vx, vy):
        v[0, :] = v[-1, :] = 0.0
        v[:, 0] = v[:, -1] = 0.0
    dev = float(np.max(np.abs(rho - diff.mean)) / diff.mean)
    return vx, vy, dev


def _interp(field_, x, y):
    ny, nx = field_.shape
    i0 = np.clip(np.floor(x).astype(np.int64), 0, nx - 2)
    j0 = np.clip(np.floor(y).astype(np.int64), 0, ny - 2)
    fx = x - i0
    fy = y - j0
    return ((1 - fy) * ((1 - fx) * field_[j0, i0] + fx * field_[j0, i0 + 1])
            + fy * ((1 - fx) * field_[j0 + 1, i0] + fx * field_[j0 + 1, i0 + 1]))


@dataclass(frozen=True, eq=False)
class DeformationField:
    """Cumulative node displacement in map units (degrees); arrays are ``[y, x]`` south-first."""

    x0: float
    y0: float
    cellsize: float
    dx: np.ndarray = field(repr=False)
    dy: np.ndarray = field(repr=False)

    @property
    def node_header(self) -> GridHeader:
        ny, nx = self.dx.shape
        cs = self.cellsize
        return GridHeader(nx, ny, self.x0 - cs / 2, self.y0 - cs / 2, cs)

    @property
    def max_displacement(self) -> float:
        return float(np.max(np.hypot(self.dx, self.dy)))

    def displace(self, x, y):
        """Warp plane coordinates; points outside the lattice are clamped onto it."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ny, nx = self.dx.shape
        gx = (x - self.x0) / self.cellsize
        gy = (y - self.y0) / self.cellsize
        outside = (gx < 0) | (gx > nx - 1) | (gy < 0) | (gy > ny - 1)
        if outside.any():
            warnings.warn(f"{int(outside.sum())} vertices outside the lattice were clamped",
                          ClampWarning, stacklevel=3)
            gx = np.clip(gx, 0, nx - 1)
            gy = np.clip(gy, 0, ny - 1)
            x = self.x0 + gx * self.cellsize
            y = self.y0 + gy * self.cellsize
        return x + _interp(self.dx, gx, gy), y + _interp(self.dy, gx, gy)

    def to_asc(self) -> tuple[str, str]:
        """``(dx, dy)`` as ASCII grids (north-first, one value per node)."""
        h = self.node_header
        return write_asc(h, self.dx[::-1]), write_asc(h, self.dy[::-1])


@dataclass(frozen=True, eq=False)
class CartogramSolution:
    field: DeformationField
    iterations: int
    converged: bool
    time: float
    deviation_history: tuple
    mass_drift: tuple  # relative change of total mass per accepted step


def solve_cartogram(density: DensityGrid, max_steps: int = 2000, rel_tol: float = 0.01,
                    step_tol: float = 0.01, dt0: float = 0.1) -> CartogramSolution:
    """Advect lattice nodes along the diffusion velocity field.

    Stops once the node density deviates from the mean by less than
    ``rel_tol`` (relative) or after ``max_steps`` accepted steps. Time is in
    lattice units (one cell = one unit of length).
    """
    diff = _Diffusion(np.asarray(density.rho, dtype=float))
    ly, lx = diff.shape
    y, x = np.mgrid[0:ly + 1, 0:lx + 1].astype(float)
    x0, y0 = x.copy(), y.copy()
    t, dt = 0.0, dt0
    vx, vy, dev = _velocity(diff, t)
    devs = [dev]
    drift = []
    mass = float(diff.centers(0.0).sum())
    steps = 0
    while dev >= rel_tol and steps < max_steps:
        v1x, v1y = _interp(vx, x, y), _interp(vy, x, y)
        for _ in range(60):
            ex, ey = x + dt * v1x, y + dt * v1y
            nvx, nvy, ndev = _velocity(diff, t + dt)
            v2x, v2y = _interp(nvx, ex, ey), _interp(nvy, ex, ey)
            hx = x + 0.5 * dt * (v1x + v2x)
            hy = y + 0.5 * dt * (v1y + v2y)
            err = float(np.max(np.hypot(hx - ex, hy - ey)))
            if not np.isfinite(err):
                raise NumericalFailureError("non-finite displacement", steps + 1)
            if err <= step_tol:
                break
            dt /= 2.0
        else:
            raise NumericalFailureError("step size underflow", steps + 1)
        x = np.clip(hx, 0, lx)
        y = np.clip(hy, 0, ly)
        t += dt
        steps += 1
        vx, vy, dev = nvx, nvy, ndev
        devs.append(dev)
        new_mass = float(diff.centers(t).sum())
        drift.append(abs(new_mass - mass) / mass)
        mass = new_mass
        dt *= 1.5
    cs = density.cellsize
    fld = DeformationField(density.x0, density.y0, cs, (x - x0) * cs, (y - y0) * cs)
    return CartogramSolution(fld, steps, dev < rel_tol, t, tuple(devs), tuple(drift))


# --- geometry -----------------------------------------------------------------

def warp_geometry(zones: ZoneLayer, deformation: DeformationField) -> ZoneLayer:
    """Move every vertex with the deformation field.

    Segments are first split so none exceeds one lattice cell.
    """
    step = deformation.cellsize

    def move(coords):
        pts = densify(coords, step)
        wx, wy = deformation.displace(pts[:, 0], pts[:, 1])
        out = np.column_stack([wx, wy])
        if np.array_equal(coords[0], coords[-1]):
            out[-1] = out[0]
        return out

    return zones.map_coords(move)


@dataclass(frozen=True)
class ZoneDiagnostic:
    id: str
    target_share: float
    achieved_area_share: float
    rel_error: float


@dataclass(frozen=True)
class CartogramDiagnostics:
    zones: tuple
    max_rel_error: float
    iterations: int = 0
    converged: bool = True

    def as_dict(self) -> dict:
        return {
            "max_rel_error": self.max_rel_error,
            "iterations": self.iterations,
            "converged": self.converged,
            "zones": [vars(z) for z in self.zones],
        }


def cartogram_diagnostics(warped: ZoneLayer, stats: ZoneStats,
                          solution: CartogramSolution | None = None) -> CartogramDiagnostics:
    """Compare each zone's share of map area with its share of population."""
    warped.require(POLYGON)
    areas = {f.id: f.area() for f in warped}
    missing = [z.id for z in stats.zones if z.id not in areas]
    if missing:
        raise JoinError(f"zones missing from warped layer: {', '.join(missing)}", missing)
    targets = [z for z in stats.zones if z.population > 0]
    pop = math.fsum(z.population for z in targets)
    area = math.fsum(areas[z.id] for z in targets)
    diags = []
    for z in targets:
        ts = z.population / pop
        a = areas[z.id] / area
        diags.append(ZoneDiagnostic(z.id, ts, a, abs(a - ts) / ts))
    worst = max((d.rel_error for d in diags), default=0.0)
    iters = solution.iterations if solution else 0
    conv = solution.converged if solution else True
    return CartogramDiagnostics(tuple(diags), worst, iters, conv)
