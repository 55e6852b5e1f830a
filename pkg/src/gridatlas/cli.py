"""``gridatlas`` command line: stats, maps, fetch, synth and make-all."""
from __future__ import annotations

import argparse
import hashlib
import html
import json
import math
import shlex
import sys
import urllib.error
import urllib.request
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    PotentialParams,
    aggregate_blocks,
    build_links,
    coastal_mask,
    empty_quarters,
    hex_bin,
    local_relative_index,
    stewart_potential,
)
from .cartogram import build_density, cartogram_diagnostics, solve_cartogram, warp_geometry
from .classify import breaks_manual, make_breaks
from .config import RunConfig, data_dir, load_config, tomllib
from .errors import (
    EXIT_INPUT,
    EXIT_MANUAL_STEP,
    EXIT_OK,
    EXIT_PARAMETER,
    GridAtlasError,
    IntegrityError,
    MissingInputError,
    NetworkError,
    ParameterError,
    ValidationError,
)
from .grid import (
    GridHeader,
    PopGrid,
    SynthSpec,
    band_areas_km2,
    parse_asc_grid,
    parse_csv_grid,
    synth_grid,
    write_asc_grid,
)
from .isolines import extract_isolines
from .render import (
    Layer,
    Projection,
    Scene,
    SymbolScale,
    Text,
    basemap_layer,
    emit_svg,
    render_choropleth,
    render_dorling,
    render_dots,
    render_hex_extrusion,
    render_linemap,
    render_overlay,
    render_prop_circles,
)
from .stats import (
    aggregate_to_zones,
    cumulative_share,
    frequency_table,
    min_cells_for_share,
    min_zones_for_share,
    share_at_cell_pct,
    summary,
    top_cells_mask,
)
from .vector import (
    POLYGON,
    POLYLINE,
    Feature,
    ZoneLayer,
    feature_collection,
    layer_to_geojson,
    linestring_feature,
    parse_geojson_layer,
)

MAP_KINDS = ("circles", "choropleth", "cartogram", "dots", "dorling", "potential", "links",
             "hex", "coastal", "glocal", "voids", "linemap", "halfmap")

FETCH_URLS = {
    "countries": "https://raw.githubusercontent.com/nvkelso/natural-earth-vector/master/"
                 "geojson/ne_110m_admin_0_countries.geojson",
    "coastline": "https://raw.githubusercontent.com/nvkelso/natural-earth-vector/master/"
                 "geojson/ne_110m_coastline.geojson",
}

GRID_INSTRUCTIONS = """\
The population grid is not downloaded automatically: the distributor requires a
free account and licence acceptance.

  1. Sign in at https://sedac.ciesin.columbia.edu/ (NASA Earthdata login).
  2. Download "Gridded Population of the World v4.11, Population Count, 2020,
     30 arc-minute", ASCII format (gpw_v4_population_count_rev11_2020_30_min.asc).
  3. Place the .asc file in {data} (or set GRIDATLAS_DATA) and pass it with --grid.
     A GeoTIFF can be converted with: gdal_translate -of AAIGrid in.tif out.asc
"""


# --- inputs --------------------------------------------------------------------

def _read_text(path: Path, what: str) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise MissingInputError(f"cannot read {what} {path}: {exc.strerror}") from exc


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Inputs:
    """Lazily loaded inputs plus their dataset identifiers for provenance."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.datasets: dict = {}
        self._cache: dict = {}

    def _path(self, name: str, label: str, required: bool):
        raw = getattr(self.cfg, name)
        if raw is None:
            if required:
                raise MissingInputError(f"missing required {label} layer (set --{name} or "
                                        f"[data].{name})")
            return None
        return self.cfg.resolve(raw)

    def _record(self, name, path):
        self.datasets[name] = {"path": str(path), "sha256": sha256_file(path)}

    def grid(self) -> PopGrid:
        if "grid" not in self._cache:
            path = self._path("grid", "population grid", True)
            text = _read_text(path, "grid")
            grid = parse_csv_grid(text) if path.suffix.lower() == ".csv" else parse_asc_grid(text)
            self._record("grid", path)
            self._cache["grid"] = grid
        return self._cache["grid"]

    def zones(self, required=False) -> ZoneLayer | None:
        if "zones" not in self._cache:
            path = self._path("zones", "zones", required)
            if path is None:
                return None
            layer = parse_geojson_layer(_read_text(path, "zones"))
            layer.require(POLYGON)
            self._record("zones", path)
            self._cache["zones"] = layer
        return self._cache["zones"]

    def coast(self) -> ZoneLayer:
        if "coast" not in self._cache:
            path = self._path("coast", "coast", True)
            layer = as_lines(parse_geojson_layer(_read_text(path, "coast")))
            self._record("coast", path)
            self._cache["coast"] = layer
        return self._cache["coast"]


def as_lines(layer: ZoneLayer) -> ZoneLayer:
    """Polygon rings become polylines so land polygons can serve as a coastline."""
    feats = []
    for f in layer:
        if f.kind == POLYLINE:
            feats.append(f)
        else:
            feats.append(Feature(f.id, f.name, POLYLINE, tuple(f.rings)))
    return ZoneLayer(tuple(feats))


# --- provenance and output -----------------------------------------------------------

class Run:
    def __init__(self, cfg: RunConfig, argv, seed=None):
        self.cfg = cfg
        self.inputs = Inputs(cfg)
        self.command = _recorded_command(argv)
        self.seed = seed
        self.out = Path(cfg.out)
        self.written: list[Path] = []

    @property
    def projection(self) -> Projection:
        p = self.cfg.section("projection")
        return Projection(p["kind"], float(p["scale"]), float(p["center_lon"]))

    @property
    def n_jobs(self) -> int:
        return int(self.cfg.section("run")["n_jobs"])

    def provenance(self, kind: str, sections=()) -> dict:
        params = {s: self.cfg.section(s) for s in ("projection", *sections)}
        return {"kind": kind, "datasets": dict(self.inputs.datasets), "params": params,
                "seed": self.seed, "engine_version": __version__, "command": self.command,
                "config": self.cfg.source}

    def write(self, name: str, text: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        path.write_text(text, encoding="utf-8")
        self.written.append(path)
        return path

    def write_map(self, kind: str, scene: Scene, sections, diagnostics=None, files=None) -> dict:
        prov = self.provenance(kind, sections)
        scene = Scene(scene.projection, scene.layers, scene.legend, prov, scene.title,
                      scene.notes, scene.legend_band)
        svg = self.write(f"{kind}.svg", emit_svg(scene))
        extra = {}
        for name, text in (files or {}).items():
            extra[name] = str(self.write(name, text).name)
        side = {"provenance": {**prov, "timestamp": _now()},
                "diagnostics": _jsonable({**scene.notes, **(diagnostics or {})}),
                "outputs": [svg.name, *extra.values()]}
        self.write(f"{kind}.json", json.dumps(side, indent=2, sort_keys=True, allow_nan=False)
                   + "\n")
        return side


def _recorded_command(argv) -> str:
    """The invocation minus the output directory, which does not affect results."""
    args = list(argv)
    out = []
    skip = False
    for a in args:
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out="):
            continue
        out.append(a)
    return shlex.join(["gridatlas", *out])


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


# --- stats ---------------------------------------------------------------------------

def cmd_stats(run: Run) -> int:
    grid = run.inputs.grid()
    st = run.cfg.section("stats")
    share = float(st["share"])
    table = frequency_table(grid)
    summ = summary(grid)
    cov = min_cells_for_share(grid, share)
    bottom = share_at_cell_pct(grid, 50.0, bottom=True)
    x, y = cumulative_share(grid)
    step = float(st["curve_step_pct"])
    xs = np.arange(0.0, 100.0 + step / 2, step)
    ys = np.interp(xs, x, y)

    lines = [table.to_text(), "",
             f"land cells        {summ.land_cells}",
             f"population total  {summ.population_total:,.0f}",
             f"mean per cell     {summ.mean:,.1f}",
             f"median per cell   {summ.median:,.1f}",
             "",
             f"{cov.cells_used} cells ({cov.cell_pct:.2f} % of land cells, "
             f"{cov.area_pct_of_land:.2f} % of land area) hold {100 * share:.0f} % "
             f"of the population",
             f"the least populated 50 % of cells hold {bottom:.2f} % of the population"]
    report = {"frequency": {"breaks": table.breaks, "counts": table.counts,
                            "pct": table.freq_pct, "total": table.total},
              "summary": vars(summ), "coverage": vars(cov), "bottom_half_share_pct": bottom}
    zones = run.inputs.zones()
    if zones is None:
        lines += ["", "note: no zones layer given, country section omitted"]
    else:
        zs = aggregate_to_zones(grid, zones)
        chosen, pct = min_zones_for_share(zs, share)
        lines += ["", f"{len(chosen)} zones hold {pct:.1f} % of the population:"]
        lines += [f"  {z.id:<8} {z.name:<30} {z.population:>16,.0f}" for z in chosen]
        lines.append(f"unassigned population {zs.unassigned_population:,.0f} "
                     f"in {zs.unassigned_cells} cells")
        report["zones"] = {"count": len(chosen), "pop_pct": pct,
                           "ids": [z.id for z in chosen],
                           "unassigned_population": zs.unassigned_population}
    run.write("stats.txt", "\n".join(lines) + "\n")
    run.write("frequency.csv", table.to_csv())
    run.write("cumulative.csv", "cell_pct,pop_pct\n"
              + "".join(f"{a:g},{b:.4f}\n" for a, b in zip(xs, ys)))
    prov = {**run.provenance("stats", ("stats",)), "timestamp": _now()}
    run.write("stats.json", json.dumps(_jsonable({"provenance": prov, **report}), indent=2,
                                       sort_keys=True) + "\n")
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


# --- maps ----------------------------------------------------------------------------

def _params(run: Run) -> PotentialParams:
    p = run.cfg.section("potential")
    return PotentialParams(p["function"], float(p["span"]), float(p["beta"]),
                           None if p["cutoff"] is None else float(p["cutoff"]))


def _zone_densities(grid: PopGrid, zones: ZoneLayer):
    zs = aggregate_to_zones(grid, zones)
    bands = band_areas_km2(grid.header)
    area_grid = np.broadcast_to(bands[:, None], grid.header.shape)
    areas = np.bincount(zs.cell_zone[zs.cell_zone >= 0],
                        weights=area_grid[zs.cell_zone >= 0], minlength=len(zones))
    pops = np.array([z.population for z in zs.zones])
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = np.where(areas > 0, pops / areas, np.nan)
    return zs, dens


def _breaks(values, spec):
    return make_breaks(np.asarray(values, dtype=float), spec["method"], int(spec["k"]),
                       spec["edges"])


def map_circles(run: Run):
    grid, zones = run.inputs.grid(), run.inputs.zones(required=True)
    zs = aggregate_to_zones(grid, zones)
    c = run.cfg.section("circles")
    vals = np.array([z.population for z in zs.zones])
    ref = c["ref_value"] or float(vals.max())
    scene = render_prop_circles(vals, [f.anchor() for f in zones], SymbolScale(ref,
                                float(c["ref_radius"])), run.projection, zones.ids,
                                basemap=zones, title="Population by zone")
    return scene, ("circles",), {"unassigned_population": zs.unassigned_population}, {}


def map_choropleth(run: Run):
    grid, zones = run.inputs.grid(), run.inputs.zones()
    spec = run.cfg.section("classify")
    if zones is not None:
        _, dens = _zone_densities(grid, zones)
        breaks = _breaks(dens[np.isfinite(dens)], spec)
        target = zones
    else:
        area = band_areas_km2(grid.header)[:, None]
        dens = grid.filled(np.nan) / area
        breaks = _breaks(dens[grid.land], spec)
        target = grid
    scene = render_choropleth(target, dens, breaks, spec["palette"], run.projection,
                              "Population density")
    return scene, ("classify",), {}, {}


def map_cartogram(run: Run):
    grid, zones = run.inputs.grid(), run.inputs.zones(required=True)
    c = run.cfg.section("cartogram")
    density = build_density(grid, int(c["pad"]), tuple(c["lattice"]) if c["lattice"] else None)
    sol = solve_cartogram(density, int(c["max_steps"]), float(c["rel_tol"]))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        warped = warp_geometry(zones, sol.field)
    zs = aggregate_to_zones(grid, zones)
    diag = cartogram_diagnostics(warped, zs, sol)
    _, dens = _zone_densities(grid, zones)
    breaks = _breaks(dens[np.isfinite(dens)], run.cfg.section("classify"))
    scene = render_choropleth(warped, dens, breaks, run.cfg.section("classify")["palette"],
                              run.projection, "Density-equalizing cartogram")
    d = {**diag.as_dict(), "time": sol.time, "mass_drift": sol.mass_drift,
         "max_displacement_deg": sol.field.max_displacement,
         "deviation_history": list(sol.deviation_history), "clamped_points": len(caught)}
    dx, dy = sol.field.to_asc()
    files = {"cartogram.geojson": layer_to_geojson(warped),
             "cartogram_dx.asc": dx, "cartogram_dy.asc": dy}
    return scene, ("cartogram", "classify"), d, files


def map_dots(run: Run):
    grid, zones = run.inputs.grid(), run.inputs.zones()
    d = run.cfg.section("dots")
    seed = run.seed if run.seed is not None else int(d["seed"])
    run.seed = seed
    scene = render_dots(grid, float(d["pop_per_dot"]), seed, run.projection, float(d["radius"]),
                        run.n_jobs, zones, "Dot density")
    return scene, ("dots",), {}, {}


def map_dorling(run: Run):
    grid, zones = run.inputs.grid(), run.inputs.zones()
    d = run.cfg.section("dorling")
    blocks = aggregate_blocks(grid, int(d["block_factor"]))
    ref = d["ref_value"] or float(np.nanmax(blocks.values))
    scene = render_dorling(blocks, SymbolScale(ref, float(d["ref_radius"])), int(d["max_iter"]),
                           run.projection, zones, "Population by block")
    return scene, ("dorling",), {}, {}


def _potential_levels(values, spec):
    if spec["levels"]:
        return [float(v) for v in spec["levels"]]
    pos = values[values > 0]
    lo, hi = np.quantile(pos, [0.5, 0.999])
    return np.geomspace(lo, hi, int(spec["n_levels"])).tolist()


def map_potential(run: Run):
    grid = run.inputs.grid()
    spec = run.cfg.section("potential")
    cs = float(spec["out_cellsize"])
    header = GridHeader(int(round(360 / cs)), int(round(180 / cs)), -180.0, -90.0, cs)
    surf = stewart_potential(grid, _params(run), header, run.n_jobs)
    levels = _potential_levels(surf.values, spec)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        iso = extract_isolines(surf.values, header, levels)
    sgrid = surf.to_grid()
    pos = surf.values[surf.values > 0]
    edges = sorted({float(pos.min()), *levels, float(pos.max())})
    breaks = breaks_manual(edges)
    base = render_choropleth(sgrid, surf.values, breaks, spec["palette"], run.projection,
                             "Population potential")
    scene = render_overlay(base, [iso])
    files = {"potential.asc": write_asc_grid(sgrid), "isolines.geojson": iso.to_geojson()}
    return scene, ("potential",), {"levels": levels, "skipped_levels": list(iso.skipped)}, files


def map_links(run: Run):
    grid, zones = run.inputs.grid(), run.inputs.zones()
    spec = run.cfg.section("links")
    nodes = aggregate_blocks(grid, int(spec["block_factor"]))
    links = build_links(nodes, float(spec["min_mass"]), float(spec["max_dist"]),
                        bool(spec["planar"]))
    base = Scene(run.projection, tuple(basemap_layer(zones, run.projection)), title="Links")
    scene = render_overlay(base, [links], {"scale_width": bool(spec["scale_width"])})
    feats = [linestring_feature([[links.lon[i], links.lat[i]], [links.lon[j], links.lat[j]]],
                                i=int(i), j=int(j), distance_km=float(d))
             for i, j, d in links.edges]
    diag = {"min_mass": float(spec["min_mass"]), "max_dist": float(spec["max_dist"]),
            "nodes": int(len(links.lon)), "links": len(links.edges),
            "planar": bool(spec["planar"])}
    return scene, ("links",), diag, {"links.geojson": feature_collection(feats)}


def map_hex(run: Run):
    grid, zones = run.inputs.grid(), run.inputs.zones()
    spec = run.cfg.section("hex")
    hexes = hex_bin(grid, float(spec["width"]))
    vmax = max((c.value for c in hexes.cells), default=0.0)
    scale = float(spec["height_px"]) / vmax if vmax > 0 else 1.0
    scene = render_hex_extrusion(hexes, scale, run.projection, spec["color"], zones,
                                 "Population per hexagon")
    return scene, ("hex",), {"total": hexes.total}, {}


def map_coastal(run: Run):
    grid, coast = run.inputs.grid(), run.inputs.coast()
    zones = run.inputs.zones()
    spec = run.cfg.section("coastal")
    mask, share = coastal_mask(grid, coast, float(spec["max_dist"]))
    base = Scene(run.projection, tuple(basemap_layer(zones, run.projection)),
                 title="Population near a coast")
    scene = render_overlay(base, [mask])
    scene = scene.with_layers(Layer("annotation", (Text(
        run.projection.frame[0] + 8, run.projection.frame[1] + 16,
        f"{100 * share:.1f} % of the population lives within {spec['max_dist']:g} km "
        f"of a coast", 11.0),), run.projection))
    files = {"coastal.asc": write_asc_grid(mask)}
    return scene, ("coastal",), {"share": share, "max_dist": float(spec["max_dist"])}, files


def map_glocal(run: Run):
    grid = run.inputs.grid()
    spec = run.cfg.section("glocal")
    ratio = local_relative_index(grid, _params(run), run.n_jobs)
    vals = ratio.values[np.isfinite(ratio.values) & (ratio.values > 0)]
    breaks = make_breaks(vals, "geometric", int(spec["k"]))
    scene = render_choropleth(ratio, ratio.filled(np.nan), breaks, spec["palette"],
                              run.projection, "Local prominence")
    diag = {"cells_above_one": int((vals > 1).sum())}
    return scene, ("potential", "glocal"), diag, {"glocal.asc": write_asc_grid(ratio)}


def map_voids(run: Run):
    grid, zones = run.inputs.grid(), run.inputs.zones()
    spec = run.cfg.section("voids")
    if spec["threshold"] is None:
        raise ParameterError("voids needs a potential threshold: --set voids.threshold=<value>")
    mask = empty_quarters(grid, _params(run), float(spec["threshold"]), run.n_jobs)
    base = Scene(run.projection, tuple(basemap_layer(zones, run.projection)),
                 title="Empty quarters")
    scene = render_overlay(base, [mask], {"inverted": True})
    diag = {"void_cells": int(np.nansum(mask.values)), "threshold": float(spec["threshold"])}
    return scene, ("potential", "voids"), diag, {"voids.asc": write_asc_grid(mask)}


def map_linemap(run: Run):
    grid = run.inputs.grid()
    spec = run.cfg.section("linemap")
    blocks = aggregate_blocks(grid, int(spec["block_factor"]))
    scene = render_linemap(blocks, float(spec["amplitude"]), run.projection, "Population lines")
    return scene, ("linemap",), {}, {}


def map_halfmap(run: Run):
    grid, zones = run.inputs.grid(), run.inputs.zones()
    share = float(run.cfg.section("stats")["share"])
    proj = run.projection
    cov = min_cells_for_share(grid, share)
    mask = top_cells_mask(grid, share)
    layers = list(basemap_layer(zones, proj))
    diag = {"coverage": vars(cov)}
    notes = [f"{100 * share:.0f} % of the population lives on {cov.area_pct_of_land:.1f} % "
             f"of the land ({cov.cells_used} cells, {cov.cell_pct:.1f} % of land cells)"]
    extras = []
    if zones is not None:
        zs = aggregate_to_zones(grid, zones)
        chosen, pct = min_zones_for_share(zs, share)
        ids = {z.id for z in chosen}
        extras.append(ZoneLayer(tuple(f for f in zones if f.id in ids)))
        notes.append(f"{len(chosen)} countries hold {pct:.1f} % of the population: "
                     + ", ".join(z.name or z.id for z in chosen))
        diag["zones"] = {"count": len(chosen), "ids": [z.id for z in chosen], "pop_pct": pct}
    base = Scene(proj, tuple(layers), title="Half of the population")
    scene = render_overlay(base, extras + [mask])
    x0, y0 = proj.frame[0] + 8, proj.frame[1] + 16
    scene = scene.with_layers(Layer("annotation", tuple(
        Text(x0, y0 + 14 * k, t, 11.0) for k, t in enumerate(notes)), proj))
    return scene, ("stats",), diag, {}


MAP_BUILDERS = {
    "circles": map_circles, "choropleth": map_choropleth, "cartogram": map_cartogram,
    "dots": map_dots, "dorling": map_dorling, "potential": map_potential, "links": map_links,
    "hex": map_hex, "coastal": map_coastal, "glocal": map_glocal, "voids": map_voids,
    "linemap": map_linemap, "halfmap": map_halfmap,
}


def cmd_map(run: Run, kind: str) -> int:
    scene, sections, diag, files = MAP_BUILDERS[kind](run)
    run.write_map(kind, scene, sections, diag, files)
    print(f"wrote {run.out / (kind + '.svg')}")
    return EXIT_OK


# --- fetch / synth / make-all ------------------------------------------------------------

def cmd_fetch(run: Run, name: str, url: str | None, sha: str | None, dest_dir: Path) -> int:
    if name == "grid":
        sys.stdout.write(GRID_INSTRUCTIONS.format(data=dest_dir))
        return EXIT_MANUAL_STEP
    spec = run.cfg.section("fetch")[name]
    url = url or spec["url"] or FETCH_URLS[name]
    sha = sha or spec["sha256"]
    try:
        with urllib.request.urlopen(url, timeout=60) as resp:
            body = resp.read()
    except urllib.error.HTTPError as exc:
        raise NetworkError(f"GET {url} failed", exc.code) from exc
    except (urllib.error.URLError, OSError) as exc:
        raise NetworkError(f"GET {url} failed: {getattr(exc, 'reason', exc)}") from exc
    dest_dir.mkdir(parents=True, exist_ok=True)
    dest = dest_dir / f"{name}.geojson"
    digest = hashlib.sha256(body).hexdigest()
    if sha and digest != sha.lower():
        bad = dest.with_name(dest.name + ".quarantine")
        bad.write_bytes(body)
        raise IntegrityError(f"checksum mismatch for {url}: got {digest}, expected {sha}; "
                             f"download kept at {bad}")
    dest.write_bytes(body)
    meta = {"url": url, "sha256": digest, "bytes": len(body), "fetched": _now()}
    dest.with_name(dest.name + ".json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"wrote {dest} ({len(body)} bytes, sha256 {digest})")
    return EXIT_OK


def load_synth_spec(path: Path) -> SynthSpec:
    text = _read_text(path, "synthetic spec")
    try:
        if path.suffix.lower() == ".toml":
            data = tomllib.loads(text)
        else:
            data = json.loads(text)
    except ValueError as exc:
        raise ValidationError(f"cannot parse {path}: {exc}", ["spec"]) from exc
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: spec must be an object", ["spec"])
    return SynthSpec.from_dict(data)


def cmd_synth(run: Run, spec_path: str, seed: int, name: str) -> int:
    spec = load_synth_spec(Path(spec_path))
    grid = synth_grid(spec, seed)
    path = run.write(name, write_asc_grid(grid))
    print(f"wrote {path} (total {grid.total:,.0f})")
    return EXIT_OK


def _kind_ready(run: Run, kind: str) -> str | None:
    cfg = run.cfg
    if kind in ("circles", "cartogram") and cfg.zones is None:
        return "needs zones"
    if kind == "coastal" and cfg.coast is None:
        return "needs coast"
    if kind == "voids" and cfg.section("voids")["threshold"] is None:
        return "needs voids.threshold"
    return None


def cmd_make_all(run: Run) -> int:
    rows = []
    status = EXIT_OK
    for kind in MAP_KINDS:
        why = _kind_ready(run, kind)
        if why:
            rows.append((kind, None, why))
            continue
        try:
            scene, sections, diag, files = MAP_BUILDERS[kind](run)
            side = run.write_map(kind, scene, sections, diag, files)
            rows.append((kind, side, ""))
        except GridAtlasError as exc:
            rows.append((kind, None, f"failed: {exc}"))
            status = max(status, exc.exit_code)
    items = []
    for kind, side, why in rows:
        if side is None:
            items.append(f"<li><b>{kind}</b>: skipped ({html.escape(why)})</li>")
            continue
        params = html.escape(json.dumps(side["provenance"]["params"], sort_keys=True))
        items.append(f'<li><a href="{kind}.svg"><b>{kind}</b></a> '
                     f'(<a href="{kind}.json">sidecar</a>)<br><code>{params}</code></li>')
    page = ("<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>gridatlas maps"
            "</title></head>\n<body><h1>gridatlas maps</h1>\n<ul>\n" + "\n".join(items)
            + "\n</ul>\n</body></html>\n")
    run.write("index.html", page)
    print(f"wrote {run.out / 'index.html'}")
    return status


# --- argument parsing -----------------------------------------------------------------

def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--grid", help="population grid (.asc, or .csv with lon,lat,value)")
    p.add_argument("--zones", help="zones layer (GeoJSON polygons)")
    p.add_argument("--coast", help="coastline layer (GeoJSON lines or polygons)")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a config value (repeatable)")
    p.add_argument("--jobs", type=int, help="worker threads")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridatlas", description=__doc__)
    parser.add_argument("--version", action="version", version=f"gridatlas {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="frequency table, summary and coverage report")
    _common(p)

    p = sub.add_parser("map", help="render one map kind to SVG + sidecar JSON")
    p.add_argument("kind", choices=MAP_KINDS)
    _common(p)
    p.add_argument("--seed", type=int, help="seed for random placement (dots)")
    p.add_argument("--planar", action="store_true", help="links: plate carrée distances")

    p = sub.add_parser("fetch", help="download a basemap layer, or explain how to get the grid")
    p.add_argument("name", choices=("countries", "coastline", "grid"))
    _common(p)
    p.add_argument("--url", help="override the download URL")
    p.add_argument("--sha256", help="expected checksum of the download")

    p = sub.add_parser("synth", help="write a synthetic grid from a JSON/TOML spec")
    p.add_argument("spec")
    _common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default="synth.asc", help="output file name")

    p = sub.add_parser("make-all", help="render every map kind and an index page")
    _common(p)
    p.add_argument("--seed", type=int)
    return parser


def _configure(args) -> RunConfig:
    cfg = load_config(args.config, args.set)
    for key in ("grid", "zones", "coast", "out"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    if args.jobs is not None:
        cfg.set(["run", "n_jobs"], args.jobs)
    if getattr(args, "planar", False):
        cfg.set(["links", "planar"], True)
    return cfg


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_PARAMETER
    try:
        cfg = _configure(args)
        run = Run(cfg, argv, getattr(args, "seed", None))
        if args.command == "stats":
            return cmd_stats(run)
        if args.command == "map":
            return cmd_map(run, args.kind)
        if args.command == "fetch":
            return cmd_fetch(run, args.name, args.url, args.sha256,
                             Path(args.out) if args.out else data_dir())
        if args.command == "synth":
            return cmd_synth(run, args.spec, args.seed, args.name)
        return cmd_make_all(run)
    except GridAtlasError as exc:
        print(f"gridatlas: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"gridatlas: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
