"""Run configuration: TOML file with per-kind sections, overridable from the command line."""
from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ParameterError, ValidationError

DATA_ENV = "GRIDATLAS_DATA"

DEFAULTS: dict = {
    "projection": {"kind": "equirectangular", "scale": 2.0, "center_lon": 0.0},
    "potential": {
        "function": "exponential",
        "span": 200.0,          # km
        "beta": 2.0,
        "cutoff": None,         # None -> 3 * span
        "out_cellsize": 1.0,    # degrees of the evaluation lattice
        "levels": None,         # None -> geometric levels between the 50th and 99.9th percentile
        "n_levels": 6,
        "palette": "blues",
    },
    "glocal": {"palette": "purples", "k": 6},
    "voids": {"threshold": None},  # required for the voids map
    "cartogram": {"lattice": [512, 256], "pad": 32, "rel_tol": 0.01, "max_steps": 2000},
    "dots": {"pop_per_dot": 500_000.0, "seed": 1, "radius": 0.35},
    "dorling": {"block_factor": 10, "ref_value": None, "ref_radius": 12.0, "max_iter": 200},
    "circles": {"ref_value": None, "ref_radius": 40.0},
    "links": {"min_mass": 3e6, "max_dist": 500.0, "planar": False, "block_factor": 2,
              "scale_width": False},
    "hex": {"width": 2.0, "height_px": 60.0, "color": "#4a6fa5"},
    "classify": {"method": "geometric", "k": 6, "edges": None, "palette": "oranges"},
    "coastal": {"max_dist": 100.0},
    "linemap": {"block_factor": 2, "amplitude": 40.0},
    "stats": {"share": 0.5, "top_zones": 6, "curve_step_pct": 0.5},
    "fetch": {"countries": {"url": None, "sha256": None},
              "coastline": {"url": None, "sha256": None}},
    "run": {"n_jobs": 1},
}


def deep_merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_override(text: str) -> tuple[list[str], object]:
    """``section.key=value`` with the value read as a TOML scalar (bare words are strings)."""
    if "=" not in text:
        raise ParameterError(f"override {text!r} must look like section.key=value")
    key, raw = text.split("=", 1)
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key.strip().split("."), value


def data_dir() -> Path:
    return Path(os.environ.get(DATA_ENV) or "data")


@dataclass
class RunConfig:
    grid: str | None = None
    zones: str | None = None
    coast: str | None = None
    out: str = "out"
    params: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))
    source: str | None = None

    def section(self, name: str) -> dict:
        return self.params[name]

    def resolve(self, path: str | None) -> Path | None:
        """Relative paths that do not exist are looked up in the data directory."""
        if path is None:
            return None
        p = Path(path)
        if not p.is_absolute() and not p.exists() and (data_dir() / p).exists():
            return data_dir() / p
        return p

    def to_dict(self) -> dict:
        return {"grid": self.grid, "zones": self.zones, "coast": self.coast, "out": self.out,
                "params": copy.deepcopy(self.params)}

    def set(self, keys: list[str], value) -> None:
        if len(keys) == 1 and keys[0] in ("grid", "zones", "coast", "out"):
            setattr(self, keys[0], value)
            return
        node = self.params
        for k in keys[:-1]:
            if k not in node or not isinstance(node[k], dict):
                raise ParameterError(f"unknown config section {'.'.join(keys[:-1])!r}")
            node = node[k]
        if keys[-1] not in node:
            raise ParameterError(f"unknown config key {'.'.join(keys)!r}")
        node[keys[-1]] = value


def load_config(path: str | os.PathLike | None = None, overrides=()) -> RunConfig:
    """Read a TOML config (``[data]`` plus per-kind sections) and apply ``section.key=value`` overrides."""
    raw: dict = {}
    if path is not None:
        try:
            raw = tomllib.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc.strerror}", ["config"]) from exc
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"invalid config {path}: {exc}", ["config"]) from exc
    data = raw.pop("data", {})
    unknown = [k for k in raw if k not in DEFAULTS]
    if unknown:
        raise ValidationError(f"unknown config sections: {', '.join(unknown)}", unknown)
    bad = [f"{s}.{k}" for s, sec in raw.items() if isinstance(sec, dict)
           for k in sec if k not in DEFAULTS[s]]
    if bad:
        raise ValidationError(f"unknown config keys: {', '.join(bad)}", bad)
    if path is not None:
        # relative input paths are taken from the config file's directory when present there
        base = Path(path).parent
        for key in ("grid", "zones", "coast"):
            val = data.get(key)
            if val and not Path(val).is_absolute() and (base / val).exists():
                data[key] = str(base / val)
    cfg = RunConfig(data.get("grid"), data.get("zones"), data.get("coast"),
                    data.get("out", "out"), deep_merge(DEFAULTS, raw),
                    str(path) if path is not None else None)
    for item in overrides:
        cfg.set(*parse_override(item))
    return cfg
