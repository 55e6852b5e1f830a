"""Class intervals for choropleth and graduated styling."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateClassesError, DomainError, ParameterError

METHODS = ("quantile", "equal", "geometric", "manual")


@dataclass(frozen=True)
class ClassBreaks:
    method: str
    edges: tuple

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"unknown classification method {self.method!r}")
        e = np.asarray(self.edges, dtype=float)
        if e.size < 2:
            raise DegenerateClassesError("need at least two edges")
        if np.any(np.diff(e) <= 0) or not np.all(np.isfinite(e)):
            raise DegenerateClassesError(f"edges not strictly ascending: {list(self.edges)}")
        object.__setattr__(self, "edges", tuple(float(x) for x in e))

    @property
    def k(self) -> int:
        return len(self.edges) - 1

    def labels(self, fmt="{:,.0f}") -> list[str]:
        return [f"{fmt.format(lo)} - {fmt.format(hi)}"
                for lo, hi in zip(self.edges[:-1], self.edges[1:])]


class Classified(NamedTuple):
    index: int
    out_of_range: str  # "", "low" or "high"


def breaks_quantile(values, k: int) -> ClassBreaks:
    """Edges at the 0, 1/k, ..., 1 quantiles (linear interpolation between order statistics)."""
    v = np.asarray(values, dtype=float)
    v = v[~np.isnan(v)]
    if v.size == 0:
        raise DegenerateClassesError("no values to classify")
    if k < 1:
        raise ParameterError("k must be >= 1")
    distinct = np.unique(v).size
    if distinct < 2 or k > distinct:
        raise DegenerateClassesError(f"{k} classes requested from {distinct} distinct values")
    # positions i * (n - 1) / k in integer arithmetic so whole positions hit data exactly
    srt = np.sort(v)
    edges = []
    for i in range(k + 1):
        q, r = divmod(i * (srt.size - 1), k)
        e = srt[q] if r == 0 else srt[q] + (srt[q + 1] - srt[q]) * (r / k)
        edges.append(float(e))
    return ClassBreaks("quantile", tuple(edges))


def breaks_equal(vmin: float, vmax: float, k: int) -> ClassBreaks:
    if k < 1:
        raise ParameterError("k must be >= 1")
    if not vmax > vmin:
        raise DegenerateClassesError("max must exceed min")
    return ClassBreaks("equal", tuple(np.linspace(vmin, vmax, k + 1)))


def breaks_geometric(vmin: float, vmax: float, k: int) -> ClassBreaks:
    """Edges ``vmin * (vmax/vmin) ** (i/k)``; the first and last are exact."""
    if vmin <= 0:
        raise DomainError("geometric classes need a strictly positive minimum")
    if not vmax > vmin:
        raise DegenerateClassesError("max must exceed min")
    if k < 1:
        raise ParameterError("k must be >= 1")
    ratio = vmax / vmin
    edges = [vmin * ratio ** (i / k) for i in range(k + 1)]
    edges[-1] = vmax
    return ClassBreaks("geometric", tuple(edges))


def breaks_manual(edges) -> ClassBreaks:
    return ClassBreaks("manual", tuple(edges))


def make_breaks(values, method="geometric", k=6, edges=None) -> ClassBreaks:
    """Build breaks from a config-style ``method`` + ``k`` (or explicit ``edges``).

    ``geometric`` and ``equal`` span the positive finite values.
    """
    if edges is not None:
        return breaks_manual(edges)
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if method == "quantile":
        return breaks_quantile(v[v > 0], k)
    pos = v[v > 0]
    if pos.size == 0:
        raise DegenerateClassesError("no positive values")
    if method == "geometric":
        return breaks_geometric(float(pos.min()), float(pos.max()), k)
    if method == "equal":
        return breaks_equal(float(pos.min()), float(pos.max()), k)
    raise ParameterError(f"method {method!r} needs explicit edges")


def classify(value: float, breaks: ClassBreaks) -> Classified:
    e = breaks.edges
    if value < e[0]:
        return Classified(0, "low")
    if value > e[-1]:
        return Classified(breaks.k - 1, "high")
    idx = int(np.searchsorted(e, value, side="right")) - 1
    return Classified(min(idx, breaks.k - 1), "")


def classify_array(values, breaks: ClassBreaks) -> np.ndarray:
    """Vectorized class index; out-of-range values are clipped, NaN gives -1."""
    v = np.asarray(values, dtype=float)
    idx = np.searchsorted(np.asarray(breaks.edges), v, side="right") - 1
    idx = np.clip(idx, 0, breaks.k - 1)
    return np.where(np.isnan(v), -1, idx)
