"""scikit-learn compatible wrappers around the grid transformations.

These let the smoothing, aggregation, classification and cartogram steps sit
in a ``Pipeline`` or be tuned with ``get_params``/``set_params``. The input
``X`` is a ``PopGrid`` or a north-first 2-D array covering the whole globe.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .analysis import (
    PotentialParams,
    aggregate_blocks,
    hex_bin,
    kernel_sums,
    local_relative_index,
    stewart_potential,
)
from .cartogram import build_density, solve_cartogram, warp_geometry
from .classify import classify_array, make_breaks
from .errors import ParameterError
from .grid import GridHeader, PopGrid
from .vector import ZoneLayer


def check_popgrid(X) -> PopGrid:
    """Coerce ``X`` to a ``PopGrid``; bare arrays are taken as global north-first rasters."""
    if isinstance(X, PopGrid):
        return X
    arr = check_array(X, ensure_all_finite="allow-nan", dtype=float)
    if np.any(arr[~np.isnan(arr)] < 0):
        raise ParameterError("population values must be >= 0")
    return PopGrid.from_array(arr)


def check_lonlat(X) -> np.ndarray:
    arr = check_array(X, dtype=float)
    if arr.shape[1] != 2:
        raise ParameterError("expected an (n, 2) array of lon, lat")
    if np.any(np.abs(arr[:, 0]) > 180) or np.any(np.abs(arr[:, 1]) > 90):
        raise ParameterError("coordinates out of range")
    return arr


class StewartSmoother(TransformerMixin, BaseEstimator):
    """Potential smoothing. ``fit`` stores the source masses; ``transform``
    evaluates the potential on a grid header, a grid, or (n, 2) lon/lat points."""

    def __init__(self, function="exponential", span=200.0, beta=2.0, cutoff=None, n_jobs=1):
        self.function = function
        self.span = span
        self.beta = beta
        self.cutoff = cutoff
        self.n_jobs = n_jobs

    def _params(self):
        return PotentialParams(self.function, self.span, self.beta, self.cutoff)

    def fit(self, X, y=None):
        self.grid_ = check_popgrid(X)
        self.params_ = self._params()
        if not self.grid_.total > 0:
            raise ParameterError("grid population total must be > 0")
        return self

    def transform(self, X):
        check_is_fitted(self, "grid_")
        if isinstance(X, PopGrid):
            X = X.header
        if isinstance(X, GridHeader):
            return stewart_potential(self.grid_, self.params_, X, self.n_jobs).values
        pts = check_lonlat(X)
        _, _, lon, lat, vals = self.grid_.land_cells()
        (v,) = kernel_sums(lon, lat, [vals], pts[:, 0], pts[:, 1], self.params_, self.n_jobs)
        return v


class GlocalIndex(TransformerMixin, BaseEstimator):
    """Cell value relative to its distance-weighted neighbourhood mean."""

    def __init__(self, function="exponential", span=200.0, beta=2.0, cutoff=None, n_jobs=1):
        self.function = function
        self.span = span
        self.beta = beta
        self.cutoff = cutoff
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        check_popgrid(X)
        self.params_ = PotentialParams(self.function, self.span, self.beta, self.cutoff)
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        return local_relative_index(check_popgrid(X), self.params_, self.n_jobs)


class BlockAggregator(TransformerMixin, BaseEstimator):
    def __init__(self, factor=2):
        self.factor = factor

    def fit(self, X, y=None):
        check_popgrid(X)
        if int(self.factor) != self.factor or self.factor < 1:
            raise ParameterError("factor must be an integer >= 1")
        return self

    def transform(self, X):
        return aggregate_blocks(check_popgrid(X), int(self.factor))


class HexBinner(TransformerMixin, BaseEstimator):
    def __init__(self, hex_width=2.0, origin=(0.0, 0.0)):
        self.hex_width = hex_width
        self.origin = origin

    def fit(self, X, y=None):
        check_popgrid(X)
        return self

    def transform(self, X):
        return hex_bin(check_popgrid(X), self.hex_width, self.origin)


class ClassBreaksEstimator(BaseEstimator):
    """Learn class edges from values; ``predict`` returns class indices (NaN -> -1)."""

    def __init__(self, method="geometric", k=6, edges=None):
        self.method = method
        self.k = k
        self.edges = edges

    def fit(self, X, y=None):
        values = np.asarray(X.values if isinstance(X, PopGrid) else X, dtype=float).ravel()
        self.breaks_ = make_breaks(values, self.method, self.k, self.edges)
        self.edges_ = np.asarray(self.breaks_.edges)
        return self

    def predict(self, X):
        check_is_fitted(self, "breaks_")
        return classify_array(np.asarray(X, dtype=float), self.breaks_)


class DensityCartogram(BaseEstimator):
    """Fit a deformation field to a population grid, then warp zone layers with it."""

    def __init__(self, lattice=(512, 256), pad=32, rel_tol=0.01, max_steps=2000):
        self.lattice = lattice
        self.pad = pad
        self.rel_tol = rel_tol
        self.max_steps = max_steps

    def fit(self, X, y=None):
        grid = check_popgrid(X)
        self.density_ = build_density(grid, self.pad, self.lattice)
        self.solution_ = solve_cartogram(self.density_, self.max_steps, self.rel_tol)
        self.field_ = self.solution_.field
        self.converged_ = self.solution_.converged
        return self

    def transform(self, zones: ZoneLayer) -> ZoneLayer:
        check_is_fitted(self, "field_")
        return warp_geometry(zones, self.field_)
