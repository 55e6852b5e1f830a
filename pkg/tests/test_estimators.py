import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from gridatlas.analysis import (
    PotentialParams,
    aggregate_blocks,
    hex_bin,
    local_relative_index,
    stewart_potential,
)
from gridatlas.cartogram import build_density, solve_cartogram
from gridatlas.classify import classify_array, make_breaks
from gridatlas.errors import ParameterError
from gridatlas.estimators import (
    BlockAggregator,
    ClassBreaksEstimator,
    DensityCartogram,
    GlocalIndex,
    HexBinner,
    StewartSmoother,
)
from gridatlas.grid import GridHeader, PopGrid
from gridatlas.vector import ZoneLayer

from conftest import box_zone, random_grid


def test_params_and_clone():
    est = StewartSmoother(span=300, beta=3)
    assert est.get_params()["span"] == 300
    c = clone(est.set_params(function="pareto"))
    assert c.get_params() == est.get_params()
    assert not hasattr(c, "grid_")
    with pytest.raises(NotFittedError):
        c.transform(np.ones((2, 4)))


def test_smoother_matches_functional(rng):
    g = random_grid(rng, 18, 36)
    est = StewartSmoother(span=800).fit(g)
    want = stewart_potential(g, PotentialParams(span=800)).values
    assert np.array_equal(est.transform(g), want)
    h = GridHeader(4, 2, -180, -90, 90)
    assert np.array_equal(est.transform(h),
                          stewart_potential(g, PotentialParams(span=800), h).values)
    pts = np.column_stack([h.lons().repeat(1)[:4], np.full(4, h.lats()[0])])
    np.testing.assert_allclose(est.transform(pts), est.transform(h)[0], rtol=1e-12)
    with pytest.raises(ParameterError):
        est.transform(np.array([[200.0, 0.0]]))


def test_bare_array_input(rng):
    arr = rng.uniform(0, 10, (18, 36))
    est = StewartSmoother(span=900).fit(arr)
    assert est.grid_.header == GridHeader(36, 18, -180, -90, 10)
    with pytest.raises(ParameterError):
        StewartSmoother().fit(-arr)


def test_glocal_blocks_hex(rng):
    g = random_grid(rng, 18, 36)
    p = PotentialParams(span=1000)
    got = GlocalIndex(span=1000).fit_transform(g)
    assert np.array_equal(got.values, local_relative_index(g, p).values, equal_nan=True)
    assert BlockAggregator(3).fit_transform(g) == aggregate_blocks(g, 3)
    with pytest.raises(ParameterError):
        BlockAggregator(0).fit(g)
    h = HexBinner(20.0).fit_transform(g)
    assert h.cells == hex_bin(g, 20.0).cells


def test_class_breaks_estimator(rng):
    vals = rng.uniform(1, 1000, 200)
    est = ClassBreaksEstimator("quantile", 4).fit(vals)
    b = make_breaks(vals, "quantile", 4)
    assert est.edges_.tolist() == list(b.edges)
    assert np.array_equal(est.predict(vals), classify_array(vals, b))


def test_pipeline_and_cartogram():
    vals = np.ones((16, 32))
    vals[:, :16] = 5.0
    g = PopGrid.from_array(vals)
    pipe = make_pipeline(BlockAggregator(2), HexBinner(60.0))
    assert pipe.fit_transform(g).total == g.total
    est = DensityCartogram(lattice=(32, 16), pad=4, rel_tol=0.02).fit(g)
    sol = solve_cartogram(build_density(g, 4, (32, 16)), rel_tol=0.02)
    assert np.array_equal(est.field_.dx, sol.field.dx)
    assert est.converged_
    z = ZoneLayer((box_zone("W", -170, -80, -10, 80),))
    warped = est.transform(z)
    assert warped.features[0].area() > z.features[0].area()
