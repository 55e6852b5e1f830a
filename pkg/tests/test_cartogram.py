import math

import numpy as np
import pytest

from gridatlas.cartogram import (
    ClampWarning,
    DeformationField,
    build_density,
    cartogram_diagnostics,
    solve_cartogram,
    warp_geometry,
)
from gridatlas.errors import JoinError, ParameterError
from gridatlas.grid import PopGrid, read_asc
from gridatlas.stats import ZoneStats, ZoneTotal
from gridatlas.vector import ZoneLayer

from conftest import box_zone


def test_uniform_grid_constant_density():
    g = PopGrid.from_array(np.full((18, 36), 7.0))
    d = build_density(g, pad=4, lattice=(36, 18))
    assert np.allclose(d.rho, d.rho[0, 0], rtol=1e-12)


def test_density_bookkeeping(rng):
    vals = rng.uniform(0, 100, (18, 36))
    vals[rng.random(vals.shape) < 0.3] = np.nan
    g = PopGrid.from_array(vals)
    d = build_density(g, pad=8, lattice=(48, 24), min_density_frac=0.0)
    inner = d.rho[8:-8, 8:-8]
    # lattice carries the land population plus ocean filled at the mean land density
    land_area = d.land_area
    total = inner.sum() * d.node_area
    ocean = inner.size * d.node_area - land_area
    assert total == pytest.approx(d.population + d.rho_sea * ocean, rel=1e-12)
    assert d.population == pytest.approx(g.total, rel=1e-12)
    assert d.rho_sea == pytest.approx(g.total / land_area, rel=1e-12)
    blended = build_density(g, pad=8, lattice=(48, 24), min_density_frac=1e-3)
    assert blended.rho.sum() == pytest.approx(d.rho.sum(), rel=1e-12)
    assert blended.rho.min() > 0


def test_density_rejects_empty():
    with pytest.raises(ParameterError):
        build_density(PopGrid.from_array(np.zeros((2, 4))))


def test_constant_density_stays_put():
    g = PopGrid.from_array(np.ones((16, 32)))
    sol = solve_cartogram(build_density(g, pad=4, lattice=(32, 16)))
    assert sol.converged and sol.iterations == 0
    assert sol.field.max_displacement < 1e-9


def test_point_symmetric_density_gives_symmetric_field():
    vals = np.ones((16, 32))
    vals[4:7, 5:9] = 40.0
    vals[16 - 7:16 - 4, 32 - 9:32 - 5] = 40.0  # 180 degree rotated copy
    g = PopGrid.from_array(vals)
    sol = solve_cartogram(build_density(g, pad=4, lattice=(32, 16)), rel_tol=0.05)
    dx, dy = sol.field.dx, sol.field.dy
    assert sol.field.max_displacement > 0.5
    assert np.allclose(dx, -dx[::-1, ::-1], atol=1e-6)
    assert np.allclose(dy, -dy[::-1, ::-1], atol=1e-6)


def test_mass_conserved_and_expansion(rng):
    vals = np.ones((16, 32))
    vals[:, :16] = 9.0
    g = PopGrid.from_array(vals)
    sol = solve_cartogram(build_density(g, pad=4, lattice=(32, 16)), rel_tol=0.02)
    assert max(sol.mass_drift) <= 1e-6
    # dense west half pushes the middle meridian east
    mid = sol.field.dx[sol.field.dx.shape[0] // 2, sol.field.dx.shape[1] // 2]
    assert mid > 0


def _field(dx, dy, shape=(11, 21)):
    return DeformationField(-10.0, -5.0, 1.0, np.full(shape, dx), np.full(shape, dy))


def test_identity_and_translation_warps():
    z = ZoneLayer((box_zone("A", -3, -2, 4, 3),))
    same = warp_geometry(z, _field(0.0, 0.0))
    ring = same.features[0].rings[0]
    assert same.features[0].area() == pytest.approx(z.features[0].area())
    for p in z.features[0].rings[0]:
        assert any(np.allclose(p, q) for q in ring)
    moved = warp_geometry(z, _field(1.5, -0.5))
    np.testing.assert_allclose(moved.features[0].rings[0], ring + [1.5, -0.5])


def test_rings_stay_closed_and_clamp_warns():
    z = ZoneLayer((box_zone("A", -3, -2, 4, 3),))
    rng = np.random.default_rng(1)
    f = DeformationField(-10.0, -5.0, 1.0, rng.normal(0, 0.1, (11, 21)),
                         rng.normal(0, 0.1, (11, 21)))
    ring = warp_geometry(z, f).features[0].rings[0]
    assert np.array_equal(ring[0], ring[-1])
    with pytest.warns(ClampWarning):
        warp_geometry(ZoneLayer((box_zone("B", -30, -2, 4, 3),)), f)


def _stats(pops):
    zones = tuple(ZoneTotal(i, i, float(p), 1) for i, p in pops.items())
    return ZoneStats(zones, 0.0, 0, float(sum(pops.values())))


def test_diagnostics_perfect_and_join_error():
    z = ZoneLayer((box_zone("A", 0, 0, 1, 1), box_zone("B", 1, 0, 4, 1)))
    d = cartogram_diagnostics(z, _stats({"A": 25, "B": 75}))
    assert d.max_rel_error == pytest.approx(0.0, abs=1e-12)
    assert d.as_dict()["zones"][1]["target_share"] == 0.75
    d = cartogram_diagnostics(z, _stats({"A": 50, "B": 50}))
    assert d.max_rel_error == pytest.approx(0.5)
    with pytest.raises(JoinError):
        cartogram_diagnostics(z, _stats({"A": 1, "C": 1}))


def test_deformation_asc_round_trip():
    f = _field(0.25, -1.0)
    dx, dy = f.to_asc()
    h, vx = read_asc(dx)
    assert h.shape == (11, 21) and (h.xll, h.yll) == (-10.5, -5.5)
    assert np.all(vx == 0.25)
    assert math.isclose(read_asc(dy)[1][0, 0], -1.0)
