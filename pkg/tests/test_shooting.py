import math

import numpy as np
import pytest

from toric_sasaki.ma_solver import solve_step
from toric_sasaki.shooting import IntervalPotential, compare_with_grid, shoot
from test_ma_solver import geo_s3


def test_interval_potential_matches_dual_solver(w32):
    K = w32.potential()
    P = IntervalPotential(K)
    for x in np.linspace(-12, 12, 49):
        u, up, upp = P.values(float(x))
        assert u == pytest.approx(K.eval_u0([x]), abs=1e-11)
        assert up == pytest.approx(K.grad_u0([x])[0], abs=1e-12)
        assert upp == pytest.approx(K.hess_u0([x])[0, 0], rel=1e-9, abs=1e-300)


def test_neumann_ends(w32):
    L = w32.grid().L
    res = shoot(w32.potential(), L, 0.3)
    assert abs(res.end_slope) < 1e-9
    assert abs(res.solution(-L)[1]) < 1e-14


def test_t0_compatibility(w32):
    # the constant c makes the Neumann problem solvable; it vanishes with the mass normalization
    res = shoot(w32.potential(), w32.grid().L, 0.0)
    assert abs(res.compat_constant) < 1e-9
    assert abs(res.end_slope) < 1e-8


@pytest.mark.parametrize("a", ["4/3", "5/4", "7/4"])
def test_grid_agreement_other_weights(a):
    g = geo_s3(a)
    G = g.grid()
    phi = None
    for t in (0.0, 0.2):
        s = solve_step(G, t, phi)
        phi = s.phi
        diff, _ = compare_with_grid(G, s)
        assert diff < 1e-6, (a, t, diff)


def test_rejects_2d(geometries):
    with pytest.raises(ValueError):
        IntervalPotential(geometries["round-S5"].potential())
