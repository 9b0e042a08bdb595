import math

import numpy as np
import pytest

from sobolev_traces.corpus import a1_weights, non_a1_weights
from sobolev_traces.fields import ScalarField
from sobolev_traces.geometry import Cube, Grid
from sobolev_traces.maximal import (NodeCubeFamily, a1_norm, coifman_rochberg, cube_average, cube_essinf,
                                    hl_maximal, monotone_cube_bound_check)


def _grid1(cells=8):
    return Grid.vertex_centered(-1, 1, cells, 1)


def test_cube_average_of_constant_is_exact():
    g = Grid.vertex_centered(-1, 1, 8, 2)
    F = ScalarField(g, np.full(g.shape, 3.0))
    for Q in (Cube((0.1, -0.3), 0.2), Cube((0.9, 0.9), 0.7), Cube((0.0, 0.0), 5.0)):
        assert cube_average(F, Q) == pytest.approx(3.0, rel=1e-14)


def test_cube_average_and_essinf_cell_aligned():
    g = _grid1()  # spacing 0.25, cells [x - 0.125, x + 0.125]
    F = ScalarField(g, g.axis(0))
    Q = Cube((0.125,), 0.25)  # the cells of the nodes 0 and 0.25
    assert cube_average(F, Q) == pytest.approx(0.125, abs=1e-15)
    assert cube_essinf(F, Q) == 0.0


def test_cube_average_misses_box():
    F = ScalarField(_grid1(), np.ones(9))
    with pytest.raises(ValueError):
        cube_average(F, Cube((5.0,), 0.5))


def test_hl_maximal_dominates_and_fixes_constants():
    g = _grid1(64)
    rng = np.random.default_rng(0)
    vals = rng.normal(size=g.shape)
    M = hl_maximal(ScalarField(g, vals))
    assert np.all(M.values >= np.abs(vals) - 1e-12)
    C = hl_maximal(ScalarField(g, np.full(g.shape, 2.5)))
    assert np.allclose(C.values, 2.5, rtol=1e-13)


def test_a1_of_constant_is_one():
    g = Grid.vertex_centered(-1, 1, 16, 2)
    w = ScalarField(g, np.ones(g.shape))
    assert a1_norm(w).norm_estimate == pytest.approx(1.0, abs=1e-12)
    assert a1_norm(w, family="node").norm_estimate == pytest.approx(1.0, abs=1e-12)


def test_a1_power_weight_against_closed_form():
    # |x - c|**(-1/2) in one variable: sup over intervals of avg/inf is 1 + sqrt(2)
    exact = 1 + math.sqrt(2)
    est = [a1_norm(a1_weights(1)["power"](_grid1(c))).norm_estimate for c in (256, 1024)]
    assert est[0] < est[1] <= exact
    assert exact - est[1] < 0.06


def test_a1_diverges_for_wall_weight():
    est = [a1_norm(non_a1_weights(1, 1.0)["wall"](_grid1(c))).norm_estimate for c in (64, 128)]
    assert est[1] > 4 * est[0]


def test_a1_infinite_when_weight_vanishes_on_a_cell():
    g = _grid1(16)
    vals = np.ones(g.shape)
    vals[5] = 0.0
    rep = a1_norm(ScalarField(g, vals))
    assert not rep.finite and math.isinf(rep.norm_estimate)


def test_node_family_tail_matches_large_cube_average():
    g = _grid1(16)
    vals = 1 + g.axis(0) ** 2
    fam = NodeCubeFamily(ScalarField(g, vals))
    # the tail polynomial gives the exact average of large cubes
    a = fam.tail_polynomial()
    r = 7.3
    for c in (0, 8, 16):
        poly = sum(a[c, j] * r**j for j in range(a.shape[1])) / (2 * r)
        Q = Cube(tuple(g.nodes()[c]), r)
        assert poly == pytest.approx(cube_average(ScalarField(g, vals), Q), rel=1e-12)


def test_monotone_cube_bound():
    g = _grid1(64)
    w = a1_weights(1)["gaussian"](g)
    lam = a1_norm(w).norm_estimate
    K = Cube((0.0,), 0.5)
    for Q in (Cube((0.0,), 0.05), Cube((0.3,), 0.1), Cube((-0.25,), 0.25)):
        assert monotone_cube_bound_check(w, Q, K, lam)
    with pytest.raises(ValueError):
        monotone_cube_bound_check(w, Cube((2.0,), 0.1), K, lam)


def test_coifman_rochberg_weight_is_a1():
    g = _grid1(128)
    mass = np.zeros(g.shape)
    mass[40] = 1.0
    w = coifman_rochberg(ScalarField(g, mass), 0.5)
    rep = a1_norm(w)
    assert rep.finite and rep.norm_estimate < 4
    with pytest.raises(ValueError):
        coifman_rochberg(ScalarField(g, mass), 1.0)
