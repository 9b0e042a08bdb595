import numpy as np
import pytest

from sobolev_traces.fields import CubeIntegrator, ScalarField, WeightField, dyadic_radii
from sobolev_traces.geometry import Cube, Grid


def brute_integral(grid, values, lower, upper, pad=40):
    """Sum of cell-overlap volumes times values, on an edge-padded copy of the field."""
    v = np.pad(values, pad, mode="edge")
    s = grid.spacing
    total = 0.0
    overlaps = []
    for ax in range(grid.dim):
        centers = grid.origin[ax] + s * (np.arange(v.shape[ax]) - pad)
        lo = np.maximum(centers - s / 2, lower[ax])
        hi = np.minimum(centers + s / 2, upper[ax])
        overlaps.append(np.clip(hi - lo, 0, None))
    w = overlaps[0]
    for o in overlaps[1:]:
        w = np.multiply.outer(w, o)
    total = float(np.sum(w * v))
    return total


def test_cube_integrals_against_brute_force():
    g = Grid.vertex_centered(-1, 1, 10, 2)
    rng = np.random.default_rng(7)
    vals = rng.uniform(0, 2, size=g.shape)
    integ = CubeIntegrator(g, vals)
    for _ in range(20):
        c = rng.uniform(-1.5, 1.5, size=2)
        r = rng.uniform(0.01, 1.2)
        Q = Cube(tuple(c), r)
        exact = brute_integral(g, vals, Q.lower, Q.upper)
        assert integ.integral(Q) == pytest.approx(exact, rel=1e-10, abs=1e-12)
        assert integ.average(Q) == pytest.approx(exact / Q.volume, rel=1e-10, abs=1e-12)


def test_node_averages_match_single_average():
    g = Grid.vertex_centered(0, 1, 8, 1)
    vals = np.arange(9.0) ** 2
    integ = CubeIntegrator(g, vals)
    av = integ.node_averages(2)
    for i, x in enumerate(g.axis(0)):
        assert av[i] == pytest.approx(integ.average(Cube((x,), 2 * g.spacing)), rel=1e-12)


def test_field_io_roundtrip(tmp_path):
    g = Grid.vertex_centered(-1, 1, 4, 2)
    F = ScalarField.from_function(g, lambda X: X[:, 0] - 2 * X[:, 1])
    F.to_csv(tmp_path / "f.csv")
    assert np.array_equal(ScalarField.from_csv(tmp_path / "f.csv", g).values, F.values)
    F.save_binary(tmp_path / "f.bin")
    back = ScalarField.load_binary(tmp_path / "f.bin")
    assert np.array_equal(back.values, F.values) and back.grid == g


def test_lp_norm_and_at():
    g = Grid.vertex_centered(0, 1, 4, 1)
    F = ScalarField(g, np.full(5, 2.0))
    # the grid box is [-1/8, 9/8]
    assert F.lp_norm(2.0) == pytest.approx(2.0 * 1.25**0.5)
    assert F.at([0.5]) == 2.0


def test_weight_field_invariants():
    g = Grid.vertex_centered(0, 1, 4, 1)
    with pytest.raises(ValueError):
        WeightField(g, [1, 1, -0.5, 1, 1])
    with pytest.raises(ValueError):
        WeightField(g, np.zeros(5))
    w = WeightField(g, [1, 4, 9, 16, 25])
    assert np.allclose(w.power(0.5).values, [1, 2, 3, 4, 5])


def test_dyadic_radii_cover_box():
    g = Grid.vertex_centered(-1, 1, 16, 1)
    r = dyadic_radii(g)
    assert r[0] == g.spacing / 2 and r[1] == g.spacing
    assert np.all(np.diff(r) > 0)
    assert r[-1] >= (g.upper[0] - g.lower[0])
