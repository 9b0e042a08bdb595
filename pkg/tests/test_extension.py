import json

import numpy as np
import pytest

from sobolev_traces.extension import (GraphDistance, JetField, NormDistance, PartitionOfUnity, bump_derivatives_1d,
                                      local_jet_constant, local_jet_terms, lipschitz_seminorm, mcshane_extend,
                                      taylor_poly, taylor_remainder_check, whitney_extend_jet)
from sobolev_traces.fields import ScalarField, WeightField
from sobolev_traces.geometry import Cube, Grid, PointSet, whitney_decompose
from sobolev_traces.metrics import GeodesicGraph, QuasiMetricSpec
from sobolev_traces.polynomials import AnalyticFunction, Polynomial


def test_mcshane_two_points():
    g = Grid.vertex_centered(-1, 2, 12, 1)
    E = PointSet([[0.0], [1.0]])
    F = mcshane_extend([0.0, 1.0], E, NormDistance(), 1.0, g)
    x = g.axis(0)
    assert np.allclose(F.values, np.minimum(np.abs(x), 1 + np.abs(x - 1)), atol=1e-15)
    assert F.at([0.0]) == 0.0 and F.at([1.0]) == 1.0


def test_mcshane_rejects_non_lipschitz_data():
    g = Grid.vertex_centered(-1, 2, 12, 1)
    with pytest.raises(ValueError):
        mcshane_extend([0.0, 1.0], PointSet([[0.0], [1.0]]), NormDistance(), 0.5, g)


def test_mcshane_on_graph_distance_is_lipschitz():
    g = Grid.vertex_centered(-1, 1, 16, 1)
    h = WeightField(g, 1 + g.axis(0) ** 2)
    G = GeodesicGraph(QuasiMetricSpec(1.0, h), 2)
    E = PointSet([[-0.5], [0.25], [0.75]])
    d = GraphDistance(G)
    f = np.array([0.0, 0.3, -0.2])
    L = max(abs(f[i] - f[j]) / d(E.points[i], E.points[j]) for i in range(3) for j in range(i))
    F = mcshane_extend(f, E, d, L, g)
    assert lipschitz_seminorm(F, G.all_pairs()) <= L * (1 + 1e-12)
    assert np.array_equal([F.at(x) for x in E.points], f)


def test_jet_field_json_and_linear_ops(tmp_path):
    E = PointSet([[0.0, 0.0], [1.0, 0.5]])
    f = AnalyticFunction("exp(x0)*x1", 2)
    J = JetField.from_function(f, E, 3)
    back = JetField.from_json(json.loads(json.dumps(J.to_json())))
    X = np.random.default_rng(1).normal(size=(5, 2))
    for P, R in zip(J.polys, back.polys):
        assert np.allclose(P(X), R(X))
    S = J + J * 2.0
    assert np.allclose(S[1](X), 3 * J[1](X))
    J.dump(tmp_path / "jet.json")
    assert (tmp_path / "jet.json").exists()


def test_taylor_poly_from_field_matches_exact():
    g = Grid.vertex_centered(-1, 1, 64, 1)
    F = ScalarField(g, g.axis(0) ** 2)
    T = taylor_poly(F, [0.25], 2)
    assert T.coeffs[(0,)] == pytest.approx(0.0625)
    assert T.coeffs[(1,)] == pytest.approx(0.5)
    assert T.coeffs[(2,)] == pytest.approx(1.0)


def test_bump_derivatives_match_finite_differences():
    t = np.linspace(-0.9, 0.9, 7)
    b = bump_derivatives_1d(t, 2)
    h = 1e-5
    fd = (bump_derivatives_1d(t + h, 0)[0] - bump_derivatives_1d(t - h, 0)[0]) / (2 * h)
    assert np.allclose(b[1], fd, rtol=1e-6, atol=1e-9)
    assert np.all(bump_derivatives_1d(np.array([1.0, -1.5]), 2)[2] == 0)


def _decomp_2d():
    E = PointSet([[-0.5, 0.25], [0.5, 0.0], [0.0, -0.5]])
    return E, whitney_decompose(E, Cube((0.0, 0.0), 1.0), 8)


def test_partition_of_unity_support_and_sum():
    E, W = _decomp_2d()
    P = PartitionOfUnity(W)
    g = Grid.vertex_centered(-1, 1, 40, 2)
    X = g.nodes()
    phis, index, covered = P.evaluate(X, 0)
    for Q, ix in zip(W.cubes, index):
        # support of phi_Q lies in the open cube Q*
        assert np.all(np.max(np.abs(X[ix] - np.asarray(Q.center)), axis=1) < Q.star.half_side)
    tot, cov = P.sum(X)
    assert np.allclose(tot[cov], 1.0, atol=1e-12)


def test_whitney_extension_linear_in_jet():
    E, W = _decomp_2d()
    P = PartitionOfUnity(W)
    g = Grid.vertex_centered(-1, 1, 24, 2)
    J1 = JetField.from_function(AnalyticFunction("sin(x0 + x1)", 2), E, 2)
    J2 = JetField.from_function(AnalyticFunction("x0**3", 2), E, 2)
    a = whitney_extend_jet(J1, W, P, g, order=1)
    b = whitney_extend_jet(J2, W, P, g, order=1)
    c = whitney_extend_jet(J1 + J2 * 2.0, W, P, g, order=1)
    for beta in c.derivatives:
        assert np.allclose(c.derivatives[beta], a.derivatives[beta] + 2 * b.derivatives[beta], atol=1e-12)


def test_whitney_extension_reproduces_polynomial_and_values_on_E():
    E, W = _decomp_2d()
    P = Polynomial(2, 1, {(0, 0): 0.5, (1, 0): -1.0, (0, 1): 2.0})
    J = JetField.from_function(P, E, 2)
    g = Grid.vertex_centered(-1, 1, 40, 2)
    ext = whitney_extend_jet(J, W, None, g, order=1)
    mask = ext.covered | ext.on_E
    X = g.nodes()
    assert np.max(np.abs(ext.values[mask] - P(X[mask]))) < 1e-12
    assert np.max(np.abs(ext.derivatives[(1, 0)][mask] + 1.0)) < 1e-12
    assert np.all(ext.on_E.sum() == len(E))


def test_local_jet_bound_holds():
    E, W = _decomp_2d()
    P = PartitionOfUnity(W)
    J = JetField.from_function(AnalyticFunction("exp(x0)*cos(2*x1)", 2), E, 2)
    g = Grid.vertex_centered(-1, 1, 48, 2)
    consts = P.derivative_constants(g.nodes(), 1)
    for K in W.cubes[::25]:
        Y = np.asarray(K.center) + np.array([[0.0, 0.0], [0.5, -0.5], [-1.0, 1.0]]) * K.half_side
        for alpha in ((0, 0), (1, 0)):
            lhs, total = local_jet_terms(J, W, P, K, Y, alpha)
            C = local_jet_constant(alpha, 2, {k: max(v, 1.0) for k, v in consts.items()})
            assert np.all(lhs <= C * total + 1e-12)


def test_taylor_remainder_against_norm():
    f = AnalyticFunction("sin(x0)", 1)
    d = NormDistance()
    # |sin(x) - T^1_0(x)| / (|x| * |x|) = |sin x - x| / x**2 <= |x| / 6
    r = taylor_remainder_check(f, d, 1, (0,), [0.3], [0.0])
    assert r == pytest.approx(abs(np.sin(0.3) - 0.3) / 0.09)
    assert r <= 0.3 / 6
