import csv

import numpy as np
import pytest

from sobolev_traces.corpus import a1_weights
from sobolev_traces.fields import ScalarField, WeightField
from sobolev_traces.geometry import Grid
from sobolev_traces.metrics import (GeodesicGraph, PhiEvaluator, QuasiMetricSpec, chain_inequality_check, delta_q,
                                    delta_q_sym, exponent_comparison, geodesic_dq, least_concave_majorant,
                                    metric_profile, phi_q, pseudoconvexity_check, write_distance_table)


def _const_spec(n=2, cells=8, c=1.5, q=None):
    g = Grid.vertex_centered(-1, 1, cells, n)
    return QuasiMetricSpec(q or float(n), WeightField(g, np.full(g.shape, c)))


def test_delta_of_constant_weight():
    spec = _const_spec()
    assert delta_q(spec, [0.0, 0.0], [0.5, -0.25]) == pytest.approx(0.75, rel=1e-14)
    assert delta_q(spec, [0.0, 0.0], [0.0, 0.0]) == 0.0


def test_delta_reports_truncation():
    spec = _const_spec()
    _, trunc = delta_q(spec, [1.0, 1.0], [0.0, 1.0], return_truncated=True)
    assert trunc
    _, trunc = delta_q(spec, [0.0, 0.0], [0.25, 0.0], return_truncated=True)
    assert not trunc


def test_spec_requires_q_at_least_n():
    g = Grid.vertex_centered(-1, 1, 4, 2)
    with pytest.raises(ValueError):
        QuasiMetricSpec(1.5, WeightField(g, np.ones(g.shape)))


def test_geodesic_of_constant_weight_is_scaled_uniform_norm():
    spec = _const_spec(c=2.0)
    assert geodesic_dq(spec, [-1.0, -1.0], [1.0, 0.5]) == pytest.approx(4.0, rel=1e-12)
    G = GeodesicGraph(spec, hop_radius=1)
    assert G.equivalence_ratio() == pytest.approx(1.0, rel=1e-12)


def test_geodesic_is_a_metric():
    g = Grid.vertex_centered(-1, 1, 24, 1)
    h = WeightField(g, a1_weights(1)["power"](g).values ** 0.5)
    D = GeodesicGraph(QuasiMetricSpec(2.0, h), 3).all_pairs()
    assert np.allclose(D, D.T) and np.all(np.diag(D) == 0)
    # triangle inequality on every triple
    assert np.all(D[:, None, :] <= D[:, :, None] + D[None, :, :] + 1e-12)


def test_delta_sym_dominated_by_geodesic_ratio():
    g = Grid.vertex_centered(-1, 1, 16, 1)
    h = WeightField(g, a1_weights(1)["gaussian"](g).values ** 0.5)
    G = GeodesicGraph(QuasiMetricSpec(2.0, h), 3)
    C = G.equivalence_ratio()
    x, y = g.nodes()[2], g.nodes()[13]
    assert delta_q_sym(G.spec, x, y) <= C * G.distance(x, y) * (1 + 1e-12)
    assert 1.0 <= C < 3.0


def test_phi_and_chain_inequality():
    g = Grid.vertex_centered(-1, 1, 32, 1)
    w = a1_weights(1)["sine"](g)
    ev = PhiEvaluator(w, 1.0)
    x, y = g.nodes()[3], g.nodes()[29]
    assert phi_q(w, 1.0, x, y, ev) >= abs(x - y)[0] * 0.5  # the weight is at least 1/2
    chain = [g.nodes()[i] for i in (3, 10, 17, 29)]
    assert chain_inequality_check(w, 1.0, chain, evaluator=ev)


def test_phi_of_constant_weight():
    g = Grid.vertex_centered(-1, 1, 8, 2)
    w = ScalarField(g, np.full(g.shape, 4.0))
    assert phi_q(w, 2.0, [0.0, 0.0], [0.5, 0.25]) == pytest.approx(0.5 * 2.0, rel=1e-14)


def test_exponent_comparison_power_means():
    g = Grid.vertex_centered(-1, 1, 32, 1)
    h = ScalarField(g, a1_weights(1)["gaussian"](g).values)
    ds, dq = exponent_comparison(h, 2.0, 1.0, [0.0], [0.5])
    assert ds <= dq * (1 + 1e-12)


def test_least_concave_majorant():
    om = least_concave_majorant([1.0, 2.0, 3.0], [1.0, 1.0, 3.0])
    assert np.allclose(om, [1.0, 2.0, 3.0])
    om = least_concave_majorant([1.0, 2.0, 4.0], [2.0, 3.0, 3.5])
    assert np.allclose(om, [2.0, 3.0, 3.5])


def test_metric_profile_of_constant_weight_is_linear():
    spec = _const_spec(n=1, cells=64, c=2.0, q=1.0)
    prof = metric_profile(spec, [0.0])
    assert np.allclose(prof.values, 2.0 * np.asarray(prof.knots), rtol=1e-12)
    assert np.allclose(prof.omega, prof.values, rtol=1e-12)


def test_pseudoconvexity_of_norm_is_one():
    def d(a, b):
        return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
    assert pseudoconvexity_check(d, [0.0, 0.0], [1.0, 1.0], [0.25, 0.25]) == pytest.approx(1.0)


def test_distance_table(tmp_path):
    spec = _const_spec(n=1, cells=4)
    G = GeodesicGraph(spec, 1)
    path = tmp_path / "d.csv"
    write_distance_table(path, G)
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == 5 * 4 // 2
    assert set(rows[0]) == {"i", "j", "delta_q", "d_q", "ratio"}
    assert all(float(r["ratio"]) == pytest.approx(1.0) for r in rows)
