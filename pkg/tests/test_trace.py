import itertools
import json

import numpy as np
import pytest

from sobolev_traces.corpus import trace_corpus
from sobolev_traces.extension import JetField
from sobolev_traces.fields import ScalarField
from sobolev_traces.geometry import Cube, Grid, PointSet
from sobolev_traces.polynomials import AnalyticFunction, Polynomial
from sobolev_traces.trace import (DividedDifferenceTable, brudnyi_sum, divided_difference,
                                  divided_difference_symmetric, jet_sharp_max, jet_trace_norm, search_brudnyi_sum,
                                  search_variational_sum, sharp_field, sharp_max_function, trace_1d_linf,
                                  trace_1d_lp, trace_norm_L1p, variational_sum)


def two_point_integral(B, p):
    """Exact integral of the sharp function of E = {0, 1}, f = (0, 1) over [-B, B]."""
    right = (1 - (2 * B - 1) ** (1 - p)) / (2 * (p - 1))
    left = (1 - (2 * B + 1) ** (1 - p)) / (2 * (p - 1))
    return 1 + right + left


def test_sharp_field_two_points():
    E = PointSet([[0.0], [1.0]])
    vals = sharp_field([0.0, 1.0], E, np.array([[0.5], [2.0], [-1.0], [0.0]]))
    assert np.allclose(vals, [1.0, 1 / 3, 1 / 3, 1.0])
    assert sharp_max_function([0.0, 1.0], E, [0.25]) == 1.0


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_trace_norm_two_points_against_closed_form(p):
    E = PointSet([[0.0], [1.0]])
    g = Grid.vertex_centered(-4, 4, 1024, 1)
    rep = trace_norm_L1p([0.0, 1.0], E, p, g)
    B = g.upper[0]
    exact = two_point_integral(B, p) ** (1 / p)
    assert rep.functional_value == pytest.approx(exact, abs=4 * g.spacing)
    # full-space integral is 1 + 1/(p-1); the tail bound covers the difference
    full = 1 + 1 / (p - 1)
    assert rep.functional_value**p <= full <= rep.functional_value**p + rep.tail_bound + 4 * g.spacing
    assert rep.recompute() == pytest.approx(rep.functional_value)


def test_trace_report_outputs(tmp_path):
    E = PointSet([[0.0], [1.0]])
    rep = trace_norm_L1p([0.0, 1.0], E, 2.0, Grid.vertex_centered(-2, 2, 16, 1))
    rep.write_summary(tmp_path / "s.json", "L1p", "two-point", 42)
    data = json.loads((tmp_path / "s.json").read_text())
    assert set(data) == {"functional", "value", "tail_bound", "corpus_id", "seed"}
    rep.to_csv(tmp_path / "s.csv")
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 18


def test_trace_norm_of_constant_is_zero():
    E = PointSet([[0.0], [0.5], [1.0]])
    rep = trace_norm_L1p([2.0, 2.0, 2.0], E, 2.0, Grid.vertex_centered(-2, 2, 16, 1))
    assert rep.functional_value == 0.0 and rep.tail_bound == 0.0


def test_jet_trace_of_global_polynomial_is_zero():
    E = PointSet([[0.0, 0.0], [1.0, 0.5], [-0.5, 1.0]])
    P = Polynomial(2, 1, {(0, 0): 1.0, (1, 0): 2.0, (0, 1): -1.0})
    J = JetField.from_function(P, E, 2)
    rep = jet_trace_norm(J, 3.0, Grid.vertex_centered(-2, 2, 16, 2))
    assert rep.functional_value == pytest.approx(0.0, abs=1e-12)
    assert rep.extras["beta_count"] == 3


def test_jet_sharp_of_quadratic():
    # jets of x**2 of order 2 at 0 and 1: value difference at x=0 is |0 - (1 + 2*(0-1))| = 1
    E = PointSet([[0.0], [1.0]])
    J = JetField.from_function(AnalyticFunction("x0**2", 1), E, 2)
    assert jet_sharp_max(J, [0.5]) > 0


def test_divided_differences_exact_cases():
    S = np.array([0.0, 1.0, 2.0, 4.0])
    assert divided_difference(lambda x: x**3, S) == 1.0
    assert divided_difference(lambda x: x**2 - 3 * x + 1, S) == 0.0
    assert divided_difference_symmetric(lambda x: x**3, S) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError):
        divided_difference(np.exp, [0.0, 0.0, 1.0])


def test_divided_difference_permutation_invariant():
    S = np.array([-0.7, 0.1, 0.4, 0.9])
    ref = divided_difference(np.sin, S)
    for perm in itertools.permutations(range(4)):
        assert divided_difference(np.sin, S[list(perm)]) == pytest.approx(ref, rel=1e-12)


def test_divided_difference_table():
    E = np.array([0.5, -1.0, 0.0, 2.0])
    tab = DividedDifferenceTable.build(E, np.exp, 2)
    assert np.array_equal(tab.E, np.sort(E))
    assert tab.subset([0, 2, 3]) == pytest.approx(divided_difference(np.exp, tab.E[[0, 2, 3]]))
    assert len(tab.table[2]) == 2


def test_trace_1d_linf_quadratic():
    E = np.array([-1.0, -0.3, 0.2, 0.7, 1.5])
    assert trace_1d_linf(lambda x: 3 * x**2 + x, E, 2) == pytest.approx(3.0, rel=1e-12)
    best, details = trace_1d_linf(np.sin, E, 2, return_details=True)
    assert best >= details["windows"]


def test_trace_1d_lp_pair_bounded():
    E = np.array([-1.0, -0.4, 0.1, 0.3, 0.8])
    g = Grid.vertex_centered(-3, 3, 600, 1)
    p = 2.0
    for f in trace_corpus():
        A, B = trace_1d_lp(lambda x: f(x[:, None]), E, 2, p, g)
        assert 2 ** (1 / p - 1) <= A / B <= 2 ** (1 / p)


def test_variational_sum_rules():
    E = PointSet([[0.0], [1.0], [3.0]])
    J = JetField.from_function(AnalyticFunction("x0**2", 1), E, 2)
    cubes = [Cube((0.5,), 0.25), Cube((2.0,), 0.25)]
    pairs = [(np.array([0.0]), np.array([1.0])), (np.array([1.0]), np.array([3.0]))]
    val = variational_sum(J, cubes, pairs, (0,), 2.0)
    # |P_x(x) - P_y(x)| = (x - y)**2, diam Q = 0.5, exponent 2*2 - 1 = 3
    assert val == pytest.approx((1.0**2 + 2.0**4) / 0.5**3)
    with pytest.raises(ValueError):
        variational_sum(J, [Cube((0.5,), 0.5), Cube((0.75,), 0.5)], pairs, (0,), 2.0)
    rng = np.random.default_rng(3)
    assert search_variational_sum(J, (0,), 2.0, rng, trials=20) > 0


def test_brudnyi_sum_linear_field():
    g = Grid.vertex_centered(-1, 1, 16, 1)
    F = ScalarField(g, 2 * g.axis(0))
    cubes = [Cube((-0.5,), 0.25), Cube((0.5,), 0.25)]
    pairs = [(np.array([-0.75]), np.array([-0.25])), (np.array([0.25]), np.array([0.75]))]
    # each term: |2 * 0.5|**2 / 0.5**(2 - 1) = 2
    assert brudnyi_sum(F, cubes, pairs, 2.0) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        brudnyi_sum(F, [Cube((0.0,), 0.25), Cube((0.5,), 0.5)], pairs, 2.0)
    assert search_brudnyi_sum(F, 2.0, np.random.default_rng(0), 10) > 0
