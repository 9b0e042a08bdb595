import json

import numpy as np
import pytest

from sobolev_traces.geometry import (Cube, Grid, PointSet, covering_multiplicity, cube_point_distance,
                                     dist_point_set, load_point_set, nearest_anchor, partition_disjoint,
                                     tfm_bound, touching_family, whitney_decompose)


def test_cube_basics():
    Q = Cube((0.0, 1.0), 0.5)
    assert Q.dim == 2
    assert Q.diam == 1.0  # uniform norm: diam = 2r
    assert Q.volume == 1.0
    assert Q.star == Cube((0.0, 1.0), 0.5625)
    assert Q.contains((0.5, 1.5)) and not Q.contains((0.6, 1.0))
    assert len(Q.children()) == 4
    assert sum(c.volume for c in Q.children()) == Q.volume
    assert Cube.from_json(json.loads(json.dumps(Q.to_json()))) == Q


def test_cube_intersections_closed_versus_interior():
    a, b = Cube((0.0,), 1.0), Cube((2.0,), 1.0)
    assert a.intersects(b)  # they share the point 1
    assert not a.interiors_overlap(b)
    assert not a.intersects(Cube((2.5,), 1.0))


def test_cube_rejects_bad_radius():
    with pytest.raises(ValueError):
        Cube((0.0,), 0.0)


def test_point_set_distinct_and_json(tmp_path):
    E = PointSet([[0.0, 0.0], [1.0, 0.5]])
    assert len(E) == 2 and E.dim == 2
    assert E.index_of([1.0, 0.5]) == 1
    path = tmp_path / "E.json"
    path.write_text(json.dumps(E.to_json()))
    assert np.array_equal(load_point_set(path).points, E.points)
    with pytest.raises(ValueError):
        PointSet([[0.0], [0.0]])


def test_grid_vertex_centered():
    g = Grid.vertex_centered(-1, 1, 8, 2)
    assert g.shape == (9, 9) and g.size == 81
    assert g.spacing == 0.25
    assert np.allclose(g.lower, [-1.125, -1.125]) and np.allclose(g.upper, [1.125, 1.125])
    assert g.index_of([0.25, -1.0]) == (5, 0)
    assert np.array_equal(g.snap([0.3, 7.0]), [0.25, 1.0])
    with pytest.raises(ValueError):
        g.index_of([0.1, 0.0])
    fine = g.refine(2)
    assert fine.spacing == 0.125 and fine.shape == (17, 17)


def test_distances_uniform_norm():
    E = PointSet([[0.0, 0.0], [3.0, 0.0]])
    d, y = dist_point_set([1.0, 2.0], E)
    assert d == 2.0 and np.array_equal(y, [0.0, 0.0])
    Q = Cube((5.0, 5.0), 1.0)
    assert np.allclose(cube_point_distance(Q, E.points), [4.0, 4.0])


def test_whitney_single_point_1d():
    E = PointSet([[0.0]])
    box = Cube((0.0,), 1.0)
    W = whitney_decompose(E, box, 8)
    d = W.distances()
    diam = np.array([Q.diam for Q in W.cubes])
    assert np.all(diam <= d) and np.all(d <= 4 * diam)
    # cubes and collar tile the box exactly
    total = sum(Q.volume for Q in W.cubes) + sum(Q.volume for Q in W.collar)
    assert total == box.volume
    # no two cubes overlap
    for i, a in enumerate(W.cubes):
        for b in W.cubes[i + 1:]:
            assert not a.interiors_overlap(b)


def test_whitney_root_kept_when_admissible():
    # dist((3, 0), [-1, 1]**2) = 2 = diam, so the box itself is a Whitney cube
    W = whitney_decompose(PointSet([[3.0, 0.0]]), Cube((0.0, 0.0), 1.0), 4)
    assert W.cubes == (Cube((0.0, 0.0), 1.0),)
    # too far for the root and not inside the box
    with pytest.raises(ValueError):
        whitney_decompose(PointSet([[10.0, 10.0]]), Cube((0.0, 0.0), 1.0), 4)


def test_touching_family_and_anchor():
    E = PointSet([[0.0, 0.0]])
    W = whitney_decompose(E, Cube((0.0, 0.0), 1.0), 6)
    K = W.cubes[0]
    T = touching_family(K, W)
    assert K in T
    for Q in T:
        assert 0.25 * Q.diam <= K.diam <= 4 * Q.diam
    a = nearest_anchor(K, E)
    assert np.array_equal(a, [0.0, 0.0])


def test_covering_multiplicity_and_bound():
    fam = [Cube((0.0,), 1.0), Cube((1.0,), 1.0), Cube((2.0,), 1.0)]
    # [-1,1], [0,2], [1,3] all contain 1
    assert covering_multiplicity(fam) == 3
    assert tfm_bound(1, 3) == 3
    assert tfm_bound(2, 3) == 5


def test_partition_disjoint_chain():
    fam = [Cube((float(i),), 0.75) for i in range(6)]
    parts = partition_disjoint(fam)
    assert len(parts) <= tfm_bound(1, covering_multiplicity(fam))
    assert sorted(c.center for p in parts for c in p) == sorted(c.center for c in fam)
    for p in parts:
        for i, a in enumerate(p):
            for b in p[i + 1:]:
                assert not a.intersects(b)
