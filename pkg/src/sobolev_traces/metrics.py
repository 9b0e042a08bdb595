"""Pre-metrics generated by weights and their geodesic regularizations.

For a weight ``h`` and an exponent ``q`` the pre-metric is

    delta_q(x, y : h) = ||x - y|| * (avg over Q(x, ||x - y||) of h**q) ** (1/q),

which is neither symmetric nor subject to a triangle inequality.  The
geodesic distance ``d_q`` is the infimum of ``sum delta_q(x_i, x_{i+1})``
over chains joining ``x`` to ``y``; on a grid it is a shortest-path distance.
The sup-form ``phi_q(x, y : w)`` replaces the single cube by the largest
average over all candidate cubes containing both points.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .fields import CubeIntegrator, ScalarField, WeightField, dyadic_radii
from .geometry import Grid
from .maximal import NodeCubeFamily, a1_norm

__all__ = [
    "QuasiMetricSpec",
    "GeodesicGraph",
    "ConcaveProfile",
    "PhiEvaluator",
    "delta_q",
    "delta_q_pairs",
    "delta_q_sym",
    "phi_q",
    "chain_inequality_check",
    "geodesic_dq",
    "exponent_comparison",
    "inf_cube_distance",
    "least_concave_majorant",
    "metric_profile",
    "pseudoconvexity_check",
    "write_distance_table",
]


def _pts(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a[None]
    return np.atleast_2d(a)


@dataclass(frozen=True)
class QuasiMetricSpec:
    """Exponent ``q >= n`` together with the weight ``h`` (``h**q`` is formed internally)."""

    q: float
    weight: ScalarField

    def __post_init__(self):
        w = self.weight
        if not isinstance(w, WeightField):
            w = WeightField(w.grid, w.values)
            object.__setattr__(self, "weight", w)
        if self.q < w.grid.dim:
            raise ValueError(f"q = {self.q} must be at least the dimension {w.grid.dim}")

    @property
    def grid(self) -> Grid:
        return self.weight.grid

    @property
    def dim(self) -> int:
        return self.grid.dim

    def integrator(self) -> CubeIntegrator:
        return CubeIntegrator(self.grid, self.weight.values**self.q)

    def to_json(self, weight_ref: str, grid_ref: str) -> dict:
        return {"q": self.q, "weight_ref": weight_ref, "grid_ref": grid_ref}


def delta_q_pairs(spec: QuasiMetricSpec, X, Y, integ: CubeIntegrator | None = None,
                  return_truncated: bool = False):
    """Vectorized ``delta_q(X[i], Y[i])`` for ``(m, n)`` arrays of points."""
    X, Y = _pts(X), _pts(Y)
    integ = integ or spec.integrator()
    r = np.max(np.abs(X - Y), axis=1)
    out = np.zeros(r.shape)
    nz = r > 0
    if np.any(nz):
        avg = np.maximum(integ.averages(X[nz], r[nz]), 0.0)
        out[nz] = r[nz] * avg ** (1.0 / spec.q)
    if return_truncated:
        g = spec.grid
        trunc = np.any(X - r[:, None] < g.lower, axis=1) | np.any(X + r[:, None] > g.upper, axis=1)
        return out, trunc
    return out


def delta_q(spec: QuasiMetricSpec, x, y, return_truncated: bool = False):
    """The pre-metric ``delta_q(x, y : h)``; with ``return_truncated`` also report
    whether ``Q(x, ||x - y||)`` leaves the grid box (it is then evaluated on the
    edge-replicated weight rather than clipped)."""
    v, t = delta_q_pairs(spec, x, y, return_truncated=True)
    if return_truncated:
        return float(v[0]), bool(t[0])
    return float(v[0])


def delta_q_sym(spec: QuasiMetricSpec, x, y) -> float:
    return max(delta_q(spec, x, y), delta_q(spec, y, x))


class PhiEvaluator:
    """Evaluates ``phi_q(x, y : w)`` over the node cube family for grid nodes."""

    def __init__(self, w: ScalarField, q: float):
        if q < w.grid.dim:
            raise ValueError("q must be at least the dimension")
        self.w = w
        self.q = q
        self.family = NodeCubeFamily(w)

    def __call__(self, X, Y) -> np.ndarray:
        X, Y = _pts(X), _pts(Y)
        dist = np.max(np.abs(X - Y), axis=1)
        out = np.zeros(dist.shape)
        nz = dist > 0
        if np.any(nz):
            sup = np.maximum(self.family.sup_average_containing(X[nz], Y[nz]), 0.0)
            out[nz] = dist[nz] * sup ** (1.0 / self.q)
        return out


def phi_q(w: ScalarField, q: float, x, y, evaluator: PhiEvaluator | None = None) -> float:
    """``||x - y||`` times the largest ``(avg w)**(1/q)`` over candidate cubes containing ``x, y``.

    ``x`` and ``y`` must be grid nodes.
    """
    ev = evaluator or PhiEvaluator(w, q)
    return float(ev(x, y)[0])


def chain_inequality_check(w: ScalarField, q: float, chain: Sequence, constant: float = 16.0,
                           evaluator: PhiEvaluator | None = None, rtol: float = 1e-12) -> bool:
    """Whether ``phi_q(x_0, x_m) <= 16 * sum phi_q(x_i, x_{i+1})`` along ``chain``."""
    chain = _pts(chain)
    if chain.shape[0] < 2:
        raise ValueError("a chain needs at least two points")
    ev = evaluator or PhiEvaluator(w, q)
    lhs = ev(chain[:1], chain[-1:])[0]
    rhs = constant * ev(chain[:-1], chain[1:]).sum()
    return bool(lhs <= rhs * (1 + rtol))


class GeodesicGraph:
    """Grid nodes (plus optional extra points) joined when within ``R`` grid steps.

    Edge weights are the symmetrized pre-metric ``max(delta(x, y), delta(y, x))``.
    """

    def __init__(self, spec: QuasiMetricSpec, hop_radius: int = 3, extra_points=None):
        if hop_radius < 1:
            raise ValueError("hop radius must be at least 1")
        self.spec = spec
        self.hop_radius = int(hop_radius)
        g = spec.grid
        self.grid = g
        nodes = g.nodes()
        extra = np.zeros((0, g.dim)) if extra_points is None else _pts(extra_points)
        self.points = np.concatenate([nodes, extra]) if extra.size else nodes
        self._integ = spec.integrator()
        rows, cols = self._grid_edges()
        if extra.size:
            er, ec = self._extra_edges(nodes.shape[0], extra)
            rows, cols = np.concatenate([rows, er]), np.concatenate([cols, ec])
        self.rows, self.cols = rows, cols
        a, b = self.points[rows], self.points[cols]
        wts = np.maximum(delta_q_pairs(spec, a, b, self._integ), delta_q_pairs(spec, b, a, self._integ))
        self.weights = wts
        N = self.points.shape[0]
        # zero-weight edges must stay edges; scipy drops explicit zeros
        stored = np.where(wts > 0, wts, np.finfo(float).tiny)
        m = sparse.coo_matrix((stored, (rows, cols)), shape=(N, N)).tocsr()
        self.matrix = m
        self._dist = None

    def _grid_edges(self):
        g = self.grid
        R = self.hop_radius
        idx = np.arange(g.size).reshape(g.shape)
        rows, cols = [], []
        offsets = np.array(np.meshgrid(*[np.arange(-R, R + 1)] * g.dim, indexing="ij")).reshape(g.dim, -1).T
        for off in offsets:
            # keep each undirected edge once: first nonzero coordinate positive
            nzc = off[np.flatnonzero(off)]
            if nzc.size == 0 or nzc[0] < 0:
                continue
            src = [slice(max(0, -o), g.extents[a] - max(0, o)) for a, o in enumerate(off)]
            dst = [slice(max(0, o), g.extents[a] - max(0, -o)) for a, o in enumerate(off)]
            rows.append(idx[tuple(src)].ravel())
            cols.append(idx[tuple(dst)].ravel())
        return np.concatenate(rows), np.concatenate(cols)

    def _extra_edges(self, n_nodes: int, extra: np.ndarray):
        reach = self.hop_radius * self.grid.spacing * (1 + 1e-12)
        rows, cols = [], []
        for i, p in enumerate(extra):
            d = np.max(np.abs(self.points - p), axis=1)
            d[n_nodes + i] = np.inf
            near = np.flatnonzero(d <= reach)
            near = near[(near < n_nodes) | (near > n_nodes + i)]
            rows.append(np.full(near.size, n_nodes + i))
            cols.append(near)
        return np.concatenate(rows), np.concatenate(cols)

    def __len__(self) -> int:
        return self.points.shape[0]

    def index_of(self, x) -> int:
        hits = np.flatnonzero(np.all(np.abs(self.points - _pts(x)[0]) <= 1e-9 * self.grid.spacing, axis=1))
        if hits.size == 0:
            raise KeyError(f"{x} is not a graph node")
        return int(hits[0])

    def distances_from(self, sources) -> np.ndarray:
        d = csgraph.dijkstra(self.matrix, directed=False, indices=sources)
        if np.any(np.isinf(d)):
            raise RuntimeError("geodesic graph is disconnected")
        return d

    def all_pairs(self) -> np.ndarray:
        if self._dist is None:
            self._dist = self.distances_from(None)
        return self._dist

    def distance(self, x, y) -> float:
        i, j = self.index_of(x), self.index_of(y)
        if self._dist is not None:
            return float(self._dist[i, j])
        return float(self.distances_from([i])[0, j])

    def delta_sym_matrix(self) -> np.ndarray:
        """``max(delta(x, y), delta(y, x))`` for all pairs of graph nodes."""
        P = self.points
        N = P.shape[0]
        out = np.zeros((N, N))
        for i in range(N):
            a = np.broadcast_to(P[i], P.shape)
            out[i] = np.maximum(delta_q_pairs(self.spec, a, P, self._integ),
                                delta_q_pairs(self.spec, P, a, self._integ))
        return out

    def equivalence_ratio(self) -> float:
        """Largest ``delta_sym / d_q`` over all pairs of distinct nodes."""
        d = self.all_pairs()
        ds = self.delta_sym_matrix()
        mask = d > 0
        return float(np.max(ds[mask] / d[mask]))


def geodesic_dq(spec: QuasiMetricSpec, x, y, hop_radius: int = 3) -> float:
    """Shortest-path distance between two grid nodes."""
    G = GeodesicGraph(spec, hop_radius)
    return G.distance(x, y)


def exponent_comparison(h: ScalarField, q: float, s: float, x, y) -> tuple[float, float]:
    """``(delta_s(x, y : h), delta_q(x, y : h))`` for ``0 < s <= q``."""
    if not 0 < s <= q:
        raise ValueError("need 0 < s <= q")
    ds = delta_q_pairs(_RawSpec(s, h), x, y)[0]
    dq = delta_q_pairs(_RawSpec(q, h), x, y)[0]
    return float(ds), float(dq)


@dataclass(frozen=True)
class _RawSpec:
    """Spec without the ``q >= n`` requirement (for exponent comparisons)."""

    q: float
    weight: ScalarField

    @property
    def grid(self) -> Grid:
        return self.weight.grid

    def integrator(self) -> CubeIntegrator:
        return CubeIntegrator(self.grid, self.weight.values**self.q)


def inf_cube_distance(h: ScalarField, q: float, s: float, x, y) -> float:
    """Smallest ``diam Q * (avg_Q h**s)**(1/s)`` over node-centered cubes ``Q(c, k spacing)``
    containing both nodes, ``1 <= k <= kmax``."""
    if not 0 < s <= q:
        raise ValueError("need 0 < s <= q")
    g = h.grid
    X, Y = _pts(x)[0], _pts(y)[0]
    if np.all(X == Y):
        return 0.0
    fam = NodeCubeFamily(ScalarField(g, h.values**s))
    kmax = fam.kmax
    cover = fam._integ.node_averages(kmax).ravel()[:, None]
    avg = np.concatenate([fam.avg, cover], axis=1)
    k = np.arange(1, kmax + 1) * g.spacing
    vals = 2 * k[None, :] * np.maximum(avg, 0.0) ** (1.0 / s)
    suffix_min = np.minimum.accumulate(vals[:, ::-1], axis=1)[:, ::-1]
    cidx = np.rint((fam.nodes - np.asarray(g.origin)) / g.spacing).astype(int)
    ix = np.asarray(g.index_of(X))
    iy = np.asarray(g.index_of(Y))
    need = np.maximum(np.abs(cidx - ix).max(axis=1), np.abs(cidx - iy).max(axis=1))
    need = np.clip(need, 1, None)
    ok = need <= kmax
    return float(suffix_min[np.flatnonzero(ok), need[ok] - 1].min())


@dataclass(frozen=True)
class ConcaveProfile:
    """Sampled ``v_x(t)`` with its least concave majorant ``omega`` on the same knots.

    ``eta`` is the measured doubling constant ``max_{t1 < t2} (v(t2)/t2) / (v(t1)/t1)``
    and ``bound`` the value it is checked against (``None`` when skipped).
    """

    anchor: np.ndarray
    knots: np.ndarray
    values: np.ndarray
    omega: np.ndarray
    eta: float
    bound: float | None
    doubling_ok: bool | None
    flags: tuple[str, ...] = field(default=())


def least_concave_majorant(t, v) -> np.ndarray:
    """Least concave majorant through ``(0, 0)`` evaluated at the knots ``t``.

    This is the upper convex hull of ``{(0, 0)} U {(t_i, v_i)}``, continued
    as a constant after its maximum so the result is also nondecreasing.
    """
    t = np.concatenate([[0.0], np.asarray(t, dtype=float)])
    v = np.concatenate([[0.0], np.asarray(v, dtype=float)])
    v = np.maximum.accumulate(v)
    hull = [0]
    for i in range(1, t.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (t[b] - t[a]) * (v[i] - v[a]) - (v[b] - v[a]) * (t[i] - t[a])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    om = np.interp(t, t[hull], v[hull])
    return np.maximum(om, v)[1:]


def metric_profile(spec: QuasiMetricSpec, x) -> ConcaveProfile:
    """``v_x(t) = t (avg_{Q(x,t)} h**q)**(1/q)`` on the dyadic ladder and its concave majorant."""
    g = spec.grid
    x = _pts(x)[0]
    g.index_of(x)
    t = dyadic_radii(g)[1:]
    integ = spec.integrator()
    v = t * np.maximum(integ.averages(np.broadcast_to(x, (t.size, g.dim)), t), 0.0) ** (1.0 / spec.q)
    flags = []
    rep = a1_norm(spec.weight.power(spec.q))
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = v / t
        eta = float(np.nanmax(slope[None, :] / slope[:, None] * np.triu(np.ones((t.size, t.size)))))
    if rep.finite:
        bound = rep.norm_estimate ** (1.0 / spec.q)
        ok = bool(eta <= bound * (1 + 1e-12))
    else:
        bound, ok = None, None
        flags.append("not A1 at resolution: doubling check skipped")
    if np.any(np.diff(v) < -1e-12 * np.abs(v[1:])):
        flags.append("profile not monotone")
    return ConcaveProfile(x, t, v, least_concave_majorant(t, v), eta, bound, ok, tuple(flags))


def pseudoconvexity_check(d: Callable, x, y, z) -> float:
    """``(d(x, z) + d(z, y)) / d(x, y)`` for ``z`` on the segment between ``x`` and ``y``."""
    dxy = d(x, y)
    if dxy == 0:
        if np.any(np.asarray(x) != np.asarray(y)):
            raise ValueError("degenerate metric")
        return 1.0
    return float((d(x, z) + d(z, y)) / dxy)


def write_distance_table(path, graph: GeodesicGraph, pairs=None) -> None:
    """CSV with one row per pair: ``i, j, delta_q, d_q, ratio`` (``delta_q`` symmetrized)."""
    d = graph.all_pairs()
    N = len(graph)
    if pairs is None:
        pairs = [(i, j) for i in range(N) for j in range(i + 1, N)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "delta_q", "d_q", "ratio"])
        P = graph.points
        for i, j in pairs:
            dl = max(delta_q(graph.spec, P[i], P[j]), delta_q(graph.spec, P[j], P[i]))
            w.writerow([i, j, dl, d[i, j], dl / d[i, j] if d[i, j] > 0 else ""])


def save_spec(path, spec: QuasiMetricSpec, weight_ref: str, grid_ref: str) -> None:
    with open(path, "w") as fh:
        json.dump(spec.to_json(weight_ref, grid_ref), fh)
