"""Extension operators: Taylor polynomials, McShane and Whitney extensions."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .fields import ScalarField
from .geometry import Cube, Grid, PointSet, WhitneyDecomposition, nearest_anchor, touching_family
from .metrics import GeodesicGraph
from .polynomials import AnalyticFunction, Polynomial, multi_binomial, multi_factorial, multi_indices
from .sobolev import discrete_derivatives

__all__ = [
    "JetField",
    "NormDistance",
    "GraphDistance",
    "PartitionOfUnity",
    "WhitneyExtension",
    "taylor_poly",
    "mcshane_extend",
    "lipschitz_seminorm",
    "bump_derivatives_1d",
    "build_partition_of_unity",
    "whitney_extend_jet",
    "local_jet_terms",
    "taylor_remainder_check",
]


def _pts(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a[None]
    return np.atleast_2d(a)


# -- Taylor polynomials -------------------------------------------------------

def taylor_poly(F, y, m: int) -> Polynomial:
    """Degree ``m`` Taylor polynomial of ``F`` at ``y``, based at ``y``.

    ``F`` may be an :class:`AnalyticFunction` (exact derivatives), a
    :class:`Polynomial` (exact re-expansion) or a :class:`ScalarField`
    (central differences at the node ``y``).
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if isinstance(F, AnalyticFunction):
        return F.taylor(y, m)
    if isinstance(F, Polynomial):
        coeffs = {a: F.derivative(a)(y) / multi_factorial(a) for a in multi_indices(F.dim, m)}
        return Polynomial(F.dim, m, coeffs, tuple(y))
    if isinstance(F, ScalarField):
        coeffs = {}
        for k in range(m + 1):
            for a, field_a in discrete_derivatives(F, k).items():
                try:
                    val = field_a.at(y)
                except ValueError:
                    raise ValueError("y is too close to the grid boundary for the stencil") from None
                coeffs[a] = val / multi_factorial(a)
        return Polynomial(F.grid.dim, m, coeffs, tuple(y))
    raise TypeError("F must be an AnalyticFunction, Polynomial or ScalarField")


# -- jets -----------------------------------------------------------------------

@dataclass(frozen=True)
class JetField:
    """One polynomial of degree ``<= m - 1`` per point of ``E``, based at that point."""

    E: PointSet
    m: int
    polys: tuple

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be positive")
        polys = tuple(self.polys)
        if len(polys) != len(self.E):
            raise ValueError("need exactly one polynomial per point of E")
        fixed = []
        for x, P in zip(self.E.points, polys):
            if P.degree > self.m - 1 and any(sum(a) > self.m - 1 and c != 0 for a, c in P.coeffs.items()):
                raise ValueError("jet polynomial exceeds degree m - 1")
            if P.dim != self.E.dim:
                raise ValueError("jet polynomial has the wrong dimension")
            P = Polynomial(P.dim, self.m - 1, {a: c for a, c in P.coeffs.items() if sum(a) <= self.m - 1}, P.base)
            if P.base != tuple(x):
                P = P.rebase(x)
            fixed.append(P)
        object.__setattr__(self, "polys", tuple(fixed))

    @classmethod
    def from_function(cls, F, E: PointSet, m: int) -> "JetField":
        """Jet of degree ``m - 1`` Taylor polynomials of ``F`` (analytic or polynomial)."""
        return cls(E, m, tuple(taylor_poly(F, x, m - 1) for x in E.points))

    def __getitem__(self, i: int) -> Polynomial:
        return self.polys[i]

    def poly_at(self, x) -> Polynomial:
        return self.polys[self.E.index_of(x)]

    def __add__(self, other: "JetField") -> "JetField":
        if not np.array_equal(self.E.points, other.E.points) or self.m != other.m:
            raise ValueError("jets live on different sets")
        return JetField(self.E, self.m, tuple(a + b for a, b in zip(self.polys, other.polys)))

    def __mul__(self, c: float) -> "JetField":
        return JetField(self.E, self.m, tuple(P * c for P in self.polys))

    __rmul__ = __mul__

    def to_json(self) -> dict:
        entries = []
        for x, P in zip(self.E.points, self.polys):
            entries.append({"point": x.tolist(),
                            "coeffs": {"(" + ",".join(map(str, a)) + ")": c for a, c in P.coeffs.items()}})
        return {"m": self.m, "entries": entries}

    @classmethod
    def from_json(cls, data: dict) -> "JetField":
        m = int(data["m"])
        pts = np.asarray([e["point"] for e in data["entries"]], dtype=float)
        E = PointSet(pts)
        polys = [Polynomial.from_coeff_json(E.dim, m - 1, e["coeffs"], tuple(np.atleast_1d(e["point"])))
                 for e in data["entries"]]
        return cls(E, m, tuple(polys))

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


# -- distance oracles -----------------------------------------------------------------

class NormDistance:
    """``||a - b||`` for the given ``ord`` (``np.inf`` for the uniform norm)."""

    def __init__(self, ord=np.inf):
        self.ord = ord

    def __call__(self, a, b) -> float:
        return float(np.linalg.norm(np.atleast_1d(np.asarray(a, float) - np.asarray(b, float)), self.ord))

    def table(self, A, B) -> np.ndarray:
        A, B = _pts(A), _pts(B)
        return np.linalg.norm(A[:, None, :] - B[None, :, :], ord=self.ord, axis=2)


class GraphDistance:
    """Shortest-path distance on a :class:`GeodesicGraph` (points must be graph nodes)."""

    def __init__(self, graph: GeodesicGraph):
        self.graph = graph

    def __call__(self, a, b) -> float:
        return self.graph.distance(a, b)

    def table(self, A, B) -> np.ndarray:
        A, B = _pts(A), _pts(B)
        ia = [self.graph.index_of(a) for a in A]
        ib = [self.graph.index_of(b) for b in B]
        if self.graph._dist is not None:
            return self.graph._dist[np.ix_(ia, ib)]
        return self.graph.distances_from(ia)[:, ib]


# -- McShane ---------------------------------------------------------------------------

def mcshane_extend(f, E: PointSet, d, L: float, grid: Grid, rtol: float = 1e-12) -> ScalarField:
    """``F(x) = min_{y in E} f(y) + L d(x, y)`` at every node of ``grid``.

    ``d`` is a distance oracle with a ``table(A, B)`` method.  Raises if ``f``
    is not ``L``-Lipschitz on ``E`` with respect to ``d``.
    """
    f = np.asarray(f, dtype=float).ravel()
    if f.size != len(E):
        raise ValueError("need one value per point of E")
    dE = d.table(E.points, E.points)
    diff = np.abs(f[:, None] - f[None, :])
    bad = diff > L * dE * (1 + rtol) + 1e-300
    if np.any(bad):
        i, j = map(int, np.argwhere(bad)[0])
        raise ValueError(f"f is not {L}-Lipschitz on E: pair {E.points[i].tolist()}, {E.points[j].tolist()}")
    D = d.table(E.points, grid.nodes())
    F = np.min(f[:, None] + L * D, axis=0)
    # at nodes of E the minimum is f(y) exactly; pin it so rounding in f + L d cannot undercut it
    i, k = np.nonzero(D == 0)
    F[k] = f[i]
    return ScalarField(grid, F.reshape(grid.shape))


def lipschitz_seminorm(F: ScalarField, dist: np.ndarray) -> float:
    """``max |F(x) - F(y)| / d(x, y)`` over node pairs with ``d > 0`` (``dist`` is node x node)."""
    v = F.values.ravel()
    best = 0.0
    for i in range(v.size):
        row = dist[i]
        mask = row > 0
        if np.any(mask):
            best = max(best, float(np.max(np.abs(v[i] - v[mask]) / row[mask])))
    return best


# -- partition of unity ----------------------------------------------------------------

def _g_derivative(t: np.ndarray, k: int) -> np.ndarray:
    """``k``-th derivative of ``g(t) = -1 / (1 - t**2)``."""
    f = math.factorial(k)
    return -0.5 * (f / (1 - t) ** (k + 1) + (-1) ** k * f / (1 + t) ** (k + 1))


def bump_derivatives_1d(t, order: int) -> list[np.ndarray]:
    """``[b, b', ..., b^(order)]`` for ``b(t) = exp(-1 / (1 - t**2))`` on ``|t| < 1`` (0 outside)."""
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1
    ti = np.where(inside, t, 0.0)
    with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
        b0 = np.where(inside, np.exp(-1.0 / (1.0 - ti**2)), 0.0)
        gs = [_g_derivative(ti, j) for j in range(1, order + 1)]
        out = [b0]
        for k in range(1, order + 1):
            acc = np.zeros_like(t)
            for j in range(k):
                acc = acc + math.comb(k - 1, j) * gs[j] * out[k - 1 - j]
            out.append(acc)
        # where b underflows to zero the exact derivatives are zero too
        return [np.where(inside & (b0 > 0) & np.isfinite(o), o, 0.0) for o in out]


@dataclass
class _CubeBlock:
    """Active points of one cube and the derivatives of its bump there."""

    index: np.ndarray
    psi: dict


class PartitionOfUnity:
    """Normalized tensor-product bumps ``phi_Q = psi_Q / sum psi`` on the cubes of ``W``.

    ``psi_Q(x) = prod_i b((x_i - c_i) / r*)`` with ``r* = (9/8) r_Q`` so that
    ``supp psi_Q`` is ``Q*``.
    """

    def __init__(self, W: WhitneyDecomposition):
        self.W = W
        self.cubes = W.cubes
        self.centers = np.array([Q.center for Q in W.cubes]) if W.cubes else np.zeros((0, W.truncation_box.dim))
        self.star_radii = np.array([Q.star.half_side for Q in W.cubes])
        self.dim = W.truncation_box.dim

    def _blocks(self, X: np.ndarray, order: int) -> list[_CubeBlock]:
        tree = cKDTree(X)
        blocks = []
        orders = multi_indices(self.dim, order)
        for c, rs in zip(self.centers, self.star_radii):
            idx = np.asarray(tree.query_ball_point(c, rs, p=np.inf), dtype=int)
            if idx.size:
                idx = idx[np.all(np.abs(X[idx] - c) < rs, axis=1)]
            if idx.size == 0:
                blocks.append(_CubeBlock(idx, {}))
                continue
            per_axis = [bump_derivatives_1d((X[idx, a] - c[a]) / rs, order) for a in range(self.dim)]
            psi = {}
            for beta in orders:
                val = np.ones(idx.size)
                for a, b in enumerate(beta):
                    val = val * per_axis[a][b] / rs**b
                psi[beta] = val
            blocks.append(_CubeBlock(idx, psi))
        return blocks

    def psi_sum(self, X, order: int = 0) -> dict:
        """``D^beta sum_Q psi_Q`` at the points ``X`` for ``|beta| <= order``."""
        X = _pts(X)
        S = {b: np.zeros(X.shape[0]) for b in multi_indices(self.dim, order)}
        for blk in self._blocks(X, order):
            for b, v in blk.psi.items():
                S[b][blk.index] += v
        return S

    def evaluate(self, X, order: int = 0) -> tuple[list[dict], list[np.ndarray], np.ndarray]:
        """Derivatives ``D^beta phi_Q`` (``|beta| <= order``) at the points ``X``.

        Returns ``(phi, index, covered)``: ``phi[j][beta]`` holds values at the
        points ``X[index[j]]`` for cube ``j``; ``covered`` marks points where at
        least one bump is positive (the others lie in the collar or outside
        the truncation box and are excluded).
        """
        X = _pts(X)
        blocks = self._blocks(X, order)
        orders = multi_indices(self.dim, order)
        S = {b: np.zeros(X.shape[0]) for b in orders}
        for blk in blocks:
            for b, v in blk.psi.items():
                S[b][blk.index] += v
        covered = S[orders[0]] > 0
        phis = []
        for blk in blocks:
            idx = blk.index
            if idx.size == 0:
                phis.append({})
                continue
            Sl = {b: S[b][idx] for b in orders}
            phis.append(_quotient_derivatives(blk.psi, Sl, orders))
        return phis, [b.index for b in blocks], covered

    def sum(self, X) -> tuple[np.ndarray, np.ndarray]:
        """``sum_Q phi_Q`` at ``X`` and the covered mask."""
        X = _pts(X)
        phis, idx, covered = self.evaluate(X, 0)
        tot = np.zeros(X.shape[0])
        zero = (0,) * self.dim
        for ph, ix in zip(phis, idx):
            if ix.size:
                tot[ix] += ph[zero]
        return tot, covered

    def inside_cubes(self, X) -> np.ndarray:
        """The rows of ``X`` that lie in at least one cube of the decomposition."""
        X = _pts(X)
        keep = np.zeros(X.shape[0], dtype=bool)
        if X.shape[0] == 0:
            return X
        tree = cKDTree(X)
        for Q in self.cubes:
            r = Q.half_side * (1 + 1e-12)
            idx = np.asarray(tree.query_ball_point(Q.center, r, p=np.inf), dtype=int)
            keep[idx] = True
        return X[keep]

    def derivative_constants(self, X, order: int) -> dict[int, float]:
        """``max |D^beta phi_Q(x)| (diam Q)**|beta|`` over cubes, points and ``|beta| = k``.

        Only points lying in some (closed) Whitney cube count: outside the
        union of the cubes the bump sum can be arbitrarily small and the
        scaling bound is not claimed there.
        """
        X = self.inside_cubes(_pts(X))
        phis, idx, _ = self.evaluate(X, order)
        out = {k: 0.0 for k in range(order + 1)}
        for Q, ph in zip(self.cubes, phis):
            for b, v in ph.items():
                k = sum(b)
                if v.size:
                    out[k] = max(out[k], float(np.max(np.abs(v))) * Q.diam**k)
        return out


def _quotient_derivatives(num: dict, den: dict, orders) -> dict:
    """Derivatives of ``num / den`` from those of ``num`` and ``den`` (Leibniz recursion)."""
    out = {}
    zero = orders[0]
    for a in orders:
        acc = num[a].copy()
        for b in orders:
            if b != a and all(bi <= ai for ai, bi in zip(a, b)):
                diff = tuple(ai - bi for ai, bi in zip(a, b))
                acc -= multi_binomial(a, b) * out[b] * den[diff]
        out[a] = acc / den[zero]
    return out


def build_partition_of_unity(W: WhitneyDecomposition) -> PartitionOfUnity:
    return PartitionOfUnity(W)


# -- Whitney extension -------------------------------------------------------------------

@dataclass
class WhitneyExtension:
    """Values and derivatives of the Whitney extension at a set of points."""

    points: np.ndarray
    derivatives: dict
    on_E: np.ndarray
    covered: np.ndarray
    grid: Grid | None = None

    @property
    def values(self) -> np.ndarray:
        return self.derivatives[next(iter(self.derivatives))]

    def field(self, beta=None) -> ScalarField:
        """Grid field of ``D^beta F``; uncovered nodes (collar, outside the box) are set to 0."""
        if self.grid is None:
            raise ValueError("extension was not evaluated on a grid")
        beta = next(iter(self.derivatives)) if beta is None else tuple(beta)
        v = np.where(self.covered | self.on_E, self.derivatives[beta], 0.0)
        return ScalarField(self.grid, v.reshape(self.grid.shape))


def _anchor_indices(W: WhitneyDecomposition) -> np.ndarray:
    E = W.source_set
    return np.array([E.index_of(nearest_anchor(Q, E)) for Q in W.cubes], dtype=int)


def whitney_extend_jet(J: JetField, W: WhitneyDecomposition, P: PartitionOfUnity | None = None,
                       X=None, order: int = 0) -> WhitneyExtension:
    """``F = sum_Q phi_Q P_{a_Q}`` off ``E`` and ``F = P_x(x)`` on ``E``, with derivatives.

    ``X`` is a :class:`Grid` or an array of points.  Derivatives up to
    ``order`` are computed in closed form: ``F = N / S`` with
    ``N = sum psi_Q P_{a_Q}``, ``S = sum psi_Q``, each differentiated by the
    product rule and combined by the quotient rule.
    """
    if not np.array_equal(J.E.points, W.source_set.points):
        raise ValueError("jet and decomposition live on different sets")
    P = P or PartitionOfUnity(W)
    grid = X if isinstance(X, Grid) else None
    pts = grid.nodes() if grid is not None else _pts(X)
    n = pts.shape[1]
    orders = multi_indices(n, order)
    anchors = _anchor_indices(W)
    dpolys = {(i, b): J.polys[i].derivative(b) for i in set(anchors.tolist()) | set(range(len(J.E)))
              for b in orders}
    N = {b: np.zeros(pts.shape[0]) for b in orders}
    S = {b: np.zeros(pts.shape[0]) for b in orders}
    for blk, ai in zip(P._blocks(pts, order), anchors):
        idx = blk.index
        if idx.size == 0:
            continue
        Xa = pts[idx]
        pd = {b: dpolys[(ai, b)](Xa) for b in orders}
        for a in orders:
            S[a][idx] += blk.psi[a]
            acc = np.zeros(idx.size)
            for b in orders:
                if all(bi <= ai_ for ai_, bi in zip(a, b)):
                    diff = tuple(x - y for x, y in zip(a, b))
                    acc += multi_binomial(a, b) * blk.psi[b] * pd[diff]
            N[a][idx] += acc
    zero = orders[0]
    covered = S[zero] > 0
    F = {b: np.zeros(pts.shape[0]) for b in orders}
    if np.any(covered):
        q = _quotient_derivatives({b: N[b][covered] for b in orders}, {b: S[b][covered] for b in orders}, orders)
        for b in orders:
            F[b][covered] = q[b]
    # points of E: the jet itself
    on_E = np.zeros(pts.shape[0], dtype=bool)
    for i, x in enumerate(J.E.points):
        hit = np.flatnonzero(np.all(pts == x, axis=1))
        for h in hit:
            on_E[h] = True
            for b in orders:
                F[b][h] = dpolys[(i, b)](x)
    covered &= ~on_E
    return WhitneyExtension(pts, F, on_E, covered, grid)


def local_jet_terms(J: JetField, W: WhitneyDecomposition, P: PartitionOfUnity, K: Cube, Y, alpha
                  ) -> tuple[np.ndarray, float]:
    """Left side ``|D^a F(y) - D^a P_{a_K}(y)|`` at points ``Y`` of ``K*`` and the sum

        sum_{Q in T(K)} sum_{|xi| <= m-1} (diam K)**(|xi| - |a|) |D^xi P_{a_Q}(a_K) - D^xi P_{a_K}(a_K)|.
    """
    alpha = tuple(alpha)
    Y = _pts(Y)
    if not all(K.star.contains(y, 1e-12 * K.diam) for y in Y):
        raise ValueError("points must lie in K*")
    ext = whitney_extend_jet(J, W, P, Y, order=sum(alpha))
    E = W.source_set
    aK = nearest_anchor(K, E)
    PK = J.poly_at(aK)
    lhs = np.abs(ext.derivatives[alpha] - PK.derivative(alpha)(Y))
    total = 0.0
    for Q in touching_family(K, W):
        PQ = J.poly_at(nearest_anchor(Q, E))
        for xi in multi_indices(E.dim, J.m - 1):
            diff = abs(PQ.derivative(xi)(aK) - PK.derivative(xi)(aK))
            total += K.diam ** (sum(xi) - sum(alpha)) * diff
    return lhs, total


def local_jet_constant(alpha, m: int, bump_constants: dict[int, float], anchor_reach: float = 5.0625) -> float:
    """Explicit constant for :func:`local_jet_terms` assembled from the bump constants.

    Uses ``|D^b phi_Q| <= C_|b| (diam Q)**-|b|``, ``diam Q >= diam K / 4`` for
    touching cubes and ``||y - a_K|| <= anchor_reach * diam K`` for ``y`` in ``K*``.
    """
    alpha = tuple(alpha)
    n = len(alpha)
    taylor = sum(anchor_reach ** sum(g) / multi_factorial(g) for g in multi_indices(n, m - 1))
    total = 0.0
    for b in multi_indices(n, sum(alpha)):
        if all(bi <= ai for ai, bi in zip(alpha, b)):
            k = sum(alpha) - sum(b)
            total += multi_binomial(alpha, b) * bump_constants[k] * 4.0**k
    return total * taylor


def taylor_remainder_check(F, d: Callable, m: int, beta, x, y) -> float:
    """``|D^b F(x) - D^b T^m_y[F](x)| / (||x - y||**(m - |b|) d(x, y))``; 0 when ``x = y``."""
    beta = tuple(beta)
    if sum(beta) > m:
        raise ValueError("need |beta| <= m")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    r = float(np.max(np.abs(x - y)))
    if r == 0:
        return 0.0
    T = taylor_poly(F, y, m)
    if isinstance(F, Polynomial):
        fx = F.derivative(beta)(x)
    else:
        fx = float(F.derivative(beta, x[None, :])[0])
    lhs = abs(fx - T.derivative(beta)(x))
    den = r ** (m - sum(beta)) * d(x, y)
    return lhs / den if den > 0 else (0.0 if lhs == 0 else math.inf)
