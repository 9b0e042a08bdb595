"""Trace functionals: sharp maximal functions on finite sets and their L_p norms.

For a function ``f`` on a finite set ``E`` the sharp maximal function is

    f#(x) = max_{y, z in E} |f(y) - f(z)| / (||x - y|| + ||x - z||),

and its ``L_p`` norm is equivalent to the trace norm of ``f`` in the
homogeneous Sobolev space ``L^1_p`` when ``p > n``.  The jet version sums, over
multi-indices ``|b| <= m - 1``, the analogous maxima of
``|D^b P_y(y) - D^b P_z(y)| / (||x - y||**(m-|b|) + ||x - z||**(m-|b|))``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fields import ScalarField
from .geometry import Cube, Grid, PointSet
from .polynomials import multi_indices

__all__ = [
    "TraceReport",
    "DividedDifferenceTable",
    "sharp_max_function",
    "sharp_field",
    "tail_bound",
    "trace_norm_L1p",
    "jet_sharp_max",
    "jet_sharp_terms",
    "jet_trace_norm",
    "variational_sum",
    "search_variational_sum",
    "brudnyi_sum",
    "search_brudnyi_sum",
    "divided_difference",
    "divided_difference_symmetric",
    "trace_1d_linf",
    "trace_1d_lp",
]


def _pts(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a[None]
    return np.atleast_2d(a)


@dataclass(frozen=True)
class TraceReport:
    """Sharp field on a grid and the ``L_p`` norm of that field over the grid box.

    ``tail_bound`` bounds the ``p``-th power of the norm outside the box, so the
    full-space value lies in ``[value, (value**p + tail_bound)**(1/p)]``.
    """

    sharp_field: ScalarField
    functional_value: float
    p: float
    truncation_box: Cube
    tail_bound: float
    extras: dict = field(default_factory=dict)

    def recompute(self) -> float:
        return self.sharp_field.lp_norm(self.p)

    def summary(self, functional: str, corpus_id: str = "", seed: int | None = None) -> dict:
        return {"functional": functional, "value": self.functional_value, "tail_bound": self.tail_bound,
                "corpus_id": corpus_id, "seed": seed}

    def to_csv(self, path) -> None:
        self.sharp_field.to_csv(path)

    def write_summary(self, path, functional: str, corpus_id: str = "", seed: int | None = None) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(functional, corpus_id, seed), fh, indent=2)


# -- sharp maximal functions ------------------------------------------------------------

def sharp_field(f, E: PointSet, X) -> np.ndarray:
    """``f#`` at every row of ``X`` (exact maximum over the pairs of ``E``)."""
    f = np.asarray(f, dtype=float).ravel()
    if f.size != len(E):
        raise ValueError("need one value per point of E")
    X = _pts(X)
    D = np.max(np.abs(X[:, None, :] - E.points[None, :, :]), axis=2)  # (k, |E|)
    out = np.zeros(X.shape[0])
    for i, j in itertools.combinations(range(len(E)), 2):
        num = abs(f[i] - f[j])
        if num > 0:
            out = np.maximum(out, num / (D[:, i] + D[:, j]))
    return out


def sharp_max_function(f, E: PointSet, x) -> float:
    return float(sharp_field(f, E, _pts(x))[0])


def _grid_box(grid: Grid) -> Cube:
    lo, hi = grid.lower, grid.upper
    c = (lo + hi) / 2
    return Cube(c, float(np.max(hi - lo)) / 2)


def tail_bound(scale: float, order: float, p: float, E: PointSet, grid: Grid) -> float:
    """Bound on ``int_{outside box} g**p`` for ``g(x) <= scale / (2 dist(x, E)**order)``.

    Uses ``dist(x, E) >= ||x - c|| - R`` with ``E`` inside ``Q(c, R)`` and
    integrates over the uniform-norm shells beyond the largest ``Q(c, B)``
    inside the grid box.  Requires ``order * p > n``; returns ``inf`` if the
    box does not reach beyond ``E``.
    """
    if scale == 0:
        return 0.0
    n = grid.dim
    lo_E, hi_E = E.points.min(axis=0), E.points.max(axis=0)
    c = (lo_E + hi_E) / 2
    R = float(np.max(hi_E - lo_E)) / 2
    B = float(min(np.min(c - grid.lower), np.min(grid.upper - c)))
    a = order * p
    if B <= R or a <= n:
        return math.inf
    total = 0.0
    for j in range(n):
        total += math.comb(n - 1, j) * R ** (n - 1 - j) * (B - R) ** (j + 1 - a) / (a - 1 - j)
    return float((scale / 2.0) ** p * 2 * n * 2 ** (n - 1) * total)


def trace_norm_L1p(f, E: PointSet, p: float, grid: Grid) -> TraceReport:
    """``I_p(f; E)``: midpoint-rule ``L_p`` norm of ``f#`` over the grid box, plus a tail bound."""
    n = grid.dim
    if p <= n:
        raise ValueError("need p > n")
    vals = sharp_field(f, E, grid.nodes())
    sf = ScalarField(grid, vals.reshape(grid.shape))
    f = np.asarray(f, dtype=float)
    osc = float(f.max() - f.min())
    return TraceReport(sf, sf.lp_norm(p), p, _grid_box(grid), tail_bound(osc, 1, p, E, grid))


def _jet_numerators(J, beta) -> np.ndarray:
    """``|D^b P_y(y) - D^b P_z(y)|`` for all ordered pairs ``(y, z)``."""
    k = len(J.E)
    out = np.zeros((k, k))
    ders = [P.derivative(beta) for P in J.polys]
    for i, y in enumerate(J.E.points):
        own = ders[i](y)
        for j in range(k):
            if j != i:
                out[i, j] = abs(own - ders[j](y))
    return out


def jet_sharp_terms(J, X) -> dict:
    """Per-multi-index terms of the jet sharp function at the rows of ``X``."""
    X = _pts(X)
    E = J.E
    D = np.max(np.abs(X[:, None, :] - E.points[None, :, :]), axis=2)
    terms = {}
    for beta in multi_indices(E.dim, J.m - 1):
        num = _jet_numerators(J, beta)
        e = J.m - sum(beta)
        De = D**e
        out = np.zeros(X.shape[0])
        for i, j in zip(*np.nonzero(num)):
            with np.errstate(divide="ignore"):
                out = np.maximum(out, num[i, j] / (De[:, i] + De[:, j]))
        terms[beta] = out
    return terms


def jet_sharp_max(J, x) -> float:
    """``J#(x)``: the sum over ``|b| <= m - 1`` of the exact pair maxima."""
    return float(sum(t[0] for t in jet_sharp_terms(J, _pts(x)).values()))


def jet_trace_norm(J, p: float, grid: Grid) -> TraceReport:
    """``L_p`` norm of ``J#`` over the grid box.

    ``extras`` holds the per-multi-index norms and their sum (norms summed
    over ``b`` rather than integrands); by Minkowski
    ``||J#|| <= sum_b ||g_b|| <= #b * ||J#||``.
    """
    n = grid.dim
    if p <= n:
        raise ValueError("need p > n")
    terms = jet_sharp_terms(J, grid.nodes())
    total = sum(terms.values())
    sf = ScalarField(grid, total.reshape(grid.shape))
    per = {b: float((np.sum(t**p) * grid.cell_volume) ** (1 / p)) for b, t in terms.items()}
    tails = []
    for beta in terms:
        num = _jet_numerators(J, beta).max()
        order = J.m - sum(beta)
        tails.append(tail_bound(num, order, p, J.E, grid) if order * p > n else math.inf)
    nb = len(terms)
    tb = nb ** (p - 1) * sum(tails)
    extras = {"per_beta": {str(b): v for b, v in per.items()}, "idf_sum": float(sum(per.values())),
              "beta_count": nb}
    return TraceReport(sf, sf.lp_norm(p), p, _grid_box(grid), float(tb), extras)


# -- variational criteria --------------------------------------------------------------

def _check_disjoint(cubes: Sequence[Cube]) -> None:
    for a, b in itertools.combinations(cubes, 2):
        if a.interiors_overlap(b):
            raise ValueError("cubes overlap")


def variational_sum(J, cubes: Sequence[Cube], pairs, beta, p: float, gamma: float = 1e4) -> float:
    """``sum_i |D^b P_{x_i}(x_i) - D^b P_{y_i}(x_i)|**p / (diam Q_i)**((m - |b|) p - n)``.

    Cubes must have disjoint interiors and both points of each pair must lie in
    ``gamma Q_i`` and in ``E``.
    """
    beta = tuple(beta)
    if sum(beta) > J.m - 1:
        raise ValueError("need |beta| <= m - 1")
    _check_disjoint(cubes)
    n = J.E.dim
    expo = (J.m - sum(beta)) * p - n
    total = 0.0
    for Q, (x, y) in zip(cubes, pairs):
        big = Q.dilate(gamma)
        if not (big.contains(x, 1e-12 * big.diam) and big.contains(y, 1e-12 * big.diam)):
            raise ValueError("pair outside gamma Q")
        Px, Py = J.poly_at(x), J.poly_at(y)
        diff = abs(Px.derivative(beta)(np.atleast_1d(x)) - Py.derivative(beta)(np.atleast_1d(x)))
        total += diff**p / Q.diam**expo
    return float(total)


def search_variational_sum(J, beta, p: float, rng: np.random.Generator, trials: int = 200,
                           gamma: float = 1e4, shrink: float = 1.0) -> float:
    """Randomized lower bound for the supremum of :func:`variational_sum` over packings.

    Each trial picks random pairs of ``E`` and, for each, the cube centered at
    the pair midpoint of half-side ``shrink * ||x - y|| / (2 gamma)`` scaled up
    by a random factor; overlapping cubes are dropped.
    """
    pts = J.E.points
    pairs = [(pts[i], pts[j]) for i, j in itertools.permutations(range(len(pts)), 2)]
    best = 0.0
    for _ in range(trials):
        k = int(rng.integers(1, len(pairs) + 1))
        chosen = rng.choice(len(pairs), size=k, replace=False)
        cubes, used = [], []
        for c in chosen:
            x, y = pairs[c]
            r = shrink * np.max(np.abs(x - y)) / (2 * gamma) * float(rng.uniform(1.0, 4.0))
            Q = Cube((x + y) / 2, r)
            if all(not Q.interiors_overlap(other) for other in cubes):
                cubes.append(Q)
                used.append((x, y))
        best = max(best, variational_sum(J, cubes, used, beta, p, gamma))
    return best


def brudnyi_sum(G, cubes: Sequence[Cube], pairs, p: float) -> float:
    """``sum_i |G(x_i) - G(y_i)|**p / (diam Q_i)**(p - n)`` over equal non-overlapping cubes."""
    if not cubes:
        return 0.0
    sides = {round(Q.half_side, 12) for Q in cubes}
    if len(sides) > 1:
        raise ValueError("cubes must be equal")
    _check_disjoint(cubes)
    n = cubes[0].dim
    ev = G.at if isinstance(G, ScalarField) else (lambda z: float(np.asarray(G(np.atleast_1d(z)[None, :])).ravel()[0]))
    total = 0.0
    for Q, (x, y) in zip(cubes, pairs):
        if not (Q.contains(x, 1e-12 * Q.diam) and Q.contains(y, 1e-12 * Q.diam)):
            raise ValueError("pair outside its cube")
        total += abs(ev(x) - ev(y)) ** p / Q.diam ** (p - n)
    return float(total)


def search_brudnyi_sum(G: ScalarField, p: float, rng: np.random.Generator, trials: int = 50) -> float:
    """Randomized lower bound for the supremum of :func:`brudnyi_sum` on a grid field.

    Each trial tiles the grid by equal node-aligned blocks of a random size
    with a random offset; within each block the pair is the argmax/argmin node.
    """
    g = G.grid
    v = G.values
    best = 0.0
    nodes_axis = [g.axis(i) for i in range(g.dim)]
    for _ in range(trials):
        size = int(rng.integers(1, max(2, min(g.extents) // 2)))
        off = [int(rng.integers(0, size + 1)) for _ in range(g.dim)]
        total = 0.0
        for start in itertools.product(*[range(o, e - size, size + 1) for o, e in zip(off, g.extents)]):
            sl = tuple(slice(s, s + size + 1) for s in start)
            blk = v[sl]
            if blk.size < 2:
                continue
            total += (blk.max() - blk.min()) ** p / (size * g.spacing) ** (p - g.dim)
        best = max(best, total)
    return float(best)


# -- one-dimensional functionals -------------------------------------------------------------

def _values(f, S):
    S = np.asarray(S, dtype=float)
    return np.asarray(f(S), dtype=float) if callable(f) else np.asarray(f, dtype=float)


def divided_difference(f, S) -> float:
    """``Delta^m f[S]`` by the Newton recurrence; ``f`` is a callable or the values on ``S``."""
    S = np.asarray(S, dtype=float).ravel()
    if len(set(S.tolist())) != S.size:
        raise ValueError("points must be distinct")
    v = _values(f, S).ravel().copy()
    m = S.size - 1
    for k in range(1, m + 1):
        v[: m - k + 1] = (v[1: m - k + 2] - v[: m - k + 1]) / (S[k:] - S[: m - k + 1])
    return float(v[0])


def divided_difference_symmetric(f, S) -> float:
    """``sum_i f(x_i) / omega_S'(x_i)`` with ``omega_S(x) = prod (x - x_i)``."""
    S = np.asarray(S, dtype=float).ravel()
    if len(set(S.tolist())) != S.size:
        raise ValueError("points must be distinct")
    v = _values(f, S).ravel()
    return math.fsum(v[i] / np.prod(S[i] - np.delete(S, i)) for i in range(S.size))


@dataclass(frozen=True)
class DividedDifferenceTable:
    """Divided differences of ``f`` over consecutive windows of sorted ``E``.

    ``table[k][i] = Delta^k f[x_i, ..., x_{i+k}]``.
    """

    E: np.ndarray
    values: np.ndarray
    m: int
    table: tuple

    @classmethod
    def build(cls, E, f, m: int) -> "DividedDifferenceTable":
        E = np.asarray(E, dtype=float).ravel()
        order = np.argsort(E)
        E = E[order]
        vals = _values(f, E).ravel() if callable(f) else np.asarray(f, dtype=float).ravel()[order]
        rows = [vals.copy()]
        for k in range(1, m + 1):
            prev = rows[-1]
            rows.append((prev[1:] - prev[:-1]) / (E[k:] - E[:-k]))
        return cls(E, vals, m, tuple(rows))

    def subset(self, idx) -> float:
        idx = sorted(idx)
        return divided_difference(self.values[idx], self.E[idx])


def _subsets(n_pts: int, size: int, limit: int = 200_000):
    if math.comb(n_pts, size) > limit:
        return None
    return itertools.combinations(range(n_pts), size)


def trace_1d_linf(f, E, m: int, rng: np.random.Generator | None = None, samples: int = 20000,
                  return_details: bool = False):
    """``max |Delta^m f[S]|`` over ``(m+1)``-subsets ``S`` of ``E``.

    Exhaustive for ``|E| <= 25``; above that, the consecutive-window maximum
    and a random search are both computed and the larger is returned.
    """
    E = np.asarray(E, dtype=float).ravel()
    if E.size <= m:
        raise ValueError("need more than m points")
    tab = DividedDifferenceTable.build(E, f, m)
    windows = float(np.max(np.abs(tab.table[m])))
    if E.size <= 25:
        best = max(abs(tab.subset(s)) for s in itertools.combinations(range(E.size), m + 1))
        details = {"exhaustive": best, "windows": windows}
    else:
        rng = rng or np.random.default_rng(0)
        rand = 0.0
        for _ in range(samples):
            s = rng.choice(E.size, size=m + 1, replace=False)
            rand = max(rand, abs(tab.subset(s)))
        best = max(windows, rand)
        details = {"random": rand, "windows": windows}
    return (best, details) if return_details else best


def trace_1d_lp(f, E, m: int, p: float, grid: Grid) -> tuple[float, float]:
    """Both one-dimensional ``L_p`` trace functionals, integrated over the grid box.

    First: ``sup_S (|Delta^m f[S]| diam S / diam({x} U S))**p``.
    Second: ``sup |Delta^{m-1} f[x_0..x_{m-1}] - Delta^{m-1} f[x_1..x_m]|**p / (|x-x_0|**p + |x-x_m|**p)``.
    Returns the two ``p``-th roots.
    """
    if p <= 1:
        raise ValueError("need p > 1")
    if grid.dim != 1:
        raise ValueError("one-dimensional functional")
    E = np.asarray(E, dtype=float).ravel()
    if E.size <= m:
        raise ValueError("need more than m points")
    tab = DividedDifferenceTable.build(E, f, m)
    x = grid.axis(0)
    A = np.zeros_like(x)
    B = np.zeros_like(x)
    for s in itertools.combinations(range(E.size), m + 1):
        s = list(s)
        S = tab.E[s]
        dm = abs(divided_difference(tab.values[s], S))
        if dm == 0:
            continue
        x0, xm = S[0], S[-1]
        diam_all = np.maximum(xm, x) - np.minimum(x0, x)
        A = np.maximum(A, (dm * (xm - x0) / diam_all) ** p)
        d0 = divided_difference(tab.values[s[:-1]], S[:-1]) if m >= 1 else 0.0
        d1 = divided_difference(tab.values[s[1:]], S[1:])
        with np.errstate(divide="ignore", invalid="ignore"):
            B = np.maximum(B, np.abs(d0 - d1) ** p / (np.abs(x - x0) ** p + np.abs(x - xm) ** p))
    h = grid.spacing
    return float((A.sum() * h) ** (1 / p)), float((B.sum() * h) ** (1 / p))
