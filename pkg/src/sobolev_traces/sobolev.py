"""Discrete derivatives, Sobolev seminorms and Sobolev-Poincare type estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .fields import CubeIntegrator, ScalarField, WeightField, dyadic_radii
from .geometry import Cube, Grid
from .maximal import hl_maximal
from .polynomials import AnalyticFunction, multi_indices

__all__ = [
    "STENCILS",
    "SeminormReport",
    "interior_grid",
    "discrete_derivatives",
    "gradient_norm_field",
    "sobolev_seminorm",
    "analytic_seminorm",
    "sobolev_poincare_check",
    "sp_ratio_field",
    "jet_poincare_check",
    "calderon_sharp",
    "necessity_weight",
]

# central difference stencils (offsets -2..2); each is exact on polynomials of degree <= k + 1
STENCILS = {
    0: np.array([0.0, 0.0, 1.0, 0.0, 0.0]),
    1: np.array([0.0, -0.5, 0.0, 0.5, 0.0]),
    2: np.array([0.0, 1.0, -2.0, 1.0, 0.0]),
    3: np.array([-0.5, 1.0, 0.0, -1.0, 0.5]),
    4: np.array([1.0, -4.0, 6.0, -4.0, 1.0]),
}


def _margin(m: int) -> int:
    return max(1, (m + 1) // 2)


def interior_grid(grid: Grid, margin: int) -> Grid:
    ext = tuple(e - 2 * margin for e in grid.extents)
    if min(ext) < 1:
        raise ValueError("grid too small for the requested derivative order")
    return Grid(tuple(o + margin * grid.spacing for o in grid.origin), grid.spacing, ext)


def _apply_stencil(values: np.ndarray, alpha, spacing: float, margin: int) -> np.ndarray:
    out = values
    for ax, k in enumerate(alpha):
        st = STENCILS[k]
        n = out.shape[ax]
        # pad by 2 on the axis so every stencil fits, then trim to the margin afterwards
        pad = [(0, 0)] * out.ndim
        pad[ax] = (2, 2)
        padded = np.pad(out, pad, mode="edge")
        acc = np.zeros_like(out)
        for j, c in enumerate(st):
            if c:
                sl = [slice(None)] * out.ndim
                sl[ax] = slice(j, j + n)
                acc = acc + c * padded[tuple(sl)]
        out = acc / spacing**k
    trim = tuple(slice(margin, s - margin) for s in out.shape)
    return out[trim]


def discrete_derivatives(F: ScalarField, m: int) -> dict[tuple[int, ...], ScalarField]:
    """Central differences ``D^alpha F`` for every ``|alpha| = m`` at interior nodes.

    All fields share the interior grid obtained by trimming ``max(1, ceil(m/2))``
    nodes from each side, where every stencil is fully inside the grid.
    """
    if m < 0 or m > 4:
        raise ValueError("derivative order must be between 0 and 4")
    if min(F.grid.extents) < 2 * m + 1:
        raise ValueError("grid too small for the requested derivative order")
    margin = _margin(m)
    sub = interior_grid(F.grid, margin)
    return {a: ScalarField(sub, _apply_stencil(F.values, a, F.grid.spacing, margin))
            for a in multi_indices(F.grid.dim, m, exact=True)}


def gradient_norm_field(F: ScalarField, m: int = 1) -> ScalarField:
    """``(sum_{|alpha| = m} (D^alpha F)**2) ** 0.5`` at interior nodes."""
    ders = discrete_derivatives(F, m)
    first = next(iter(ders.values()))
    val = np.sqrt(sum(d.values**2 for d in ders.values()))
    return ScalarField(first.grid, val)


@dataclass(frozen=True)
class SeminormReport:
    m: int
    p: float
    gradient_field: ScalarField
    seminorm: float
    boundary_policy: str

    def to_json(self) -> dict:
        return {"m": self.m, "p": self.p, "seminorm": self.seminorm,
                "boundary_policy": self.boundary_policy}


def sobolev_seminorm(F: ScalarField, m: int, p: float) -> SeminormReport:
    """Midpoint-rule ``L_p`` norm of ``|nabla^m F|`` over the interior nodes."""
    if not 1 <= p < math.inf or m < 1:
        raise ValueError("need m >= 1 and 1 <= p < inf")
    g = gradient_norm_field(F, m)
    return SeminormReport(m, p, g, g.lp_norm(p), f"interior nodes, margin {_margin(m)}")


def analytic_seminorm(f: AnalyticFunction, grid: Grid, m: int, p: float) -> float:
    """Midpoint-rule ``L_p`` norm of the exact ``|nabla^m f|`` sampled at all grid nodes."""
    X = grid.nodes()
    val = np.sqrt(sum(f.derivative(a, X) ** 2 for a in multi_indices(grid.dim, m, exact=True)))
    return float((np.sum(val**p) * grid.cell_volume) ** (1.0 / p))


def _sp_denominator(grad: ScalarField, q: float, Q: Cube) -> float:
    integ = CubeIntegrator(grad.grid, grad.values**q)
    return Q.diam * max(integ.average(Q), 0.0) ** (1.0 / q)


def sobolev_poincare_check(F: ScalarField, q: float, Q: Cube, x, y) -> float:
    """``|F(x) - F(y)| / (diam Q (avg_Q |grad F|**q)**(1/q))`` for nodes ``x, y`` in ``Q``.

    Returns 0 for 0/0 and ``inf`` when only the denominator vanishes.
    """
    if not (Q.contains(x, 1e-12) and Q.contains(y, 1e-12)):
        raise ValueError("x and y must lie in Q")
    num = abs(F.at(x) - F.at(y))
    den = _sp_denominator(gradient_norm_field(F, 1), q, Q)
    if den == 0:
        return 0.0 if num == 0 else math.inf
    return num / den


def sp_ratio_field(F: ScalarField, q: float, kmax: int | None = None) -> tuple[float, Cube]:
    """Largest Sobolev-Poincare ratio over the cubes ``Q(c, k spacing)`` centered at interior nodes.

    The oscillation is taken over the nodes of ``F`` inside ``Q`` and the
    gradient average over ``Q`` (edge replicated beyond the interior grid).
    Returns the ratio and the cube attaining it.
    """
    grad = gradient_norm_field(F, 1)
    sub = grad.grid
    margin = int(round((sub.origin[0] - F.grid.origin[0]) / F.grid.spacing))
    integ = CubeIntegrator(sub, grad.values**q)
    kmax = kmax or max(sub.extents)
    v = F.values
    best, best_cube = 0.0, None
    nodes = sub.nodes()
    trim = tuple(slice(margin, e - margin) for e in F.grid.extents)
    for k in range(1, kmax + 1):
        size = (2 * k + 1,) * F.grid.dim
        hi = ndimage.maximum_filter(v, size=size, mode="nearest")[trim]
        lo = ndimage.minimum_filter(v, size=size, mode="nearest")[trim]
        osc = (hi - lo).ravel()
        den = 2 * k * sub.spacing * np.maximum(integ.node_averages(k).ravel(), 0.0) ** (1.0 / q)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(den > 0, osc / den, np.where(osc > 0, np.inf, 0.0))
        i = int(np.argmax(r))
        if r[i] > best:
            best, best_cube = float(r[i]), Cube(nodes[i], k * sub.spacing)
    return best, best_cube


def jet_poincare_check(F: AnalyticFunction, m: int, q: float, beta, x, y, grid: Grid) -> float:
    """``|D^b P_x(x) - D^b P_y(x)| / (||x-y||**(m-|b|) (avg_{Q(x,||x-y||)} |nabla^m F|**q)**(1/q))``

    where ``P_z`` is the degree ``m - 1`` Taylor polynomial of ``F`` at ``z``.
    The average uses the exact ``|nabla^m F|`` sampled on ``grid``.
    """
    beta = tuple(beta)
    if sum(beta) > m - 1:
        raise ValueError("need |beta| <= m - 1")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    r = float(np.max(np.abs(x - y)))
    if r == 0:
        return 0.0
    Px, Py = F.taylor(x, m - 1), F.taylor(y, m - 1)
    num = abs(Px.derivative(beta)(x) - Py.derivative(beta)(x))
    X = grid.nodes()
    val = np.sqrt(sum(F.derivative(a, X) ** 2 for a in multi_indices(grid.dim, m, exact=True)))
    integ = CubeIntegrator(grid, val.reshape(grid.shape) ** q)
    avg = max(integ.average(Cube(x, r)), 0.0)
    den = r ** (m - sum(beta)) * avg ** (1.0 / q)
    if den == 0:
        return 0.0 if num == 0 else math.inf
    return num / den


def _trapezoid_weights(k: int, dim: int) -> np.ndarray:
    w1 = np.ones(2 * k + 1)
    w1[0] = w1[-1] = 0.5
    w = w1
    for _ in range(dim - 1):
        w = np.multiply.outer(w, w1)
    return w


def calderon_sharp(F: ScalarField, max_steps: int | None = None, chunk: int = 2048) -> ScalarField:
    """Sharp maximal function ``max_r (1/r) avg_{Q(x,r)} |F - F_Q|`` over the dyadic ladder.

    Cubes are centered at the node; radii ``k * spacing`` with ``k = 1, 2, 4, ...``
    (capped at ``max_steps``).  A node-centered cube covers half of its
    boundary cells, which gives trapezoid weights.
    """
    g = F.grid
    top = max(g.extents) if max_steps is None else max_steps
    out = np.zeros(g.shape)
    for r in dyadic_radii(g)[1:]:
        k = int(round(r / g.spacing))
        if k > top:
            break
        w = _trapezoid_weights(k, g.dim)
        wsum = w.sum()
        padded = np.pad(F.values, k, mode="edge")
        win = sliding_window_view(padded, w.shape)
        flat_win = win.reshape(-1, *w.shape)
        res = np.empty(flat_win.shape[0])
        axes = tuple(range(1, g.dim + 1))
        for s in range(0, flat_win.shape[0], chunk):
            blk = flat_win[s:s + chunk]
            mean = np.tensordot(blk, w, axes=g.dim) / wsum
            dev = np.abs(blk - mean.reshape((-1,) + (1,) * g.dim))
            res[s:s + chunk] = np.sum(dev * w, axis=axes) / wsum
        out = np.maximum(out, res.reshape(g.shape) / r)
    return ScalarField(g, out)


def necessity_weight(F: ScalarField, p: float, q: float, constant: float = 1.0) -> WeightField:
    """``h = constant * M[|grad F|**sigma]**(1/sigma)`` with ``sigma = (p + q) / 2``.

    Lives on the interior grid of the gradient.  Returned as a nonnegative
    field; an identically zero ``h`` (constant ``F``) is returned as a plain
    :class:`ScalarField`.
    """
    n = F.grid.dim
    if not n < q < p:
        raise ValueError("need n < q < p")
    sigma = (p + q) / 2.0
    grad = gradient_norm_field(F, 1)
    M = hl_maximal(ScalarField(grad.grid, grad.values**sigma))
    h = constant * M.values ** (1.0 / sigma)
    if not np.any(h > 0):
        return ScalarField(grad.grid, h)
    return WeightField(grad.grid, h)
