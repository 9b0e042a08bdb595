"""Maximal functions, cube averages and A1 weights on grids.

Two candidate cube families are used throughout the package:

* the *dyadic ladder*: cubes centered at nodes with half-sides
  ``spacing * 2**j``, ``j >= -1`` (the ``j = -1`` cube is a single cell);
* the *node family*: cubes centered at nodes with half-side ``k * spacing``
  for every integer ``k >= 1``.  Once a cube contains the whole grid box its
  average (of the edge-replicated field) is a polynomial in ``1 / r``, so the
  infinitely many large radii are handled in closed form as a continuous tail
  ``r >= kmax * spacing``.

The node family is closed under dilation by integer factors, which is what
makes the cube-inclusion arguments behind the chain and monotonicity
inequalities exactly checkable on the grid.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage

from .fields import CubeIntegrator, ScalarField, WeightField, box_covering_steps, dyadic_radii
from .geometry import Cube, Grid

__all__ = [
    "A1Report",
    "NodeCubeFamily",
    "cube_average",
    "cube_essinf",
    "hl_maximal",
    "a1_norm",
    "monotone_cube_bound_check",
    "coifman_rochberg",
]


@dataclass(frozen=True)
class A1Report:
    """Result of :func:`a1_norm`.

    ``finite`` is False when some candidate cube has a zero minimum while its
    average is positive ("not A1 at resolution").
    """

    norm_estimate: float
    worst_cube: Cube
    cube_count: int
    finite: bool = True
    family: str = "dyadic"


def _check_meets_box(grid: Grid, Q: Cube) -> None:
    if np.any(Q.upper < grid.lower) or np.any(Q.lower > grid.upper):
        raise ValueError("empty cube sample")


def cube_average(f: ScalarField, Q: Cube) -> float:
    """Average of ``f`` over ``Q`` (piecewise constant, edge replicated)."""
    _check_meets_box(f.grid, Q)
    return CubeIntegrator(f.grid, f.values).average(Q)


def cube_essinf(w: ScalarField, Q: Cube) -> float:
    """Essential infimum over ``Q``: minimum over the cells meeting its interior."""
    _check_meets_box(w.grid, Q)
    g = w.grid
    u_lo = (Q.lower - np.asarray(g.origin)) / g.spacing
    u_hi = (Q.upper - np.asarray(g.origin)) / g.spacing
    # cell i meets the open cube iff u_lo - 1/2 < i < u_hi + 1/2
    lo = np.floor(u_lo - 0.5 + 1e-9).astype(int) + 1
    hi = np.ceil(u_hi + 0.5 - 1e-9).astype(int) - 1
    ext = np.asarray(g.extents)
    lo = np.clip(lo, 0, ext - 1)
    hi = np.clip(hi, 0, ext - 1)
    sl = tuple(slice(a, b + 1) for a, b in zip(lo, hi))
    return float(w.values[sl].min())


def _window(k: int, dim: int) -> tuple[int, ...]:
    return (2 * k + 1,) * dim


def hl_maximal(g: ScalarField) -> ScalarField:
    """Hardy-Littlewood maximal function over the dyadic ladder.

    At each node ``x`` this is the largest average of ``|g|`` over ladder cubes
    centered at a node and containing ``x``.
    """
    grid = g.grid
    a = np.abs(g.values)
    integ = CubeIntegrator(grid, a)
    out = a.copy()  # the j = -1 cube is the cell itself
    for r in dyadic_radii(grid)[1:]:
        k = int(round(r / grid.spacing))
        avg = integ.node_averages(k)
        out = np.maximum(out, ndimage.maximum_filter(avg, size=_window(k, grid.dim), mode="nearest"))
    return ScalarField(grid, out)


def _ratio(avg: np.ndarray, mn: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(mn > 0, avg / np.where(mn > 0, mn, 1.0), np.where(avg > 0, np.inf, 1.0))
    # an average is never below the minimum; clamp away rounding noise
    return np.maximum(r, 1.0)


class NodeCubeFamily:
    """Averages and minima of a field over all node-centered cubes ``Q(c, k s)``.

    ``avg[c, k - 1]`` holds the average over ``Q(node c, k * spacing)`` for
    ``k = 1 .. kmax - 1``; radii ``r >= kmax * spacing`` form the continuous
    tail whose supremum per center is ``tail_sup``.
    """

    def __init__(self, field: ScalarField):
        self.field = field
        self.grid = field.grid
        self.kmax = box_covering_steps(self.grid)
        self._integ = CubeIntegrator(self.grid, field.values)

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes()

    @cached_property
    def avg(self) -> np.ndarray:
        cols = [self._integ.node_averages(k).ravel() for k in range(1, self.kmax)]
        if not cols:
            return np.zeros((self.grid.size, 0))
        return np.stack(cols, axis=1)

    @cached_property
    def minima(self) -> np.ndarray:
        v = self.field.values
        cols = [
            ndimage.minimum_filter(v, size=_window(k, self.grid.dim), mode="nearest").ravel()
            for k in range(1, self.kmax)
        ]
        if not cols:
            return np.zeros((self.grid.size, 0))
        return np.stack(cols, axis=1)

    def tail_polynomial(self) -> np.ndarray:
        """Coefficients ``a[c, j]`` with ``int_{Q(c, r)} f = sum_j a[c, j] r**j`` in the tail.

        Along each axis the edge-replicated field over ``[c - r, c + r]``
        (which contains the box) splits into the left ray, the box and the
        right ray; the ray lengths are affine in ``r``.
        """
        g = self.grid
        v = self.field.values
        s = g.spacing
        n = g.dim
        lo, hi = g.lower, g.upper
        # per axis: choice 0 = all cells weighted s, 1 = first cell, 2 = last cell
        per_axis = []
        for ax in range(n):
            N = g.extents[ax]
            mid = np.full(N, s)
            first = np.zeros(N)
            first[0] = 1.0
            last = np.zeros(N)
            last[-1] = 1.0
            per_axis.append((mid, first, last))
        c = self.nodes
        m = c.shape[0]
        coeffs = np.zeros((m, n + 1))
        for choice in itertools.product(range(3), repeat=n):
            t = v
            for ax in reversed(range(n)):
                t = t @ per_axis[ax][choice[ax]]
            poly = np.zeros((m, n + 1))
            poly[:, 0] = float(t)
            for ax, ch in enumerate(choice):
                if ch == 0:
                    continue  # constant factor already folded into t
                const = (lo[ax] - c[:, ax]) if ch == 1 else (c[:, ax] - hi[ax])
                new = np.zeros_like(poly)
                new[:, :-1] += poly[:, :-1] * const[:, None]
                new[:, 1:] += poly[:, :-1]
                poly = new
            coeffs += poly
        return coeffs

    @cached_property
    def tail_sup(self) -> np.ndarray:
        """Supremum of the average over ``r >= kmax * spacing`` for each center."""
        a = self.tail_polynomial()
        n = self.grid.dim
        u0 = 1.0 / (self.kmax * self.grid.spacing)
        # average = sum_j a_j u**(n - j) / 2**n, a polynomial in u = 1/r
        b = a[:, ::-1] / 2.0**n  # b[:, i] multiplies u**i
        cand = [b[:, 0].copy(), np.polynomial.polynomial.polyval(u0, b.T)]
        if n == 2:
            with np.errstate(divide="ignore", invalid="ignore"):
                us = -b[:, 1] / (2.0 * b[:, 2])
            ok = (b[:, 2] != 0) & (us > 0) & (us < u0)
            us = np.where(ok, us, 0.0)
            val = b[:, 0] + b[:, 1] * us + b[:, 2] * us**2
            cand.append(np.where(ok, val, -np.inf))
        elif n > 2:
            extra = np.full(b.shape[0], -np.inf)
            for i in range(b.shape[0]):
                d = np.polynomial.polynomial.polyder(b[i])
                for root in np.roots(d[::-1]) if np.any(d) else []:
                    if abs(root.imag) < 1e-14 and 0 < root.real < u0:
                        extra[i] = max(extra[i], np.polynomial.polynomial.polyval(root.real, b[i]))
            cand.append(extra)
        return np.max(np.stack(cand), axis=0)

    @cached_property
    def suffix_max(self) -> np.ndarray:
        """``S[c, k - 1] = sup`` of averages over radii ``>= k * spacing`` (``k = 1..kmax``)."""
        table = np.concatenate([self.avg, self.tail_sup[:, None]], axis=1)
        return np.maximum.accumulate(table[:, ::-1], axis=1)[:, ::-1]

    def sup_average_containing(self, x, y) -> np.ndarray:
        """Largest family average over cubes containing both nodes, for each pair.

        ``x``, ``y`` are ``(m, n)`` arrays of grid nodes.
        """
        g = self.grid
        ix = np.rint((np.atleast_2d(x) - np.asarray(g.origin)) / g.spacing).astype(int)
        iy = np.rint((np.atleast_2d(y) - np.asarray(g.origin)) / g.spacing).astype(int)
        cidx = np.rint((self.nodes - np.asarray(g.origin)) / g.spacing).astype(int)
        out = np.empty(ix.shape[0])
        for i in range(ix.shape[0]):
            k = np.maximum(np.abs(cidx - ix[i]).max(axis=1), np.abs(cidx - iy[i]).max(axis=1))
            k = np.clip(k, 1, self.kmax)
            out[i] = self.suffix_max[np.arange(k.size), k - 1].max()
        return out

    def a1(self) -> A1Report:
        """A1 constant over the whole node family, tail included."""
        g = self.grid
        ratios = _ratio(self.avg, self.minima) if self.kmax > 1 else np.ones((g.size, 0))
        tail = _ratio(self.tail_sup, np.full(g.size, self.field.values.min()))
        best_tail = int(np.argmax(tail))
        count = ratios.size + g.size
        if ratios.size and ratios.max() >= tail[best_tail]:
            c, k = np.unravel_index(int(np.argmax(ratios)), ratios.shape)
            cube = Cube(self.nodes[c], (k + 1) * g.spacing)
            val = float(ratios[c, k])
        else:
            cube = Cube(self.nodes[best_tail], self.kmax * g.spacing)
            val = float(tail[best_tail])
        return A1Report(val, cube, count, bool(np.isfinite(val)), "node")


def a1_norm(w: ScalarField, family: str = "dyadic") -> A1Report:
    """Estimate ``||w||_{A1}`` as the largest ``average / minimum`` over a cube family.

    ``family`` is ``"dyadic"`` (node centers, half-sides ``spacing * 2**j``) or
    ``"node"`` (node centers, every integer multiple of the spacing, plus the
    unbounded tail).
    """
    WeightField(w.grid, w.values)  # validates nonnegativity
    if family == "node":
        return NodeCubeFamily(w).a1()
    if family != "dyadic":
        raise ValueError(f"unknown cube family {family!r}")
    grid = w.grid
    v = w.values
    integ = CubeIntegrator(grid, v)
    best, best_cube, count = 1.0, Cube(grid.nodes()[0], grid.spacing / 2), 0
    for r in dyadic_radii(grid)[1:]:
        k = int(round(r / grid.spacing))
        avg = integ.node_averages(k)
        mn = ndimage.minimum_filter(v, size=_window(k, grid.dim), mode="nearest")
        ratio = _ratio(avg, mn)
        count += ratio.size
        i = int(np.argmax(ratio))
        if ratio.flat[i] > best:
            best = float(ratio.flat[i])
            best_cube = Cube(grid.nodes()[i], r)
    count += grid.size  # single cells have ratio exactly 1
    return A1Report(best, best_cube, count, bool(np.isfinite(best)), "dyadic")


def monotone_cube_bound_check(w: ScalarField, Q: Cube, K: Cube, norm: float | None = None,
                              rtol: float = 1e-12) -> bool:
    """Whether ``avg_K w <= ||w||_{A1} avg_Q w`` for ``Q`` inside ``K``."""
    if not K.contains_cube(Q, tol=1e-12 * K.diam):
        raise ValueError("Q is not contained in K")
    if norm is None:
        norm = a1_norm(w).norm_estimate
    integ = CubeIntegrator(w.grid, w.values)
    return bool(integ.average(K) <= norm * integ.average(Q) * (1 + rtol))


def coifman_rochberg(g: ScalarField, theta: float) -> WeightField:
    """The weight ``M[g]**theta`` for ``0 < theta < 1``."""
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    m = hl_maximal(g)
    return WeightField(g.grid, m.values**theta)
