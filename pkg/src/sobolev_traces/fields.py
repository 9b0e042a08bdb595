"""Grid-sampled fields and exact cube integration.

A field on a :class:`~sobolev_traces.geometry.Grid` is read as the piecewise
constant function that equals the node value on the cell around each node.
Outside the grid box the edge cells are continued outward (edge replication),
so every cube in R^n has a well defined average and no cube is ever clipped.

Cube integrals of that piecewise constant function are computed exactly
through a summed-area table: the primitive ``F(t) = int_{lower}^{t} f`` is
multilinear inside each cell, so it is interpolated (and linearly extrapolated
beyond the box) from the table entries.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Cube, Grid

__all__ = [
    "ScalarField",
    "WeightField",
    "CubeIntegrator",
    "dyadic_radii",
    "linear_radii",
    "box_covering_steps",
]


@dataclass(frozen=True)
class ScalarField:
    """Real samples on the nodes of a grid (``values.shape == grid.shape``)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid, func) -> "ScalarField":
        """Sample ``func`` (taking an ``(k, n)`` array of points) at every node."""
        return cls(grid, np.asarray(func(grid.nodes()), dtype=float).reshape(grid.shape))

    def __mul__(self, c: float) -> "ScalarField":
        return type(self)(self.grid, self.values * c)

    __rmul__ = __mul__

    def abs(self) -> "ScalarField":
        return ScalarField(self.grid, np.abs(self.values))

    def at(self, x) -> float:
        return float(self.values[self.grid.index_of(x)])

    def integrator(self) -> "CubeIntegrator":
        return CubeIntegrator(self.grid, self.values)

    def lp_norm(self, p: float) -> float:
        """Exact ``L_p`` norm of the piecewise constant field over the grid box."""
        return float((np.sum(np.abs(self.values) ** p) * self.grid.cell_volume) ** (1.0 / p))

    # -- I/O -------------------------------------------------------------
    def to_csv(self, path) -> None:
        flat = self.values.ravel()
        with open(path, "w") as fh:
            fh.write("node,value\n")
            for i, v in enumerate(flat):
                fh.write(f"{i},{float(v)!r}\n")

    @classmethod
    def from_csv(cls, path, grid: Grid) -> "ScalarField":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        vals = np.empty(grid.size)
        vals[data[:, 0].astype(int)] = data[:, 1]
        return cls(grid, vals.reshape(grid.shape))

    def save_binary(self, path) -> None:
        """Row-major float64 dump at ``path`` plus ``path + '.json'`` describing the grid."""
        path = Path(path)
        np.ascontiguousarray(self.values, dtype="<f8").tofile(path)
        sidecar = {"grid": self.grid.to_json(), "dtype": "<f8", "order": "C"}
        Path(str(path) + ".json").write_text(json.dumps(sidecar))

    @classmethod
    def load_binary(cls, path) -> "ScalarField":
        meta = json.loads(Path(str(path) + ".json").read_text())
        grid = Grid.from_json(meta["grid"])
        vals = np.fromfile(path, dtype=meta.get("dtype", "<f8")).reshape(grid.shape)
        return cls(grid, vals)


class WeightField(ScalarField):
    """A nonnegative field which is not identically zero."""

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.values < 0):
            raise ValueError("weight has negative values")
        if not np.any(self.values > 0):
            raise ValueError("weight is identically zero")

    def power(self, q: float) -> "WeightField":
        return WeightField(self.grid, self.values**q)


class CubeIntegrator:
    """Exact integrals of a piecewise constant grid field over arbitrary boxes.

    The global minimum is subtracted before building the table and added back
    to averages, which makes averages of a constant field exact and keeps
    cancellation small.
    """

    def __init__(self, grid: Grid, values):
        self.grid = grid
        v = np.asarray(values, dtype=float).reshape(grid.shape)
        self.offset = float(v.min())
        table = (v - self.offset) * grid.cell_volume
        for ax in range(grid.dim):
            table = np.cumsum(table, axis=ax)
        self.table = np.pad(table, [(1, 0)] * grid.dim)
        self._lower = grid.lower
        self._corners = list(itertools.product((0, 1), repeat=grid.dim))

    def _primitive(self, pts: np.ndarray) -> np.ndarray:
        """``int_{box lower}^{pts}`` of the offset field, for ``(k, n)`` points."""
        s = self.grid.spacing
        ks, fs = [], []
        for ax in range(self.grid.dim):
            u = (pts[:, ax] - self._lower[ax]) / s
            k = np.clip(np.floor(u), 0, self.grid.extents[ax] - 1).astype(np.intp)
            ks.append(k)
            fs.append(u - k)
        out = np.zeros(pts.shape[0])
        for bits in self._corners:
            w = np.ones(pts.shape[0])
            idx = []
            for ax, b in enumerate(bits):
                w = w * (fs[ax] if b else 1.0 - fs[ax])
                idx.append(ks[ax] + b)
            out += w * self.table[tuple(idx)]
        return out

    def integrate_boxes(self, lower, upper) -> np.ndarray:
        """Integrals of the (offset) field over boxes ``[lower, upper]``."""
        lower = np.atleast_2d(np.asarray(lower, dtype=float))
        upper = np.atleast_2d(np.asarray(upper, dtype=float))
        total = np.zeros(lower.shape[0])
        for bits in self._corners:
            corner = np.where(np.asarray(bits, dtype=bool), upper, lower)
            sign = (-1) ** (self.grid.dim - sum(bits))
            total += sign * self._primitive(corner)
        return total

    def averages(self, centers, radii) -> np.ndarray:
        """Averages over the cubes ``Q(centers[i], radii[i])``."""
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        radii = np.broadcast_to(np.asarray(radii, dtype=float), (centers.shape[0],))
        r = radii[:, None]
        ints = self.integrate_boxes(centers - r, centers + r)
        return self.offset + ints / (2.0 * radii) ** self.grid.dim

    def average(self, Q: Cube) -> float:
        return float(self.averages(np.asarray(Q.center)[None, :], Q.half_side)[0])

    def integral(self, Q: Cube) -> float:
        return self.average(Q) * Q.volume

    def node_averages(self, k: float) -> np.ndarray:
        """Averages over ``Q(node, k * spacing)`` for every node, shaped like the grid."""
        nodes = self.grid.nodes()
        return self.averages(nodes, k * self.grid.spacing).reshape(self.grid.shape)


def box_covering_steps(grid: Grid) -> int:
    """Smallest ``k`` such that ``Q(node, k * spacing)`` contains the grid box for every node."""
    return int(max(grid.extents))


def dyadic_radii(grid: Grid) -> np.ndarray:
    """Half-sides ``spacing * 2**j`` for ``j = -1, 0, 1, ...`` up to covering the box.

    ``j = -1`` is the cell of the node itself, so maxima over this ladder
    dominate the field value.
    """
    top = box_covering_steps(grid)
    radii = [0.5]
    k = 1
    while True:
        radii.append(float(k))
        if k >= top:
            break
        k *= 2
    return grid.spacing * np.asarray(radii)


def linear_radii(grid: Grid, kmax: int | None = None) -> np.ndarray:
    """Half-sides ``spacing * k`` for ``k = 1 .. kmax`` (default: box covering)."""
    kmax = box_covering_steps(grid) if kmax is None else kmax
    return grid.spacing * np.arange(1, kmax + 1, dtype=float)
