"""Cubes, point sets, grids and Whitney decompositions.

All distances use the uniform (max) norm, so the diameter of a cube is its
side length, ``2 * half_side``.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Cube",
    "PointSet",
    "Grid",
    "WhitneyDecomposition",
    "dist_point_set",
    "cube_point_distance",
    "whitney_decompose",
    "touching_family",
    "nearest_anchor",
    "covering_multiplicity",
    "partition_disjoint",
    "tfm_bound",
]

# slack for float comparisons that are not decided exactly
_EPS = 1e-12


def _as_point(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Cube:
    """Closed axis-parallel cube ``Q(center, half_side)``."""

    center: tuple[float, ...]
    half_side: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        object.__setattr__(self, "half_side", float(self.half_side))
        if not self.half_side > 0:
            raise ValueError(f"half_side must be positive, got {self.half_side}")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def diam(self) -> float:
        return 2.0 * self.half_side

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.center) - self.half_side

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.center) + self.half_side

    @property
    def volume(self) -> float:
        return self.diam ** self.dim

    def dilate(self, factor: float) -> "Cube":
        return Cube(self.center, self.half_side * factor)

    @property
    def star(self) -> "Cube":
        """The slightly enlarged cube ``(9/8) Q`` carrying the bump of ``Q``."""
        return self.dilate(9.0 / 8.0)

    def contains(self, x, tol: float = 0.0) -> bool:
        x = _as_point(x)
        return bool(np.all(np.abs(x - np.asarray(self.center)) <= self.half_side + tol))

    def contains_cube(self, other: "Cube", tol: float = 0.0) -> bool:
        return bool(
            np.all(self.lower <= other.lower + tol) and np.all(other.upper <= self.upper + tol)
        )

    def intersects(self, other: "Cube", tol: float = 0.0) -> bool:
        """Closed intersection test."""
        gap = np.abs(np.asarray(self.center) - np.asarray(other.center))
        return bool(np.all(gap <= self.half_side + other.half_side + tol))

    def interiors_overlap(self, other: "Cube") -> bool:
        gap = np.abs(np.asarray(self.center) - np.asarray(other.center))
        return bool(np.all(gap < self.half_side + other.half_side - _EPS))

    def children(self) -> list["Cube"]:
        """The ``2**n`` dyadic children, in lexicographic order of their centers."""
        h = self.half_side / 2.0
        out = []
        for signs in itertools.product((-1.0, 1.0), repeat=self.dim):
            out.append(Cube(np.asarray(self.center) + h * np.asarray(signs), h))
        return out

    def to_json(self) -> dict:
        return {"center": list(self.center), "half_side": self.half_side}

    @classmethod
    def from_json(cls, data: dict) -> "Cube":
        return cls(tuple(data["center"]), data["half_side"])

    @classmethod
    def from_bounds(cls, lower, upper) -> "Cube":
        lower, upper = _as_point(lower), _as_point(upper)
        sides = upper - lower
        if not np.allclose(sides, sides[0]):
            raise ValueError("bounds do not describe a cube")
        return cls((lower + upper) / 2.0, sides[0] / 2.0)


@dataclass(frozen=True)
class PointSet:
    """A finite closed set ``E``; points are stored as an ``(k, n)`` array."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[0] == 0:
            raise ValueError("empty set")
        if len({tuple(p) for p in pts}) != len(pts):
            raise ValueError("points of a PointSet must be distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    def __iter__(self):
        return iter(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def index_of(self, x) -> int:
        hits = np.flatnonzero(np.all(self.points == _as_point(x), axis=1))
        if hits.size == 0:
            raise KeyError(f"{x} is not a point of E")
        return int(hits[0])

    def to_json(self) -> dict:
        return {"points": self.points.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "PointSet":
        return cls(np.asarray(data["points"], dtype=float))


@dataclass(frozen=True)
class Grid:
    """Regular grid; node ``i`` sits at ``origin + spacing * i``.

    Each node owns the cell of side ``spacing`` centered on it, so the grid
    box (the union of cells) extends half a cell beyond the extreme nodes.
    """

    origin: tuple[float, ...]
    spacing: float
    extents: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(o) for o in np.atleast_1d(self.origin)))
        object.__setattr__(self, "extents", tuple(int(e) for e in np.atleast_1d(self.extents)))
        object.__setattr__(self, "spacing", float(self.spacing))
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if len(self.origin) != len(self.extents) or any(e < 1 for e in self.extents):
            raise ValueError("extents must be positive, one per axis")

    @classmethod
    def vertex_centered(cls, lo: float, hi: float, cells: int, dim: int = 1) -> "Grid":
        """Nodes at ``lo, lo + s, ..., hi`` along every axis (``cells + 1`` nodes).

        Refining ``cells -> 2 * cells`` keeps every old node.
        """
        s = (hi - lo) / cells
        return cls((lo,) * dim, s, (cells + 1,) * dim)

    @classmethod
    def cell_centered(cls, lo: float, hi: float, cells: int, dim: int = 1) -> "Grid":
        """Cells tile ``[lo, hi]`` exactly; nodes are the cell midpoints."""
        s = (hi - lo) / cells
        return cls((lo + s / 2,) * dim, s, (cells,) * dim)

    @property
    def dim(self) -> int:
        return len(self.extents)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.extents

    @property
    def size(self) -> int:
        return int(np.prod(self.extents))

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def lower(self) -> np.ndarray:
        """Lower corner of the grid box."""
        return np.asarray(self.origin) - self.spacing / 2

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.origin) + self.spacing * (np.asarray(self.extents) - 0.5)

    def axis(self, i: int) -> np.ndarray:
        return self.origin[i] + self.spacing * np.arange(self.extents[i])

    def nodes(self) -> np.ndarray:
        """All nodes as a ``(size, n)`` array in row-major order."""
        mesh = np.meshgrid(*[self.axis(i) for i in range(self.dim)], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def index_of(self, x, tol: float = 1e-9) -> tuple[int, ...]:
        """Multi-index of the node at ``x``; raises if ``x`` is not a node."""
        x = _as_point(x)
        u = (x - np.asarray(self.origin)) / self.spacing
        k = np.rint(u).astype(int)
        if np.any(np.abs(u - k) > tol) or np.any(k < 0) or np.any(k >= np.asarray(self.extents)):
            raise ValueError(f"{x} is not a grid node")
        return tuple(int(v) for v in k)

    def flat_index(self, x) -> int:
        return int(np.ravel_multi_index(self.index_of(x), self.extents))

    def snap(self, x) -> np.ndarray:
        """Nearest node to ``x`` (clamped into the grid)."""
        x = _as_point(x)
        k = np.rint((x - np.asarray(self.origin)) / self.spacing)
        k = np.clip(k, 0, np.asarray(self.extents) - 1)
        return np.asarray(self.origin) + self.spacing * k

    def refine(self, factor: int = 2) -> "Grid":
        """Grid with ``factor`` times finer spacing covering the same node hull."""
        ext = tuple((e - 1) * factor + 1 for e in self.extents)
        return Grid(self.origin, self.spacing / factor, ext)

    def to_json(self) -> dict:
        return {"origin": list(self.origin), "spacing": self.spacing, "extents": list(self.extents)}

    @classmethod
    def from_json(cls, data: dict) -> "Grid":
        return cls(tuple(data["origin"]), data["spacing"], tuple(data["extents"]))


def dist_point_set(x, E: PointSet | np.ndarray) -> tuple[float, np.ndarray]:
    """Uniform-norm distance from ``x`` to ``E`` and a nearest point.

    Ties go to the lexicographically smallest point.
    """
    pts = E.points if isinstance(E, PointSet) else np.asarray(E, dtype=float)
    if pts.size == 0:
        raise ValueError("empty set")
    if pts.ndim == 1:
        pts = pts[:, None]
    d = np.max(np.abs(pts - _as_point(x)), axis=1)
    best = d.min()
    ties = pts[d == best]
    winner = ties[np.lexsort(ties.T[::-1])[0]]
    return float(best), winner.copy()


def cube_point_distance(Q: Cube, pts: np.ndarray) -> np.ndarray:
    """Uniform-norm distance from the closed cube ``Q`` to each row of ``pts``."""
    gap = np.abs(np.asarray(pts, dtype=float) - np.asarray(Q.center)) - Q.half_side
    return np.max(np.maximum(gap, 0.0), axis=1)


def _exact_cube_distance(Q: Cube, pts: np.ndarray) -> Fraction:
    c = [Fraction(v) for v in Q.center]
    r = Fraction(Q.half_side)
    best = None
    for p in pts:
        d = max(max(abs(Fraction(float(pi)) - ci) - r, Fraction(0)) for pi, ci in zip(p, c))
        best = d if best is None else min(best, d)
    return best


@dataclass(frozen=True)
class WhitneyDecomposition:
    """Dyadic Whitney cubes of ``truncation_box \\ E`` plus the sub-resolution collar."""

    cubes: tuple[Cube, ...]
    source_set: PointSet
    truncation_box: Cube
    collar: tuple[Cube, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.cubes)

    def index(self, K: Cube) -> int:
        try:
            return self.cubes.index(K)
        except ValueError:
            raise KeyError("cube is not part of the decomposition") from None

    def distances(self) -> np.ndarray:
        return np.array([cube_point_distance(Q, self.source_set.points).min() for Q in self.cubes])

    def to_csv(self, path) -> None:
        n = self.truncation_box.dim
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"c{i}" for i in range(n)] + ["half_side", "dist_to_E"])
            for Q, d in zip(self.cubes, self.distances()):
                w.writerow(list(Q.center) + [Q.half_side, d])


def _whitney_predicate(Q: Cube, pts: np.ndarray) -> tuple[bool, bool]:
    """Return ``(keep, too_close)`` for the selection rule ``diam Q <= dist(Q,E)``."""
    d = float(cube_point_distance(Q, pts).min())
    diam = Q.diam
    if abs(d - diam) <= 1e-9 * max(diam, 1.0):
        exact = _exact_cube_distance(Q, pts)
        keep = Fraction(diam) <= exact <= 4 * Fraction(diam)
        return keep, exact < Fraction(diam)
    return diam <= d <= 4 * diam, d < diam


def whitney_decompose(E: PointSet, box: Cube, min_level: int) -> WhitneyDecomposition:
    """Dyadic Whitney decomposition of ``box \\ E``.

    Cubes are split recursively; a dyadic cube is kept once
    ``diam Q <= dist(Q, E)``, which together with the parent having failed the
    test forces ``dist(Q, E) < 4 diam Q``.  Cubes still too close to ``E`` at
    depth ``min_level`` are returned separately as the collar.
    """
    pts = E.points
    if pts.shape[1] != box.dim:
        raise ValueError("dimension mismatch between E and box")
    keep_root, _ = _whitney_predicate(box, pts)
    if keep_root:
        return WhitneyDecomposition((box,), E, box, ())
    if not all(box.contains(p, tol=_EPS) for p in pts):
        raise ValueError("E is not contained in the truncation box")

    cubes: list[Cube] = []
    collar: list[Cube] = []
    stack = [(box, 0)]
    # depth-first with fixed child order keeps the output deterministic
    while stack:
        Q, level = stack.pop()
        keep, too_close = _whitney_predicate(Q, pts)
        if keep:
            cubes.append(Q)
        elif too_close:
            if level >= min_level:
                collar.append(Q)
            else:
                stack.extend((child, level + 1) for child in reversed(Q.children()))
        else:
            # dist > 4 diam cannot occur below the root; keep anyway
            cubes.append(Q)
    return WhitneyDecomposition(tuple(cubes), E, box, tuple(collar))


def touching_family(K: Cube, W: WhitneyDecomposition) -> list[Cube]:
    """All cubes of ``W`` meeting ``K`` (closed intersection), ``K`` included."""
    W.index(K)
    tol = 1e-12 * K.diam
    return [Q for Q in W.cubes if Q.intersects(K, tol=tol)]


def nearest_anchor(Q: Cube, E: PointSet) -> np.ndarray:
    """A point of ``E`` nearest to ``Q``; lexicographic tie-break."""
    d = cube_point_distance(Q, E.points)
    best = d.min()
    ties = E.points[np.abs(d - best) <= 1e-12 * max(best, Q.diam)]
    a = ties[np.lexsort(ties.T[::-1])[0]].copy()
    if not Q.dilate(9.0).contains(a, tol=1e-9 * Q.diam):
        raise AssertionError("anchor outside 9Q; Q is not a Whitney cube of E")
    return a


def covering_multiplicity(cubes: Sequence[Cube]) -> int:
    """Largest number of closed cubes sharing a point.

    For closed boxes a deepest point can be taken with every coordinate equal
    to some cube's lower bound, so checking that finite lattice is exact.
    """
    if not cubes:
        return 0
    lo = np.array([Q.lower for Q in cubes])
    hi = np.array([Q.upper for Q in cubes])
    n = lo.shape[1]
    cand = [np.unique(lo[:, i]) for i in range(n)]
    best = 0
    for pt in itertools.product(*cand):
        pt = np.asarray(pt)
        best = max(best, int(np.sum(np.all((lo <= pt) & (pt <= hi), axis=1))))
    return best


def tfm_bound(dim: int, multiplicity: int) -> int:
    return 2 ** (dim - 1) * (multiplicity - 1) + 1


def _intersection_graph(cubes: Sequence[Cube]) -> list[set[int]]:
    c = np.array([Q.center for Q in cubes])
    r = np.array([Q.half_side for Q in cubes])
    adj = []
    for i in range(len(cubes)):
        hit = np.all(np.abs(c - c[i]) <= (r + r[i])[:, None], axis=1)
        hit[i] = False
        adj.append(set(np.flatnonzero(hit).tolist()))
    return adj


def _greedy_colors(order: Iterable[int], adj: list[set[int]]) -> dict[int, int]:
    color: dict[int, int] = {}
    for v in order:
        used = {color[u] for u in adj[v] if u in color}
        k = 0
        while k in used:
            k += 1
        color[v] = k
    return color


def _exact_coloring(adj: list[set[int]], k: int) -> dict[int, int] | None:
    """Backtracking k-coloring, most-constrained vertex first."""
    n = len(adj)
    color: dict[int, int] = {}

    def pick():
        best, key = None, None
        for v in range(n):
            if v in color:
                continue
            sat = len({color[u] for u in adj[v] if u in color})
            cand = (sat, len(adj[v]))
            if key is None or cand > key:
                best, key = v, cand
        return best

    def solve() -> bool:
        v = pick()
        if v is None:
            return True
        used = {color[u] for u in adj[v] if u in color}
        top = max(color.values(), default=-1)
        for c in range(min(k, top + 2)):
            if c not in used:
                color[v] = c
                if solve():
                    return True
                del color[v]
        return False

    return dict(color) if solve() else None


def partition_disjoint(cubes: Sequence[Cube]) -> list[list[Cube]]:
    """Split a cube family into subfamilies of pairwise disjoint (closed) cubes.

    Greedy coloring of the intersection graph, largest cubes first (ties by
    lower corner).  When greedy exceeds ``2**(n-1) (M-1) + 1`` colors an exact
    backtracking search for that many colors is run instead.
    """
    cubes = list(cubes)
    if not cubes:
        return []
    adj = _intersection_graph(cubes)
    order = sorted(range(len(cubes)), key=lambda i: (-cubes[i].half_side, tuple(cubes[i].lower)))
    color = _greedy_colors(order, adj)
    bound = tfm_bound(cubes[0].dim, covering_multiplicity(cubes))
    if max(color.values()) + 1 > bound:
        exact = _exact_coloring(adj, bound)
        if exact is not None:
            color = exact
    groups: dict[int, list[Cube]] = {}
    for i in range(len(cubes)):
        groups.setdefault(color[i], []).append(cubes[i])
    return [groups[k] for k in sorted(groups)]


def load_point_set(path) -> PointSet:
    with open(path) as fh:
        return PointSet.from_json(json.load(fh))
