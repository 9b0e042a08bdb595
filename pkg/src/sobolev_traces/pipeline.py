"""End-to-end extension pipelines and their configuration.

The function pipeline extends ``f`` from a finite set ``E`` in four steps:

1. the sharp maximal function ``f#`` on the grid;
2. the weight ``h = M[(f#)**theta]**(1/theta)`` with ``q = (n + p)/2`` and
   ``theta = (q + p)/2``, so that ``h**q`` is an A1 weight;
3. the geodesic distance ``d_q(h)`` on the grid graph;
4. the McShane extension ``F(x) = min_y f(y) + L d_q(x, y)``.

Because ``h >= f#`` on every cell, ``|f(x) - f(y)| <= 3 delta_q(x, y : h)``
for ``x, y`` in ``E``; with ``C`` the measured ratio ``max delta_q / d_q`` the
constant ``L = 3 C`` makes ``f`` exactly ``L``-Lipschitz for ``d_q`` on ``E``.
"""

from __future__ import annotations

import hashlib
import json
import math
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .extension import (GraphDistance, JetField, PartitionOfUnity, lipschitz_seminorm, mcshane_extend,
                        whitney_extend_jet)
from .fields import ScalarField, WeightField
from .geometry import Cube, Grid, PointSet, whitney_decompose
from .maximal import a1_norm, hl_maximal
from .metrics import GeodesicGraph, QuasiMetricSpec, delta_q_pairs
from .polynomials import AnalyticFunction, multi_indices
from .sobolev import discrete_derivatives, sobolev_seminorm
from .trace import jet_trace_norm, trace_norm_L1p

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "PipelineResult",
    "pipeline_exponents",
    "run_l1p_pipeline",
    "run_jet_pipeline",
    "auto_min_level",
]

ALL_PAIRS_LIMIT = 2500


class ConfigError(ValueError):
    """Invalid or unresolvable experiment configuration."""


@dataclass
class ExperimentConfig:
    n: int = 1
    m: int = 1
    p: float | None = None
    grid: int | None = None
    box: float = 4.0
    E: Any = None
    f: Any = None
    jet: Any = None
    hop_radius: int = 3
    seed: int = 42
    out: str | None = None
    refine: int = 1
    all_pairs: bool | None = None
    weight: Any = None
    q: float | None = None
    min_level: int | None = None
    base_dir: str = "."

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n must be positive")
        if self.m < 1:
            raise ConfigError("m must be at least 1")
        if self.p is None:
            self.p = float(self.n + 1)
        if self.q is not None and self.q < self.n:
            raise ConfigError("need q >= n")
        if not self.p > self.n:
            raise ConfigError("need p > n")
        if self.grid is None:
            self.grid = 4096 if self.n == 1 else 256
        if self.grid < 2 or self.refine < 1 or self.hop_radius < 1:
            raise ConfigError("grid, refine and hop_radius must be positive")
        if not self.box > 0:
            raise ConfigError("box must be positive")

    @classmethod
    def from_dict(cls, data: dict, base_dir: str = ".") -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            cfg = cls(**{**data, "base_dir": base_dir})
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        if cfg.E is not None:
            cfg.point_set()  # resolve references eagerly
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(data, str(path.parent))

    def _resolve(self, ref):
        if isinstance(ref, str) and not ref.lstrip().startswith(("{", "[")):
            p = Path(self.base_dir) / ref
            if not p.exists():
                raise ConfigError(f"missing file {p}")
            return json.loads(p.read_text())
        return ref

    def weight_field(self, grid: Grid) -> WeightField:
        """The weight ``w`` (playing ``h**q``): a corpus name, ``{"expr": ...}`` or node values."""
        from .corpus import a1_weights, non_a1_weights
        ref = self._resolve(self.weight)
        if ref is None:
            raise ConfigError("config needs a weight")
        q = self.q if self.q is not None else float(self.n)
        if isinstance(ref, dict) and "corpus" in ref:
            table = {**a1_weights(self.n), **non_a1_weights(self.n, q)}
            if ref["corpus"] not in table:
                raise ConfigError(f"unknown corpus weight {ref['corpus']!r}; known: {sorted(table)}")
            return table[ref["corpus"]](grid)
        try:
            if isinstance(ref, dict) and "expr" in ref:
                vals = AnalyticFunction(ref["expr"], self.n)(grid.nodes())
            else:
                vals = np.asarray(ref["values"] if isinstance(ref, dict) else ref, dtype=float)
            return WeightField(grid, np.asarray(vals, dtype=float).reshape(grid.shape))
        except ValueError as exc:
            raise ConfigError(f"bad weight: {exc}") from None

    def make_grid(self) -> Grid:
        """Vertex grid on ``[-box, box]**n`` with ``grid * refine`` cells per axis."""
        cells = self.grid * self.refine
        return Grid.vertex_centered(-self.box, self.box, cells, self.n)

    def point_set(self) -> PointSet:
        ref = self._resolve(self.E)
        if ref is None:
            raise ConfigError("config needs a point set E")
        pts = ref["points"] if isinstance(ref, dict) else ref
        try:
            E = PointSet(np.asarray(pts, dtype=float).reshape(len(pts), -1))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if E.dim != self.n:
            raise ConfigError("E has the wrong dimension")
        if np.any(np.abs(E.points) > self.box):
            raise ConfigError("E is not inside the box")
        return E

    def function_values(self, E: PointSet) -> np.ndarray:
        ref = self._resolve(self.f)
        if ref is None:
            raise ConfigError("config needs f")
        if isinstance(ref, dict) and "expr" in ref:
            return AnalyticFunction(ref["expr"], self.n)(E.points)
        vals = np.asarray(ref, dtype=float).ravel()
        if vals.size != len(E):
            raise ConfigError("f needs one value per point of E")
        return vals

    def generator(self) -> AnalyticFunction | None:
        ref = self._resolve(self.f if self.jet is None else self.jet)
        if isinstance(ref, dict) and "expr" in ref:
            return AnalyticFunction(ref["expr"], self.n)
        return None

    def jet_field(self, E: PointSet) -> JetField:
        ref = self._resolve(self.jet)
        if ref is None:
            raise ConfigError("config needs a jet")
        if isinstance(ref, dict) and "expr" in ref:
            return JetField.from_function(AnalyticFunction(ref["expr"], self.n), E, self.m)
        try:
            J = JetField.from_json(ref)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad jet: {exc}") from None
        if J.E.dim != self.n:
            raise ConfigError("jet has the wrong dimension")
        if J.m != self.m:
            raise ConfigError("jet order does not match m")
        return J

    def digest(self) -> str:
        d = {k: v for k, v in asdict(self).items() if k not in ("out", "base_dir")}
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()[:16]


@dataclass
class PipelineResult:
    extension: ScalarField
    weight: ScalarField
    graph: GeodesicGraph | None
    reports: dict
    provenance: dict
    E: PointSet | None = None
    f: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.extension.to_csv(out / "extension.csv")
        self.extension.save_binary(out / "extension.bin")
        self.weight.to_csv(out / "weight.csv")
        with open(out / "report.json", "w") as fh:
            json.dump({"reports": _jsonable(self.reports), "provenance": self.provenance}, fh, indent=2)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def pipeline_exponents(n: int, p: float) -> tuple[float, float]:
    """``(q, theta)`` with ``q = (n + p)/2`` and ``theta = (q + p)/2``."""
    q = (n + p) / 2.0
    return q, (q + p) / 2.0


def _provenance(cfg: ExperimentConfig) -> dict:
    return {"config_hash": cfg.digest(), "seed": cfg.seed, "version": __version__,
            "numpy": np.__version__, "python": platform.python_version()}


def _snap_to_nodes(E: PointSet, grid: Grid) -> tuple[PointSet, bool]:
    snapped = np.array([grid.snap(x) for x in E.points])
    moved = bool(np.any(snapped != E.points))
    return PointSet(snapped), moved


def _equivalence_constant(graph: GeodesicGraph, rows) -> tuple[float, np.ndarray]:
    """``max delta_sym / d_q`` over pairs whose first node is in ``rows``; also the distance rows."""
    D = graph.distances_from(rows)
    P = graph.points
    best = 1.0
    for r, i in enumerate(rows):
        a = np.broadcast_to(P[i], P.shape)
        ds = np.maximum(delta_q_pairs(graph.spec, a, P, graph._integ), delta_q_pairs(graph.spec, P, a, graph._integ))
        mask = D[r] > 0
        if np.any(mask):
            best = max(best, float(np.max(ds[mask] / D[r][mask])))
    return best, D


def _weight_from_sharp(sharp: np.ndarray, grid: Grid, theta: float) -> ScalarField:
    M = hl_maximal(ScalarField(grid, sharp.reshape(grid.shape) ** theta))
    return ScalarField(grid, M.values ** (1.0 / theta))


def run_l1p_pipeline(cfg: ExperimentConfig) -> PipelineResult:
    """Extend ``f`` from ``E`` by the four-step weight/metric/McShane construction."""
    if cfg.m != 1:
        raise ConfigError("the function pipeline needs m = 1")
    grid = cfg.make_grid()
    E0 = cfg.point_set()
    f = cfg.function_values(E0)
    E, moved = _snap_to_nodes(E0, grid)
    n, p = cfg.n, cfg.p
    q, theta = pipeline_exponents(n, p)
    reports: dict = {"exponents": {"q": q, "theta": theta}, "E_snapped": moved}

    # step 1
    tr = trace_norm_L1p(f, E, p, grid)
    if not np.all(np.isfinite(tr.sharp_field.values)):
        raise RuntimeError("sharp maximal function is not finite")
    reports["trace"] = {"I_p": tr.functional_value, "tail_bound": tr.tail_bound}
    prov = _provenance(cfg)

    if not np.any(tr.sharp_field.values > 0):
        # constant data: the extension is the constant and every functional vanishes
        F = ScalarField(grid, np.full(grid.shape, float(f[0])))
        reports.update({"seminorm": 0.0, "ratio_F_over_Ip": 0.0, "mcshane": {"L": 0.0, "max_error_on_E": 0.0}})
        return PipelineResult(F, ScalarField(grid, np.zeros(grid.shape)), None, reports, prov, E, f)

    # step 2
    h = _weight_from_sharp(tr.sharp_field.values, grid, theta)
    rep = a1_norm(ScalarField(grid, h.values**q))
    reports["a1"] = {"norm": rep.norm_estimate, "finite": rep.finite}

    # step 3
    spec = QuasiMetricSpec(q, WeightField(grid, h.values))
    graph = GeodesicGraph(spec, cfg.hop_radius)
    e_idx = [graph.index_of(x) for x in E.points]
    all_pairs = cfg.all_pairs if cfg.all_pairs is not None else grid.size <= ALL_PAIRS_LIMIT
    if all_pairs:
        D = graph.all_pairs()
        C = graph.equivalence_ratio()
        scope = "all pairs"
    else:
        C, _ = _equivalence_constant(graph, e_idx)
        scope = "pairs meeting E"
    L = 3.0 * C
    reports["geodesic"] = {"equivalence_constant": C, "scope": scope, "hop_radius": cfg.hop_radius}

    # step 4
    F = mcshane_extend(f, E, GraphDistance(graph), L, grid)
    err = float(np.max(np.abs(F.values.ravel()[e_idx] - f)))
    mc = {"L": L, "max_error_on_E": err}
    if all_pairs:
        mc["lipschitz_seminorm"] = lipschitz_seminorm(F, graph.all_pairs())
    reports["mcshane"] = mc
    sem = sobolev_seminorm(F, 1, p).seminorm
    reports["seminorm"] = sem
    reports["ratio_F_over_Ip"] = sem / tr.functional_value
    gen = cfg.generator()
    if gen is not None:
        from .sobolev import analytic_seminorm
        f0 = analytic_seminorm(gen, grid, 1, p)
        reports["generator_seminorm"] = f0
        reports["ratio_Ip_over_F0"] = tr.functional_value / f0 if f0 > 0 else math.inf
    return PipelineResult(F, h, graph, reports, prov, E, f, {"trace": tr})


def auto_min_level(box: Cube, spacing: float) -> int:
    """Depth at which collar cubes are smaller than a quarter of the grid spacing."""
    return int(math.ceil(math.log2(4.0 * box.diam / spacing))) + 1


def grid_box_cube(grid: Grid) -> Cube:
    lo, hi = grid.lower, grid.upper
    return Cube((lo + hi) / 2, float(np.max(hi - lo)) / 2)


def run_jet_pipeline(cfg: ExperimentConfig) -> PipelineResult:
    """Jet sharp function, weight, metric report and the Whitney extension of the jet."""
    grid = cfg.make_grid()
    E0 = cfg.point_set()
    E, moved = _snap_to_nodes(E0, grid)
    J = cfg.jet_field(E0)
    if moved:
        J = JetField(E, J.m, tuple(P.rebase(x) for P, x in zip(J.polys, E.points)))
    n, p, m = cfg.n, cfg.p, cfg.m
    q, theta = pipeline_exponents(n, p)
    reports: dict = {"exponents": {"q": q, "theta": theta}, "E_snapped": moved}
    prov = _provenance(cfg)

    tr = jet_trace_norm(J, p, grid)
    reports["jet_trace"] = {"sharp_norm": tr.functional_value, "idf_sum": tr.extras["idf_sum"],
                            "tail_bound": tr.tail_bound}
    sharp = tr.sharp_field.values
    if np.any(sharp > 0):
        h = _weight_from_sharp(sharp, grid, theta)
        rep = a1_norm(ScalarField(grid, h.values**q))
        reports["a1"] = {"norm": rep.norm_estimate, "finite": rep.finite}
        graph = None
        if grid.size <= ALL_PAIRS_LIMIT:
            graph = GeodesicGraph(QuasiMetricSpec(q, WeightField(grid, h.values)), cfg.hop_radius)
            reports["geodesic"] = {"equivalence_constant": graph.equivalence_ratio()}
    else:
        h = ScalarField(grid, np.zeros(grid.shape))
        graph = None

    box = grid_box_cube(grid)
    level = cfg.min_level if cfg.min_level is not None else auto_min_level(box, grid.spacing)
    W = whitney_decompose(E, box, level)
    P = PartitionOfUnity(W)
    ext = whitney_extend_jet(J, W, P, grid, order=m)
    reports["whitney"] = {"cubes": len(W), "collar": len(W.collar),
                          "uncovered_nodes": int(np.sum(~(ext.covered | ext.on_E)))}
    # jet reproduction at E by central differences of the assembled field
    Ffield = ext.field()
    worst = 0.0
    for k in range(m):
        ders = discrete_derivatives(Ffield, k) if k > 0 else {(0,) * n: Ffield}
        for beta, fld in ders.items():
            for x, Px in zip(E.points, J.polys):
                try:
                    val = fld.at(x)
                except ValueError:
                    continue
                worst = max(worst, abs(val - Px.derivative(beta)(x)))
    reports["jet_reproduction_error"] = worst
    mask = ext.covered | ext.on_E
    top = np.sqrt(sum(ext.derivatives[a] ** 2 for a in multi_indices(n, m, exact=True)))
    sem = float((np.sum(top[mask] ** p) * grid.cell_volume) ** (1 / p))
    reports["seminorm"] = sem
    reports["ratio_F_over_N"] = sem / tr.extras["idf_sum"] if tr.extras["idf_sum"] > 0 else 0.0
    gen = cfg.generator()
    if gen is not None:
        X = grid.nodes()
        g0 = np.sqrt(sum(gen.derivative(a, X) ** 2 for a in multi_indices(n, m, exact=True)))
        f0 = float((np.sum(g0**p) * grid.cell_volume) ** (1 / p))
        reports["generator_seminorm"] = f0
        reports["ratio_F_over_F0"] = sem / f0 if f0 > 0 else math.inf
    return PipelineResult(Ffield, h, graph, reports, prov, E, None, {"jet": J, "whitney": W, "extension": ext})
