"""Command line entry point.

Every subcommand reads one JSON config (see :class:`ExperimentConfig`);
``--seed``, ``--out``, ``--hop-radius``, ``--grid`` and ``--refine`` override
the corresponding config keys.  Exit codes: 0 pass, 1 a checked property
failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .fields import WeightField
from .geometry import Cube, whitney_decompose
from .maximal import a1_norm
from .metrics import GeodesicGraph, QuasiMetricSpec, write_distance_table
from .pipeline import (ConfigError, ExperimentConfig, _jsonable, auto_min_level, grid_box_cube, run_jet_pipeline,
                       run_l1p_pipeline)
from .suite import run_verification_suite, write_rows
from .trace import DividedDifferenceTable, jet_trace_norm, trace_1d_linf, trace_1d_lp, trace_norm_L1p

MAX_METRIC_NODES = 5000


def _config(args) -> ExperimentConfig:
    data, base = {}, "."
    if args.config:
        path = Path(args.config)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        base = str(path.parent)
    for key in ("seed", "out", "hop_radius", "grid", "refine"):
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    return ExperimentConfig.from_dict(data, base)


def _out_dir(cfg: ExperimentConfig, name: str) -> Path:
    out = Path(cfg.out or f"out/{name}")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2) + "\n")


def cmd_extend(cfg: ExperimentConfig) -> int:
    res = run_l1p_pipeline(cfg)
    out = _out_dir(cfg, "extend")
    res.write(out)
    mc = res.reports["mcshane"]
    ok = mc["max_error_on_E"] <= 1e-12 * max(1.0, float(np.max(np.abs(res.f))))
    if "lipschitz_seminorm" in mc:
        ok &= mc["lipschitz_seminorm"] <= mc["L"] * (1 + 1e-12)
    print(json.dumps(_jsonable({"I_p": res.reports["trace"]["I_p"], "L": mc["L"],
                                "ratio_F_over_Ip": res.reports["ratio_F_over_Ip"], "ok": ok})))
    return 0 if ok else 1


def cmd_extend_jet(cfg: ExperimentConfig) -> int:
    res = run_jet_pipeline(cfg)
    out = _out_dir(cfg, "extend-jet")
    res.write(out)
    grid = res.extension.grid
    tol = 10 * grid.spacing**2
    err = res.reports["jet_reproduction_error"]
    ok = err <= tol if cfg.m <= 3 else True
    print(json.dumps(_jsonable({"jet_reproduction_error": err, "tolerance": tol,
                                "whitney": res.reports["whitney"], "ok": ok})))
    return 0 if ok else 1


def cmd_trace_norm(cfg: ExperimentConfig) -> int:
    grid = cfg.make_grid()
    E = cfg.point_set()
    if cfg.m == 1:
        rep = trace_norm_L1p(cfg.function_values(E), E, cfg.p, grid)
        name = "L1p"
    else:
        rep = jet_trace_norm(cfg.jet_field(E), cfg.p, grid)
        name = "jet"
    out = _out_dir(cfg, "trace-norm")
    rep.to_csv(out / "sharp.csv")
    rep.write_summary(out / "summary.json", name, corpus_id=cfg.digest(), seed=cfg.seed)
    print(json.dumps(_jsonable(rep.summary(name, cfg.digest(), cfg.seed))))
    return 0


def cmd_verify_metric(cfg: ExperimentConfig) -> int:
    grid = cfg.make_grid()
    if grid.size > MAX_METRIC_NODES:
        raise ConfigError(f"{grid.size} nodes is too many for an all-pairs table; lower --grid")
    q = cfg.q if cfg.q is not None else float(cfg.n)
    w = cfg.weight_field(grid)
    rep = a1_norm(w)
    graph = GeodesicGraph(QuasiMetricSpec(q, WeightField(grid, w.values ** (1.0 / q))), cfg.hop_radius)
    ratio = graph.equivalence_ratio()
    out = _out_dir(cfg, "verify-metric")
    write_distance_table(out / "distances.csv", graph)
    summary = {"q": q, "hop_radius": cfg.hop_radius, "nodes": grid.size, "a1_norm": rep.norm_estimate,
               "a1_finite": rep.finite, "equivalence_ratio": ratio}
    _dump(out / "metric.json", summary)
    print(json.dumps(_jsonable(summary)))
    return 0 if np.isfinite(ratio) else 1


def cmd_whitney(cfg: ExperimentConfig) -> int:
    E = cfg.point_set()
    box = Cube((0.0,) * cfg.n, cfg.box)
    level = cfg.min_level if cfg.min_level is not None else auto_min_level(box, cfg.make_grid().spacing)
    W = whitney_decompose(E, box, level)
    out = _out_dir(cfg, "whitney")
    W.to_csv(out / "cubes.csv")
    d = W.distances()
    diam = np.array([Q.diam for Q in W.cubes])
    ok = bool(np.all(diam <= d) and np.all(d <= 4 * diam))
    summary = {"cubes": len(W), "collar": len(W.collar), "min_level": level, "dq_e_ok": ok}
    _dump(out / "whitney.json", summary)
    print(json.dumps(summary))
    return 0 if ok else 1


def cmd_dd1d(cfg: ExperimentConfig) -> int:
    if cfg.n != 1:
        raise ConfigError("dd1d needs n = 1")
    E = cfg.point_set()
    x = E.points[:, 0]
    f = cfg.function_values(E)
    if len(x) <= cfg.m:
        raise ConfigError("dd1d needs more than m points")
    tab = DividedDifferenceTable.build(x, f, cfg.m)
    out = _out_dir(cfg, "dd1d")
    with open(out / "table.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["order", "start", "value"])
        for k, row in enumerate(tab.table):
            for i, v in enumerate(row):
                wr.writerow([k, i, repr(float(v))])
    order = np.argsort(x)
    summary = {"m": cfg.m, "trace_linf": trace_1d_linf(f[order], x[order], cfg.m, np.random.default_rng(cfg.seed))}
    gen = cfg.generator()
    if gen is not None:
        A, B = trace_1d_lp(gen, x, cfg.m, cfg.p, cfg.make_grid())
        summary.update({"A": A, "B": B, "ratio": A / B if B > 0 else None})
    _dump(out / "dd1d.json", summary)
    print(json.dumps(_jsonable(summary)))
    return 0


def cmd_suite(args) -> int:
    seed = args.seed if args.seed is not None else 42
    code, rows = run_verification_suite(seed, corrupt_weight=args.inject_negative_weight)
    out = Path(args.out or "out/suite")
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / "suite.csv", rows)
    bad = [r["check"] for r in rows if r["status"] == "FAIL"]
    print(f"{len(rows)} checks, {len(bad)} failed" + (f": {', '.join(bad)}" if bad else ""))
    return code


COMMANDS = {
    "extend": cmd_extend,
    "extend-jet": cmd_extend_jet,
    "trace-norm": cmd_trace_norm,
    "verify-metric": cmd_verify_metric,
    "whitney": cmd_whitney,
    "dd1d": cmd_dd1d,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sobolev-traces",
                                     description="Weighted metrics, Lipschitz and Whitney extension, trace norms.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "extend": "extend f from E (sharp function, weight, geodesic metric, McShane)",
        "extend-jet": "Whitney-extend a field of jets",
        "trace-norm": "trace-norm functional of f (m = 1) or of a jet (m > 1)",
        "verify-metric": "geodesic metric of a weight and its equivalence ratio",
        "whitney": "Whitney decomposition of the complement of E",
        "dd1d": "divided-difference table and 1-D trace functionals",
        "suite": "run the property suite and write one CSV row per check",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="random seed (default 42)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--hop-radius", dest="hop_radius", type=int, default=None, help="graph hop radius (default 3)")
        p.add_argument("--grid", type=int, default=None, help="cells per axis")
        p.add_argument("--refine", type=int, default=None, help="refinement factor for the grid")
        if name == "suite":
            p.add_argument("--inject-negative-weight", action="store_true",
                           help="corrupt a weight to exercise the invariant failure path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "suite":
            return cmd_suite(args)
        if not args.config:
            raise ConfigError("--config is required")
        cfg = _config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
