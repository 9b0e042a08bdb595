"""Calibrated Sobolev-Poincare constants and the necessity-weight checks.

The Sobolev-Poincare constant ``C(n, q)`` in

    |F(x) - F(y)| <= C diam Q (avg_Q |grad F|**q)**(1/q),   x, y in Q,

is calibrated as the largest ratio observed on the calibration corpus and
frozen in ``data/calibration.json``.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .corpus import calibration_corpus
from .fields import ScalarField
from .geometry import Grid
from .maximal import a1_norm
from .metrics import QuasiMetricSpec, delta_q_pairs
from .sobolev import gradient_norm_field, necessity_weight, sp_ratio_field

__all__ = [
    "CALIBRATION_CASES",
    "CALIBRATION_CELLS",
    "calibration_grid",
    "calibrate_sp",
    "load_calibration",
    "write_calibration",
    "necessity_checks",
    "maximal_lp_bound",
]

CALIBRATION_CASES = ((1, 1.5), (1, 2.0), (2, 2.5), (2, 3.0))
# cells per axis on [-1, 1]**n at which the frozen constants are measured
CALIBRATION_CELLS = {1: 256, 2: 64}


def calibration_grid(n: int, cells: int | None = None) -> Grid:
    return Grid.vertex_centered(-1.0, 1.0, cells or CALIBRATION_CELLS[n], n)


def calibrate_sp(n: int, q: float, cells: int | None = None) -> tuple[float, list[float]]:
    """Largest Sobolev-Poincare ratio over the corpus, and the per-function ratios."""
    grid = calibration_grid(n, cells)
    ratios = [sp_ratio_field(ScalarField(grid, f(grid.nodes()).reshape(grid.shape)), q)[0]
              for f in calibration_corpus(n)]
    return max(ratios), ratios


def _key(n: int, q: float) -> str:
    return f"{n},{float(q):g}"


def load_calibration(path=None) -> dict:
    """Frozen constants as ``{(n, q): C}`` (the packaged sidecar by default)."""
    if path is None:
        text = resources.files("sobolev_traces").joinpath("data/calibration.json").read_text()
    else:
        text = Path(path).read_text()
    data = json.loads(text)
    out = {}
    for k, v in data["constants"].items():
        n, q = k.split(",")
        out[(int(n), float(q))] = float(v)
    return out


def write_calibration(path, cases=CALIBRATION_CASES) -> dict:
    consts = {}
    for n, q in cases:
        consts[_key(n, q)] = calibrate_sp(n, q)[0]
    doc = {"version": 1, "domain": "[-1,1]^n vertex grid",
           "cells": {str(k): v for k, v in CALIBRATION_CELLS.items()}, "constants": consts}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
    return doc


def maximal_lp_bound(n: int, s: float) -> float:
    """Marcinkiewicz bound ``2 (s A / (s - 1))**(1/s)`` for ``||M g||_s / ||g||_s``.

    ``A = 6**n`` bounds the weak type (1, 1) constant of the maximal operator
    over cubes containing the point (cubes of the ladder are at most twice
    the distance they must reach, and the Vitali covering costs ``3**n``).
    """
    if s <= 1:
        raise ValueError("need s > 1")
    return 2.0 * (s * 6.0**n / (s - 1.0)) ** (1.0 / s)


def necessity_checks(F: ScalarField, p: float, q: float, c_sp: float) -> dict:
    """Build ``h = 2 C M[|grad F|**sigma]**(1/sigma)`` and test the three necessity claims.

    Returns the measured A1 norm of ``h**q``, the largest ratio
    ``|F(x) - F(y)| / delta_q(x, y : h)`` over all pairs of interior nodes, and
    ``||h||_p / ||grad F||_p`` next to its a-priori bound.
    """
    h = necessity_weight(F, p, q, constant=2.0 * c_sp)
    sub = h.grid
    grad = gradient_norm_field(F, 1)
    out: dict = {"sigma": (p + q) / 2.0}
    if not np.any(h.values > 0):
        out.update({"a1": 1.0, "a1_finite": True, "fsp_ratio": 0.0, "lp_ratio": 0.0, "lp_bound": math.inf})
        return out
    rep = a1_norm(ScalarField(sub, h.values**q))
    out["a1"], out["a1_finite"] = rep.norm_estimate, rep.finite

    spec = QuasiMetricSpec(q, h)
    integ = spec.integrator()
    X = sub.nodes()
    margin = int(round((sub.origin[0] - F.grid.origin[0]) / F.grid.spacing))
    inner = tuple(slice(margin, e - margin) for e in F.grid.extents)
    vals = F.values[inner].ravel()
    worst = 0.0
    for i in range(len(X)):
        a = np.broadcast_to(X[i], X.shape)
        d = delta_q_pairs(spec, a, X, integ)
        diff = np.abs(vals - vals[i])
        mask = d > 0
        if np.any(diff[~mask] > 0):
            return {**out, "fsp_ratio": math.inf}
        if np.any(mask):
            worst = max(worst, float(np.max(diff[mask] / d[mask])))
    out["fsp_ratio"] = worst

    g_norm = grad.lp_norm(p)
    out["lp_ratio"] = h.lp_norm(p) / g_norm if g_norm > 0 else 0.0
    out["lp_bound"] = 2.0 * c_sp * maximal_lp_bound(F.grid.dim, p / out["sigma"]) ** (1.0 / out["sigma"])
    return out
