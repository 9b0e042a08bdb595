"""Named fixtures: weights, analytic test functions and point sets.

Weights are returned as functions of a :class:`Grid` because several of them
(the Coifman-Rochberg weights) are defined through grid operations.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .fields import ScalarField, WeightField
from .geometry import Grid, PointSet
from .maximal import hl_maximal
from .polynomials import AnalyticFunction

__all__ = [
    "SINGULAR_POINT",
    "a1_weights",
    "non_a1_weights",
    "calibration_corpus",
    "trace_corpus",
    "two_point_fixture",
    "trace_point_set",
]

# off every dyadic grid, so power weights stay finite at the nodes
SINGULAR_POINT = 1.0 / 3.0


def _sample(grid: Grid, func) -> WeightField:
    return WeightField(grid, np.asarray(func(grid.nodes()), dtype=float).reshape(grid.shape))


def _cr_weight(grid: Grid) -> WeightField:
    """``M[point mass]**(1/2)`` with the mass on the node nearest the singular point."""
    g = np.zeros(grid.shape)
    g[grid.index_of(grid.snap(np.full(grid.dim, SINGULAR_POINT)))] = 1.0 / grid.cell_volume
    m = hl_maximal(ScalarField(grid, g))
    return WeightField(grid, m.values**0.5)


def a1_weights(n: int) -> dict[str, Callable[[Grid], WeightField]]:
    """Five A1 weights ``w`` (these play the role of ``h**q``)."""
    c = SINGULAR_POINT
    expo = -0.5 if n == 1 else -1.0
    return {
        "constant": lambda g: _sample(g, lambda X: np.ones(len(X))),
        "power": lambda g: _sample(g, lambda X: np.max(np.abs(X - c), axis=1) ** expo),
        "sine": lambda g: _sample(g, lambda X: 1 + 0.5 * np.sin(3 * X.sum(axis=1))),
        "gaussian": lambda g: _sample(g, lambda X: 1 + 3 * np.exp(-20 * (X**2).sum(axis=1))),
        "coifman_rochberg": _cr_weight,
    }


def non_a1_weights(n: int, q: float) -> dict[str, Callable[[Grid], WeightField]]:
    """Two weights outside A1.

    ``wall``: 1 on the half-space ``x_1 <= 0`` and ``x_1**(3q)`` beyond it, so
    the weight collapses next to a wall of unit mass.  ``vanishing``:
    ``||x - c||**3``, which vanishes at an interior point.
    """
    c = SINGULAR_POINT
    return {
        "wall": lambda g: _sample(g, lambda X: np.where(X[:, 0] <= 0, 1.0, np.abs(X[:, 0]) ** (3 * q))),
        "vanishing": lambda g: _sample(g, lambda X: np.max(np.abs(X - c), axis=1) ** 3),
    }


_CAL_1D = [
    "x0", "x0**2", "x0**3 - x0", "sin(3*x0)", "cos(2*x0)", "exp(x0)", "exp(-4*x0**2)",
    "tanh(3*x0)", "1/(1 + 4*x0**2)", "sqrt(1 + x0**2)", "x0*exp(-x0**2)", "sin(x0)**2",
    "log(2 + x0)", "atan(5*x0)", "x0**4 - x0**2", "cos(5*x0)*exp(-x0**2)", "(1 + x0)**3",
    "sin(2*x0) + 0.3*x0", "exp(-x0)*x0**2", "sinh(x0)",
]

_CAL_2D = [
    "x0", "x0 + 2*x1", "x0*x1", "x0**2 - x1**2", "sin(2*x0)*cos(x1)", "exp(-2*(x0**2 + x1**2))",
    "exp(x0 - x1)", "tanh(2*x0 + x1)", "1/(1 + x0**2 + 2*x1**2)", "sqrt(1 + x0**2 + x1**2)",
    "x0*exp(-x1**2)", "sin(x0 + x1)**2", "log(3 + x0 + x1)", "atan(3*x0*x1)",
    "x0**3 - 3*x0*x1**2", "cos(3*x0)*exp(-x1**2)", "(1 + x0)*(1 - x1)**2", "sin(3*x1) + 0.2*x0",
    "exp(-((x0 - 0.3)**2 + x1**2)*5)", "x0**2*x1",
]


def calibration_corpus(n: int) -> list[AnalyticFunction]:
    """Twenty closed-form functions on ``[-1, 1]**n`` (``n`` in {1, 2})."""
    exprs = {1: _CAL_1D, 2: _CAL_2D}[n]
    return [AnalyticFunction(e, n) for e in exprs]


_TRACE_1D = [
    "exp(-x0**2)", "x0*exp(-x0**2)", "1/(1 + x0**2)", "sin(2*x0)*exp(-x0**2)", "tanh(2*x0)",
    "atan(x0)", "exp(-(x0 - 0.5)**2*3)", "cos(x0)*exp(-x0**2/2)", "x0**2*exp(-x0**2)",
    "exp(-2*(x0 + 0.4)**2) - exp(-2*(x0 - 0.4)**2)",
]


def trace_corpus() -> list[AnalyticFunction]:
    """Ten smooth functions of one variable with square-integrable derivative."""
    return [AnalyticFunction(e, 1) for e in _TRACE_1D]


def trace_point_set() -> PointSet:
    """Six irregularly spaced points in ``[-1, 1]`` (dyadic, so they stay grid nodes)."""
    return PointSet(np.array([-1.0, -0.625, -0.25, 0.125, 0.5, 1.0])[:, None])


def two_point_fixture() -> tuple[PointSet, np.ndarray]:
    """``E = {0, 1}`` with ``f = (0, 1)``."""
    return PointSet(np.array([[0.0], [1.0]])), np.array([0.0, 1.0])
