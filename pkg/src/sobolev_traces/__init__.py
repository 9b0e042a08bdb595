"""Weighted pre-metrics, Whitney-type extension operators and trace-norm functionals on grids."""

__version__ = "0.1.0"

from .geometry import Cube, Grid, PointSet, WhitneyDecomposition, whitney_decompose  # noqa: E402
from .fields import ScalarField, WeightField  # noqa: E402
from .polynomials import AnalyticFunction, Polynomial  # noqa: E402

__all__ = [
    "Cube",
    "Grid",
    "PointSet",
    "WhitneyDecomposition",
    "whitney_decompose",
    "ScalarField",
    "WeightField",
    "AnalyticFunction",
    "Polynomial",
]
