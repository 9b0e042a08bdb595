"""Whitney decomposition, partition of unity and jet extension in the plane.

Three points carry the second order jets of a smooth function.  The script
shows the cube counts per size, checks that the partition of unity sums to
one, and compares the extension with the original function near and far
from the points.
"""

from collections import Counter

import numpy as np

from sobolev_traces.extension import JetField, PartitionOfUnity, whitney_extend_jet
from sobolev_traces.geometry import Cube, Grid, PointSet, whitney_decompose
from sobolev_traces.polynomials import AnalyticFunction


def main():
    E = PointSet([[-0.5, 0.25], [0.5, 0.0], [0.0, -0.5]])
    W = whitney_decompose(E, Cube((0.0, 0.0), 1.0), 8)
    sizes = Counter(round(Q.diam, 6) for Q in W.cubes)
    print(f"{len(W)} Whitney cubes, {len(W.collar)} collar cubes")
    for d in sorted(sizes, reverse=True):
        print(f"  diam {d:<10g} x {sizes[d]}")

    P = PartitionOfUnity(W)
    g = Grid.vertex_centered(-1, 1, 40, 2)
    tot, cov = P.sum(g.nodes())
    print(f"\npartition of unity: max |sum - 1| = {np.max(np.abs(tot[cov] - 1)):.2e} on {cov.sum()} nodes")
    consts = P.derivative_constants(g.nodes(), 2)
    print("scaled derivative bounds max |D^b phi_Q| diam(Q)^|b|:", {k: round(v, 1) for k, v in consts.items()})

    f = AnalyticFunction("exp(x0)*cos(2*x1)", 2)
    J = JetField.from_function(f, E, 3)
    ext = whitney_extend_jet(J, W, P, g, order=1)
    X = g.nodes()
    mask = ext.covered | ext.on_E
    dist = np.min(np.max(np.abs(X[:, None, :] - E.points[None]), axis=2), axis=1)
    err = np.abs(ext.values - f(X))
    for lo, hi in ((0.0, 0.1), (0.1, 0.3), (0.3, 2.0)):
        sel = mask & (dist >= lo) & (dist < hi)
        print(f"  |F - f| for dist(x, E) in [{lo}, {hi}): max {err[sel].max():.3e}")
    print("(the error shrinks toward E, where the jets carry the second order Taylor data)")


if __name__ == "__main__":
    main()
