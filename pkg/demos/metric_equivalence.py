"""The pre-metric delta_q and its geodesic distance d_q for A1 and non-A1 weights.

For an A1 weight the ratio max delta_q / d_q over all node pairs settles as
the grid refines.  For the wall weight, which collapses next to a unit
mass, it keeps growing: the geodesic metric no longer sees the pre-metric.
"""

from sobolev_traces.corpus import a1_weights, non_a1_weights
from sobolev_traces.fields import WeightField
from sobolev_traces.geometry import Grid
from sobolev_traces.maximal import a1_norm
from sobolev_traces.metrics import GeodesicGraph, QuasiMetricSpec


def main():
    q = 2.0
    weights = {**a1_weights(1), "wall": non_a1_weights(1, q)["wall"]}
    print(f"{'weight':<18}{'A1 @256':>10}" + "".join(f"{c:>10}" for c in (32, 64, 128, 256)))
    for name, make in weights.items():
        row = []
        for cells in (32, 64, 128, 256):
            g = Grid.vertex_centered(-1, 1, cells, 1)
            w = make(g)
            h = WeightField(g, w.values ** (1 / q))
            row.append(GeodesicGraph(QuasiMetricSpec(q, h), 3).equivalence_ratio())
        a1 = a1_norm(w).norm_estimate
        print(f"{name:<18}{a1:>10.3g}" + "".join(f"{r:>10.3f}" for r in row))


if __name__ == "__main__":
    main()
