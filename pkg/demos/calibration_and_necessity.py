"""Sobolev-Poincare constants and the weight built from a gradient.

The packaged constants C(n, q) are compared with fresh measurements on a
coarser and a finer grid.  Then, for a few smooth F, the weight
h = 2 C M[|grad F|**s]**(1/s) is built and the three properties it should
have are measured: h**q is A1, |F(x) - F(y)| <= delta_q(x, y : h), and
||h||_p is controlled by ||grad F||_p.
"""

from sobolev_traces.calibration import (CALIBRATION_CASES, CALIBRATION_CELLS, calibrate_sp, calibration_grid,
                                        load_calibration, necessity_checks)
from sobolev_traces.corpus import calibration_corpus
from sobolev_traces.fields import ScalarField


def main():
    frozen = load_calibration()
    print("calibrated Sobolev-Poincare constants")
    for n, q in CALIBRATION_CASES:
        base = CALIBRATION_CELLS[n]
        coarse = calibrate_sp(n, q, base // 2)[0]
        print(f"  n={n} q={q:<4g} C={frozen[(n, q)]:.5f}  at half resolution {coarse:.5f}")

    print("\nnecessity weight, n=1, q=1.5, p=2")
    g = calibration_grid(1, 256)
    for f in calibration_corpus(1)[:6]:
        F = ScalarField(g, f(g.nodes()).reshape(g.shape))
        r = necessity_checks(F, 2.0, 1.5, frozen[(1, 1.5)])
        print(f"  {str(f.expr):<16} A1={r['a1']:.3f}  max |dF|/delta={r['fsp_ratio']:.3f}  "
              f"||h||_p/||grad F||_p={r['lp_ratio']:.3f} (bound {r['lp_bound']:.1f})")


if __name__ == "__main__":
    main()
