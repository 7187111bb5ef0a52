"""Refinement study for the rank-1 transport solution.

Solves A1 with u = 0 and no regularization at k = 1 for a ladder of (m, grid)
pairs and prints the sup relative error of the fitted gradient against the
closed form on [0.3, 0.9], together with the successive error ratios.
"""

import argparse
import time

import numpy as np

from invariant_kahler.densities import DensitySpec
from invariant_kahler.geometry import default_stencil_radius, fit_local_quadratic
from invariant_kahler.ot_solver import rank1_closed_form, solve_transport
from invariant_kahler.rootsys import load_root_system


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--m0", type=int, default=200)
    ap.add_argument("--grid0", type=int, default=4096)
    ap.add_argument("--factor", type=float, default=4.0, help="stencil radius in nearest-neighbour spacings")
    args = ap.parse_args()

    spec = DensitySpec(load_root_system("A1"))
    xs = np.linspace(0.3, 0.9, 61)
    exact = rank1_closed_form(spec, xs)
    prev = None
    print(f"{'m':>6} {'grid':>7} {'iters':>5} {'residual':>10} {'sup rel err':>12} {'ratio':>6} {'time':>7}")
    for level in range(args.levels):
        m, grid = args.m0 * 2**level, args.grid0 * 2**level
        t0 = time.perf_counter()
        run = solve_transport(spec, 1.0, m, grid)
        r = default_stencil_radius(run.cloud.points, args.factor)
        fitted = np.array([fit_local_quadratic(run.potential, [x], r).grad[0] for x in xs])
        err = float(np.max(np.abs(fitted - exact) / exact))
        ratio = f"{prev / err:6.2f}" if prev else "     -"
        d = run.diagnostics
        print(f"{m:6d} {grid:7d} {d.iterations:5d} {d.max_rel_cell_residual:10.2e} {err:12.3e} {ratio} {time.perf_counter() - t0:6.2f}s")
        prev = err


if __name__ == "__main__":
    main()
