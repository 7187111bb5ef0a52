"""Solve the Ricci-flat A2 problem on one ball and report the checks.

Prints solver convergence, the weak-solution (Monge-Ampere measure) residual
on the full ball and on a half-plane, properness along chamber rays, and the
fitted Ricci defect at a few chamber points.
"""

import argparse

import numpy as np

from invariant_kahler.densities import DensitySpec
from invariant_kahler.geometry import (
    default_stencil_radius,
    fit_local_quadratic,
    properness_check,
    ricci_defect,
    spectral_data,
)
from invariant_kahler.ot_solver import ball_region, halfspace_region, ma_measure_check, solve_transport
from invariant_kahler.rootsys import chamber_rays, load_root_system


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=float, default=2.0)
    ap.add_argument("--m", type=int, default=600)
    ap.add_argument("--grid", type=int, default=256)
    ap.add_argument("--eps", type=float, default=None, help="regularization (default 1/k)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rs = load_root_system("A2")
    eps = 1.0 / args.k if args.eps is None else args.eps
    spec = DensitySpec(rs, None, eps)
    run = solve_transport(spec, args.k, args.m, args.grid, seed=args.seed)
    d = run.diagnostics
    print(f"R_k = {run.radius:.8f}, {len(run.cloud.points)} targets, eps = {eps:g}")
    print(f"newton iterations {d.iterations}, max rel cell residual {d.max_rel_cell_residual:.2e}")
    print(f"MA measure residual, full ball   {ma_measure_check(run, ball_region(2, args.k)):.2e}")
    print(f"MA measure residual, half-plane  {ma_measure_check(run, halfspace_region([0.3, 1.0], 0.2)):.2e}")
    rays = np.vstack([chamber_rays(rs), -chamber_rays(rs)])
    prop = properness_check(run.potential, rays, 0.95 * args.k)
    print(f"proper on sampled rays: {prop.proper} (min margin {prop.min_margin:.4f})")
    r = default_stencil_radius(run.cloud.points)
    print(f"stencil radius {r:.3f}")
    for x in ([0.2, 0.8], [0.4, 0.6], [0.1, 1.2]):
        fit = fit_local_quadratic(run.potential, x, r)
        sm = spectral_data(rs, x, fit.grad, fit.hess)
        print(f"x = {x}: defect {ricci_defect(rs, sm):.4f}, fit residual {fit.residual:.1e}")


if __name__ == "__main__":
    main()
