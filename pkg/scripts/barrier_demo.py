#!/usr/bin/env python3
"""Solve one Dirichlet barrier on a curved slab and dump its trace."""

import argparse

import numpy as np

from aclab import barrier as bar
from aclab import geometry as geo
from aclab import io, profile, wells


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--ny", type=int, default=19)
    ap.add_argument("--out", default="barrier_trace.json")
    args = ap.parse_args()

    prof = profile.solve_profile(wells.standard_well())
    base = geo.BaseGrid.interval(1.0, args.ny)
    metric = geo.synthetic_potential(
        base,
        lambda y: -(0.4 + 0.2 * np.cos(2 * np.pi * y)),
        cubic=lambda y: 0.8 + 0.3 * np.sin(2 * np.pi * y),
        z_range=(-0.48, 0.48),
    )
    prob = bar.BarrierProblem(metric, prof, args.eps, points_per_band=12.0)
    ny, nz = prob.disc.shape
    bd = bar.BoundaryData(
        v_flat_hat={"y_lo": np.zeros(nz), "y_hi": np.zeros(nz),
                    "z_lo": np.zeros(ny), "z_hi": np.zeros(ny)},
        v_sharp_hat={"y_lo": np.zeros(nz), "y_hi": np.zeros(nz)},
        zeta_hat=(0.0, 0.0),
    )
    state = bar.fixed_point_solve(bd, metric, prof, args.eps, tol=5e-9, problem=prob)
    io.write_json(args.out, {
        "update_norms": state.update_norms,
        "contraction_factors": state.contraction_factors,
        "residual": state.residual,
        "residual_grid_fd": state.residual_grid_fd,
        "norms": state.norms,
    })
    print(f"residual {state.residual:.3e} after {len(state.update_norms)} iterations; wrote {args.out}")


if __name__ == "__main__":
    main()
