"""Split -a11 on the flat scene into the flat-block term, the off-flat term and a remainder.

-a11 ~ 2 R0 / eps + off-flat integral + K, where K collects the coupling through
the exterior and the fringe at the ends of the flat block.  A power fit of -a11
over a finite grid only reaches slope -1 when K is small next to 2 R0 / eps.
"""
import argparse

import numpy as np

from narrowgap.asymptotics import DEFAULT_EPS_GRID, arctan_closed_form, fit_power
from narrowgap.capacitance import solve_scene
from narrowgap.mesh import triangulate_scene
from narrowgap.scenes import canonical_policy, canonical_scene


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps-grid", default=",".join(map(str, DEFAULT_EPS_GRID)))
    args = ap.parse_args()
    grid = [float(e) for e in args.eps_grid.split(",")]
    rows = []
    print(f"{'eps':>9} {'-a11':>12} {'2R0/eps':>12} {'off-flat':>10} {'remainder':>10}")
    for e in grid:
        s = canonical_scene("flat", e)
        p = s.profile
        sol = solve_scene(s, mesh=triangulate_scene(s, canonical_policy("flat")))
        total = -sol.flux.a11
        block = 2 * p.R0 / e
        # both gap halves see 1/(eps + (c1 + c2)(|x| - R0)^2); rescale to the unit-coefficient integral
        off = arctan_closed_form(0.0, np.sqrt(p.c1 + p.c2) * (p.R1 - p.R0), e) / np.sqrt(p.c1 + p.c2)
        rows.append((e, total))
        print(f"{e:9.2e} {total:12.4f} {block:12.4f} {off:10.4f} {total - block - off:10.4f}")
    eps, y = np.array(rows).T
    print(f"fitted slope of -a11: {fit_power(eps, y).slope:.4f}")


if __name__ == "__main__":
    main()
