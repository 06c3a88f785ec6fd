#!/usr/bin/env python3
"""Grid-depth sweep: stability of fitted derivative-growth slopes.

For the circle-valued jump net, sweeps the grid depth and reports the fitted
first-derivative slope against the closed-form sup (1+eps)(1+1/eps)/2, whose
exact order is -1.  Verdicts may soften to Inconclusive on shallow grids but
should never flip sign.

Usage: python scripts/slope_scan.py [k_max_grid ...]
"""

import sys

from mapnets.config import Config
from mapnets.gallery import get_net, get_region
from mapnets.gmap import check_moderate


def main(depths):
    u = get_net("s1_jump")
    K = get_region("K_unit")
    print(f"{'grid':>6} {'points':>7} {'status':>13} {'k=1 slope':>10}")
    for k_max in depths:
        cfg = Config(grid_k_max=k_max)
        v = check_moderate(u, K, cfg.grid(), cfg=cfg)
        slopes = [d.estimate.slope for lbl, d in v.details.items()
                  if lbl.startswith("k=1|") and d.estimate is not None]
        k1 = min(slopes) if slopes else float("nan")
        print(f"2^-{k_max:<3} {k_max - 1:>7} {v.status:>13} {k1:>10.4f}")


if __name__ == "__main__":
    depths = [int(a) for a in sys.argv[1:]] or [8, 10, 12, 16, 20, 24]
    main(depths)
