#!/usr/bin/env python3
"""Hunt for order-0-equivalent pairs that are not fully equivalent.

Whether order-0 equivalence implies full equivalence without the
single-target-chart condition is open; this scan runs both checks over a
corpus of net pairs (including nets that fail the single-chart condition,
like the winding family) and reports any pair with equiv0 = Pass but
equiv = Fail.  Finding none proves nothing; finding one would be a
counterexample worth a close look.

Usage: python scripts/equivalence_order_scan.py [--include-unverified]
"""

import sys

from mapnets.asymptotics import Status
from mapnets.config import Config
from mapnets.gallery import get_atlas, get_net, get_region
from mapnets.gmap import angle_net, check_equiv, check_equiv0, check_single_chart


def corpus(include_unverified: bool):
    line = get_atlas("line")
    circle = get_atlas("circle")
    pairs = [
        ("sigma_sin/sin_plus_flat", get_net("sigma_sin"), get_net("sin_plus_flat")),
        ("s1_jump/s1_jump_flat", get_net("s1_jump"), get_net("s1_jump_flat")),
        ("sigma_sin/sin_plus_eps2", get_net("sigma_sin"), get_net("sin_plus_eps2")),
    ]
    if include_unverified:
        # winding nets wrap the whole circle: the single-chart condition
        # fails, which is exactly the regime the open question concerns
        w = get_net("winder")
        w_flat = angle_net(line, circle,
                           lambda eps: (lambda t, e=eps: t / e + 2.718 ** (-1.0 / e)),
                           tag="winder_flat")
        pairs.append(("winder/winder_flat", w, w_flat))
        slow = angle_net(line, circle,
                         lambda eps: (lambda t, e=eps: t / e + e * t),
                         tag="winder_drift")
        pairs.append(("winder/winder_drift", w, slow))
    return pairs


def main(argv):
    include_unverified = "--include-unverified" in argv
    cfg = Config()
    grid = cfg.grid()
    K = get_region("K_half")
    found = []
    for name, u, v in corpus(include_unverified):
        sc = check_single_chart(u, K, grid, cfg)
        e0 = check_equiv0(u, v, K, None, grid, cfg)
        ef = check_equiv(u, v, [K], grid, cfg.k_max, cfg)
        marker = ""
        if e0.status is Status.PASS and ef.status is Status.FAIL:
            marker = "  <-- order-0 pass without full equivalence"
            found.append(name)
        print(f"{name:<28} single-chart={sc.status:<13} "
              f"equiv0={e0.status:<13} equiv={ef.status}{marker}")
    if found:
        print(f"\ncandidate counterexamples: {found}")
        print("(verify by hand before believing a numerical verdict)")
    else:
        print("\nno order-0/full-equivalence gap observed on this corpus")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
