"""How the per-beam packet cap changes solved costs on the 2-user and 8-user layouts."""

import csv
import sys

from _common import parser

from mmcast.scenario import bundled, two_user
from mmcast.sweep import default_epsilons, solve_policy


def main():
    p = parser(__doc__)
    p.add_argument("--caps", default="2,5,10,15,20")
    args = p.parse_args()
    caps = [int(c) for c in args.caps.split(",")]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["scenario", "policy", "x_cap", "epsilon", "J0"])
    jobs = [(two_user(8.0), k) for k in ("exact", "hierarchical", "unicast")]
    jobs += [(bundled("table1"), k) for k in ("hierarchical", "unicast")]
    for scn, kind in jobs:
        eps = default_epsilons(scn)[[3, 6, 9]]
        for cap in caps:
            s = scn.replace(x_cap=cap)
            for e in eps:
                w.writerow([scn.name, kind, cap, repr(float(e)), repr(solve_policy(s, kind, e).J0)])


if __name__ == "__main__":
    main()
