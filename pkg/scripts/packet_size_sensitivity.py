"""Decode probabilities and sweep outcomes for a few payload sizes on the two-user layout."""

import dataclasses

from _common import config, parser

from mmcast.scenario import two_user
from mmcast.sweep import emit, sweep


def main():
    p = parser(__doc__)
    p.add_argument("--payloads", default="8000,40000,80000", help="payload bits per data packet")
    args = p.parse_args()
    rows = []
    for bits in (int(b) for b in args.payloads.split(",")):
        base = two_user(8.0)
        scn = base.replace(
            phy=dataclasses.replace(base.phy, payload_bits=bits), name=f"{base.name}_bits{bits}"
        )
        print(bits, "bits: p_dec(1,2) =", scn.p_dec((1, 2)), "tau =", scn.tau)
        for kind in ("unicast", "hierarchical"):
            rows.extend(sweep(scn, kind, None, config(args), workers=args.workers))
    print(emit(rows, f"{args.out_dir}/packet_size.csv"))


if __name__ == "__main__":
    main()
