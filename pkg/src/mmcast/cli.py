"""Command line entry point: ``mmcast solve|simulate|sweep|figure``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import MmcastError
from .scenario import Scenario, bundled, load_scenario
from .sim import SimConfig, simulate
from .sweep import POLICY_KINDS, SweepRow, emit, format_csv, run_figure, solve_policy, sweep

log = logging.getLogger("mmcast")


def _scenario(args) -> Scenario:
    path = Path(args.scenario)
    if path.exists():
        scn = load_scenario(path)
    elif args.scenario in ("table1", "twouser"):
        scn = bundled(args.scenario)
    else:
        raise MmcastError(f"no such scenario file: {args.scenario}")
    changes = {}
    if args.m is not None:
        changes["m"] = args.m
    if args.rmax is not None:
        changes["r_max"] = args.rmax
    return scn.replace(**changes) if changes else scn


def _sim_config(args, scn: Scenario) -> SimConfig:
    return SimConfig(n_runs=args.runs, seed=args.seed, mode=args.mode or scn.reception_mode)


def cmd_solve(args) -> int:
    scn = _scenario(args)
    policy = solve_policy(scn, args.policy, args.epsilon, allow_large=args.allow_large)
    print(f"{policy.kind} epsilon={args.epsilon!r} J0={policy.J0!r}")
    if args.dump:
        Path(args.dump).write_text(policy.dump(), encoding="utf-8")
        log.info("policy written to %s", args.dump)
    return 0


def cmd_simulate(args) -> int:
    scn = _scenario(args)
    policy = solve_policy(scn, args.policy, args.epsilon, allow_large=args.allow_large)
    stats = simulate(policy, scn, _sim_config(args, scn))
    row = SweepRow(scn.name, policy.kind, float(args.epsilon), scn.m, scn.r_max, stats, policy.J0)
    if args.out:
        out = Path(args.out)
        text = format_csv([row])
        if out.exists() and out.stat().st_size > 0:
            text = text.split("\n", 1)[1]
        with open(out, "a", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(format_csv([row]))
    return 0


def cmd_sweep(args) -> int:
    scn = _scenario(args)
    eps = [float(e) for e in args.epsilons.split(",")] if args.epsilons else None
    rows = sweep(
        scn,
        args.policy,
        eps,
        _sim_config(args, scn),
        workers=args.workers,
        allow_large=args.allow_large,
    )
    if args.out:
        emit(rows, args.out)
    else:
        sys.stdout.write(format_csv(rows))
    return 0


def cmd_figure(args) -> int:
    config = SimConfig(n_runs=args.runs, seed=args.seed)
    path = run_figure(args.figure, config, args.out_dir, workers=args.workers)
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmcast", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_args(sp):
        sp.add_argument("scenario", help="scenario JSON path, or 'table1' / 'twouser'")
        sp.add_argument("--m", type=int, help="override packets needed to decode")
        sp.add_argument("--rmax", type=int, help="override retransmission rounds")
        sp.add_argument("--policy", choices=POLICY_KINDS, default="hierarchical")
        sp.add_argument("--allow-large", action="store_true", help="let the exact solver try N > 4")

    def sim_args(sp):
        sp.add_argument("--runs", type=int, default=100_000)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--mode", choices=("worst-user", "per-user"))

    sp = sub.add_parser("solve", help="solve one policy and report J0")
    scenario_args(sp)
    sp.add_argument("--epsilon", type=float, required=True)
    sp.add_argument("--dump", help="write the policy table here")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("simulate", help="solve then Monte Carlo one policy")
    scenario_args(sp)
    sim_args(sp)
    sp.add_argument("--epsilon", type=float, required=True)
    sp.add_argument("--out", help="append the result row to this CSV")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="epsilon sweep for one policy kind")
    scenario_args(sp)
    sim_args(sp)
    sp.add_argument("--epsilons", help="comma separated list (default: 12-point log grid)")
    sp.add_argument("--out", help="CSV path (default: stdout)")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("figure", help="write the data behind figure 2, 3 or 5")
    sp.add_argument("figure", type=int, choices=(2, 3, 5))
    sp.add_argument("--runs", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", default="results")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_figure)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except MmcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
